#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace bayeseval {

// log(sum_i exp(v_i)) without overflow; -inf for an empty range.
double log_sum_exp(std::span<const double> v);

// log((1/n) sum_i exp(v_i))
double log_mean_exp(std::span<const double> v);

// log((1/n) sum_i exp(-v_i)), used by importance-sampling leave-one-out.
double log_mean_exp_negated(std::span<const double> v);

// digamma / trigamma for positive arguments (asymptotic series with
// recurrence shift; ~1e-12 absolute accuracy for x > 0).
double digamma(double x);
double trigamma(double x);

double log_beta(double a, double b);

// Gauss-Hermite rule for weight exp(-t^2), computed by Golub-Welsch.
// E_{y ~ N(mu, sigma^2)}[f(y)] = (1/sqrt(pi)) * sum_k w_k f(mu + sqrt(2) sigma t_k)
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussHermite gauss_hermite(int n);

// Numerically stable streaming mean/variance.
class Welford {
public:
    void add(double x) {
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return count_; }
    double mean() const { return mean_; }
    // unbiased sample variance; NaN for fewer than two points
    double variance() const {
        if (count_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(count_ - 1);
    }
    double variance_population() const {
        if (count_ == 0) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(count_);
    }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace bayeseval
