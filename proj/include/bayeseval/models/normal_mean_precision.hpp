#pragma once

#include "bayeseval/model.hpp"

namespace bayeseval {

// Gaussian with unknown mean m and precision s, under the hyperprior
//   prior(m, s | a) = (a/2) sqrt(s / 2 pi) exp(-(s/2)(m^2 + a)),  a > 0.
// Flat parameters are (m, log s).  The free energy and leave-one-out loss
// have closed forms in the hyperparameter a whose minimizers separate as n
// grows; see normal_fn_cn.
class NormalMeanPrecisionModel final : public ModelSpec {
public:
    explicit NormalMeanPrecisionModel(double a);

    std::string name() const override { return "normal_mean_precision"; }
    int dim() const override { return 2; }
    std::vector<int> obs_shape() const override { return {1}; }

    double log_density(std::span<const double> obs, std::span<const double> theta) const override;
    double log_prior(std::span<const double> theta) const override;
    bool proper_prior() const override { return true; }
    void sample_prior(std::span<double> theta, Rng& rng) const override;

    bool has_gradients() const override { return true; }
    void grad_log_density(std::span<const double> obs, std::span<const double> theta,
                          std::span<double> grad) const override;
    void grad_log_prior(std::span<const double> theta, std::span<double> grad) const override;

    double a() const { return a_; }

private:
    double a_;
};

// Free energy and leave-one-out loss as functions of the hyperparameter,
// each up to an additive constant independent of a:
//   F_n(a) = -log a + ((n+1)/2) log((A+a)(n+1) - B^2)
//   C_n(a) = ((n+1)/2) log((A+a)(n+1) - B^2)
//            - (1/2) sum_i log((A - X_i^2 + a) n - (B - X_i)^2)
// with A = sum X_i^2 and B = sum X_i.
struct NormalFnCn {
    double f_n;
    double c_n;
};
NormalFnCn normal_fn_cn(const DataView& data, double a);

// Minimizers over a grid of a in (0, upper]; used to study how the two
// criteria pick different hyperparameters.
struct NormalArgmin {
    double f_argmin;
    double c_argmin;
};
NormalArgmin normal_fn_cn_argmin(const DataView& data, double upper = 20.0, int grid = 4000);

}  // namespace bayeseval
