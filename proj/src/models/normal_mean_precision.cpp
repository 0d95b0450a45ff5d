#include "bayeseval/models/normal_mean_precision.hpp"

#include <cmath>

#include "bayeseval/errors.hpp"

namespace bayeseval {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

NormalMeanPrecisionModel::NormalMeanPrecisionModel(double a) : a_(a) {
    if (!(a > 0.0)) throw ConfigError("bad_hyper", "hyperparameter a must be positive", {{"a", a}});
}

double NormalMeanPrecisionModel::log_density(std::span<const double> obs, std::span<const double> theta) const {
    const double u = theta[1];
    const double s = std::exp(u);
    const double r = obs[0] - theta[0];
    return 0.5 * u - 0.5 * kLog2Pi - 0.5 * s * r * r;
}

double NormalMeanPrecisionModel::log_prior(std::span<const double> theta) const {
    // (a/2) sqrt(s/2pi) e^{-(s/2)(m^2+a)} in (m, s), times the Jacobian s of
    // s = e^u
    const double m = theta[0];
    const double u = theta[1];
    const double s = std::exp(u);
    return std::log(0.5 * a_) + 1.5 * u - 0.5 * kLog2Pi - 0.5 * s * (m * m + a_);
}

void NormalMeanPrecisionModel::sample_prior(std::span<double> theta, Rng& rng) const {
    // marginally s ~ Exponential(a/2), then m | s ~ N(0, 1/s)
    const double s = rng.exponential(0.5 * a_);
    theta[0] = rng.normal() / std::sqrt(s);
    theta[1] = std::log(s);
}

void NormalMeanPrecisionModel::grad_log_density(std::span<const double> obs, std::span<const double> theta,
                                                std::span<double> grad) const {
    const double s = std::exp(theta[1]);
    const double r = obs[0] - theta[0];
    grad[0] = s * r;
    grad[1] = 0.5 - 0.5 * s * r * r;
}

void NormalMeanPrecisionModel::grad_log_prior(std::span<const double> theta, std::span<double> grad) const {
    const double m = theta[0];
    const double s = std::exp(theta[1]);
    grad[0] = -s * m;
    grad[1] = 1.5 - 0.5 * s * (m * m + a_);
}

NormalFnCn normal_fn_cn(const DataView& data, double a) {
    if (!(a > 0.0)) throw ConfigError("bad_hyper", "hyperparameter a must be positive", {{"a", a}});
    const std::size_t n = data.size();
    if (n == 0) throw DomainError("empty_data", "closed forms need data");
    const double nn = static_cast<double>(n);
    double A = 0.0, B = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = data.row(i)[0];
        A += x * x;
        B += x;
    }
    const double full = (A + a) * (nn + 1.0) - B * B;
    if (!(full > 0.0)) {
        throw DomainError("degenerate_statistics", "degenerate sufficient statistics",
                          {{"argument", full}});
    }
    NormalFnCn out;
    out.f_n = -std::log(a) + 0.5 * (nn + 1.0) * std::log(full);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = data.row(i)[0];
        const double term = (A - x * x + a) * nn - (B - x) * (B - x);
        if (!(term > 0.0)) {
            throw DomainError("degenerate_statistics", "degenerate sufficient statistics",
                              {{"index", i}, {"argument", term}});
        }
        sum += std::log(term);
    }
    out.c_n = 0.5 * (nn + 1.0) * std::log(full) - 0.5 * sum;
    return out;
}

NormalArgmin normal_fn_cn_argmin(const DataView& data, double upper, int grid) {
    if (!(upper > 0.0) || grid < 8) {
        throw ConfigError("bad_config", "argmin search needs a positive range and a real grid",
                          {{"upper", upper}, {"grid", grid}});
    }
    // log-spaced coarse pass, then a golden-section polish around the best cell
    auto eval = [&data](double a) { return normal_fn_cn(data, a); };
    double best_f = std::numeric_limits<double>::infinity();
    double best_c = std::numeric_limits<double>::infinity();
    double arg_f = upper, arg_c = upper;
    const double lo = 1e-3;
    for (int g = 0; g <= grid; ++g) {
        const double t = static_cast<double>(g) / static_cast<double>(grid);
        const double a = lo * std::pow(upper / lo, t);
        const NormalFnCn v = eval(a);
        if (v.f_n < best_f) {
            best_f = v.f_n;
            arg_f = a;
        }
        if (v.c_n < best_c) {
            best_c = v.c_n;
            arg_c = a;
        }
    }
    const double ratio = std::pow(upper / lo, 1.0 / static_cast<double>(grid));
    auto polish = [&](double center, bool use_f) {
        double a_lo = std::max(lo, center / ratio);
        double a_hi = std::min(upper, center * ratio);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = a_hi - phi * (a_hi - a_lo);
        double x2 = a_lo + phi * (a_hi - a_lo);
        double f1 = use_f ? eval(x1).f_n : eval(x1).c_n;
        double f2 = use_f ? eval(x2).f_n : eval(x2).c_n;
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                a_hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = a_hi - phi * (a_hi - a_lo);
                f1 = use_f ? eval(x1).f_n : eval(x1).c_n;
            } else {
                a_lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = a_lo + phi * (a_hi - a_lo);
                f2 = use_f ? eval(x2).f_n : eval(x2).c_n;
            }
        }
        return 0.5 * (a_lo + a_hi);
    };
    return {polish(arg_f, true), polish(arg_c, false)};
}

}  // namespace bayeseval
