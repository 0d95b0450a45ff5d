#include "bayeseval/models/normal_location.hpp"

#include <cmath>
#include <numbers>

#include "bayeseval/errors.hpp"

namespace bayeseval {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double gaussian_logpdf(double x, double mean, double var) {
    const double r = x - mean;
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}
}  // namespace

NormalLocationModel::NormalLocationModel(double tau, double m0, double v0)
    : tau_(tau), m0_(m0), v0_(v0) {
    if (!(tau > 0.0) || !(v0 > 0.0)) {
        throw ConfigError("bad_hyper", "normal location model needs tau > 0 and v0 > 0",
                          {{"tau", tau}, {"v0", v0}});
    }
}

double NormalLocationModel::log_density(std::span<const double> obs, std::span<const double> theta) const {
    return gaussian_logpdf(obs[0], theta[0], 1.0 / tau_);
}

double NormalLocationModel::log_prior(std::span<const double> theta) const {
    return gaussian_logpdf(theta[0], m0_, v0_);
}

void NormalLocationModel::sample_prior(std::span<double> theta, Rng& rng) const {
    theta[0] = m0_ + std::sqrt(v0_) * rng.normal();
}

void NormalLocationModel::grad_log_density(std::span<const double> obs, std::span<const double> theta,
                                           std::span<double> grad) const {
    grad[0] = tau_ * (obs[0] - theta[0]);
}

void NormalLocationModel::grad_log_prior(std::span<const double> theta, std::span<double> grad) const {
    grad[0] = -(theta[0] - m0_) / v0_;
}

NormalLocationModel::Posterior NormalLocationModel::posterior(const DataView& data, double beta) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += data.row(i)[0];
    const double precision = 1.0 / v0_ + beta * tau_ * static_cast<double>(data.size());
    const double mean = (m0_ / v0_ + beta * tau_ * sum) / precision;
    return {mean, 1.0 / precision};
}

double NormalLocationModel::log_marginal(const DataView& data) const {
    // data ~ N(m0 * 1, (1/tau) I + v0 * 1 1^T); Woodbury keeps it O(n)
    const double n = static_cast<double>(data.size());
    const double sigma2 = 1.0 / tau_;
    double ss = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data.row(i)[0] - m0_;
        ss += r * r;
        sum += r;
    }
    const double log_det = (n - 1.0) * std::log(sigma2) + std::log(sigma2 + n * v0_);
    const double quad = (ss - v0_ * sum * sum / (sigma2 + n * v0_)) / sigma2;
    return -0.5 * (n * kLog2Pi + log_det + quad);
}

double NormalLocationModel::predictive_logpdf(const DataView& data, double y) const {
    const Posterior post = posterior(data);
    return gaussian_logpdf(y, post.mean, 1.0 / tau_ + post.var);
}

NormalLocationModel::Exact NormalLocationModel::exact_eval(const DataView& data) const {
    const std::size_t n = data.size();
    if (n == 0) throw DomainError("empty_data", "exact evaluation of an empty sample");
    const double nn = static_cast<double>(n);
    const Posterior post = posterior(data);

    double t_acc = 0.0, vbar = 0.0, plug = 0.0, mean_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = data.row(i)[0];
        t_acc += gaussian_logpdf(x, post.mean, 1.0 / tau_ + post.var);
        const double dev = x - post.mean;
        // V_theta[log p(x|theta)] for theta ~ N(mean, var)
        vbar += tau_ * tau_ * (0.5 * post.var * post.var + post.var * dev * dev);
        plug += gaussian_logpdf(x, post.mean, 1.0 / tau_);
        mean_loss += -gaussian_logpdf(x, post.mean, 1.0 / tau_) + 0.5 * tau_ * post.var;
    }
    Exact out;
    out.t_n = -t_acc / nn;
    out.w_n = out.t_n + vbar / nn;
    out.c_n = exact_loo(data);
    out.dic = 2.0 * mean_loss / nn - (-plug / nn);
    return out;
}

double NormalLocationModel::exact_loo(const DataView& data) const {
    const std::size_t n = data.size();
    if (n < 2) throw DomainError("too_few_observations", "leave-one-out needs n >= 2", {{"n", n}});
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const DataView rest = data.excluding(i);
        acc += predictive_logpdf(rest, data.row(i)[0]);
    }
    return -acc / static_cast<double>(n);
}

double NormalLocationModel::exact_holdout(const DataView& train, const DataView& held_out) const {
    if (held_out.size() == 0) throw DomainError("empty_data", "hold-out split is empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
        acc += predictive_logpdf(train, held_out.row(i)[0]);
    }
    return -acc / static_cast<double>(held_out.size());
}

double NormalLocationModel::tempered_mean_total_loss(const DataView& data, double beta) const {
    const Posterior post = posterior(data, beta);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double x = data.row(i)[0];
        acc += -gaussian_logpdf(x, post.mean, 1.0 / tau_) + 0.5 * tau_ * post.var;
    }
    return acc;
}

double NormalLocationModel::exact_gen_loss(const DataView& data, double truth_mean, double truth_var) const {
    const Posterior post = posterior(data);
    const double pred_var = 1.0 / tau_ + post.var;
    const double dev = truth_mean - post.mean;
    return 0.5 * (kLog2Pi + std::log(pred_var)) + 0.5 * (truth_var + dev * dev) / pred_var;
}

NormalTruth::NormalTruth(double mean, double var) : mean_(mean), var_(var) {
    if (!(var > 0.0)) throw ConfigError("bad_hyper", "normal truth needs var > 0", {{"var", var}});
}

Dataset NormalTruth::sample(std::size_t n, Rng& rng) const {
    RowMatrix m(static_cast<Eigen::Index>(n), 1);
    const double sd = std::sqrt(var_);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), 0) = mean_ + sd * rng.normal();
    return Dataset({1}, std::move(m));
}

double NormalTruth::log_density(std::span<const double> obs) const {
    return gaussian_logpdf(obs[0], mean_, var_);
}

double NormalTruth::entropy() const {
    return 0.5 * (kLog2Pi + 1.0 + std::log(var_));
}

std::optional<Eigen::VectorXd> NormalTruth::realizing_params(const ModelSpec& model) const {
    const auto* nl = dynamic_cast<const NormalLocationModel*>(&model);
    if (nl == nullptr) return std::nullopt;
    if (std::abs(1.0 / nl->tau() - var_) > 1e-12 * var_) return std::nullopt;
    Eigen::VectorXd theta(1);
    theta[0] = mean_;
    return theta;
}

}  // namespace bayeseval
