#include "bayeseval/models/poly_regression.hpp"

#include <cmath>

#include "bayeseval/errors.hpp"
#include "bayeseval/math.hpp"

namespace bayeseval {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double poly_eval(const Eigen::VectorXd& coeff, double x) {
    double acc = 0.0;
    for (Eigen::Index k = coeff.size() - 1; k >= 0; --k) acc = acc * x + coeff[k];
    return acc;
}

double student_t_logpdf(double y, double loc, double scale2, double nu) {
    const double z2 = (y - loc) * (y - loc) / (nu * scale2);
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)
        - 0.5 * std::log(nu * std::acos(-1.0) * scale2)
        - 0.5 * (nu + 1.0) * std::log1p(z2);
}

// sufficient statistics of a view under the polynomial basis
struct RegressionStats {
    Eigen::MatrixXd gram;   // Phi^T Phi
    Eigen::VectorXd xty;    // Phi^T y
    double yty = 0.0;
    std::size_t n = 0;
};

RegressionStats collect_stats(const DataView& data, int K) {
    RegressionStats st;
    st.gram = Eigen::MatrixXd::Zero(K, K);
    st.xty = Eigen::VectorXd::Zero(K);
    st.n = data.size();
    Eigen::VectorXd f(K);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto obs = data.row(i);
        const double x = obs[0];
        const double y = obs[1];
        f[0] = 1.0;
        for (int k = 1; k < K; ++k) f[k] = f[k - 1] * x;
        st.gram.selfadjointView<Eigen::Lower>().rankUpdate(f);
        st.xty += y * f;
        st.yty += y * y;
    }
    st.gram = st.gram.selfadjointView<Eigen::Lower>();
    return st;
}

PolyRegPosterior posterior_from_stats(const PolyRegHyper& h, const RegressionStats& st, double beta) {
    PolyRegPosterior post;
    post.n = st.n;
    post.beta = beta;
    post.lambda = beta * st.gram + h.d * Eigen::MatrixXd::Identity(h.K, h.K);
    post.lambda_llt.compute(post.lambda);
    if (post.lambda_llt.info() != Eigen::Success) {
        throw DomainError("posterior_undefined", "posterior undefined for this hyperparameter/data",
                          {{"reason", "ridge-augmented Gram matrix not positive definite"}});
    }
    post.mu = post.lambda_llt.solve(beta * st.xty);
    post.shape = h.b + 0.5 * (beta * static_cast<double>(st.n) - h.K);
    post.rate = h.c + 0.5 * (beta * st.yty - post.mu.dot(post.lambda * post.mu));
    post.log_det_lambda = 0.0;
    for (int k = 0; k < h.K; ++k) post.log_det_lambda += 2.0 * std::log(post.lambda_llt.matrixL()(k, k));
    if (!(post.shape > 0.0) || !(post.rate > 0.0)) {
        throw DomainError("posterior_undefined", "posterior undefined for this hyperparameter/data",
                          {{"shape", post.shape}, {"rate", post.rate}});
    }
    return post;
}

struct PredictiveMoments {
    double loc, scale2, nu;
};

PredictiveMoments predictive_moments(const PolyRegPosterior& post, const Eigen::VectorXd& f) {
    PredictiveMoments pm;
    pm.loc = post.mu.dot(f);
    pm.nu = 2.0 * post.shape;
    pm.scale2 = (post.rate / post.shape) * (1.0 + post.quad_inv(f));
    return pm;
}

class PolyRegContext final : public LikelihoodContext {
public:
    PolyRegContext(const PolyRegressionModel& model, const DataView& data)
        : K_(model.hyper().K), stats_(collect_stats(data, model.hyper().K)) {}

    double sum_log_density(std::span<const double> theta) const override {
        const Eigen::Map<const Eigen::VectorXd> a(theta.data(), K_);
        const double s = std::exp(theta[static_cast<std::size_t>(K_)]);
        const double nn = static_cast<double>(stats_.n);
        const double rss = stats_.yty - 2.0 * a.dot(stats_.xty) + a.dot(stats_.gram * a);
        return 0.5 * nn * theta[static_cast<std::size_t>(K_)] - 0.5 * nn * kLog2Pi - 0.5 * s * rss;
    }

    void grad_sum_log_density(std::span<const double> theta, std::span<double> grad) const override {
        const Eigen::Map<const Eigen::VectorXd> a(theta.data(), K_);
        const double s = std::exp(theta[static_cast<std::size_t>(K_)]);
        const double nn = static_cast<double>(stats_.n);
        const Eigen::VectorXd ga = s * (stats_.xty - stats_.gram * a);
        for (int k = 0; k < K_; ++k) grad[static_cast<std::size_t>(k)] = ga[k];
        const double rss = stats_.yty - 2.0 * a.dot(stats_.xty) + a.dot(stats_.gram * a);
        grad[static_cast<std::size_t>(K_)] = 0.5 * nn - 0.5 * s * rss;
    }

private:
    int K_;
    RegressionStats stats_;
};

}  // namespace

PolyRegressionModel::PolyRegressionModel(PolyRegHyper hyper) : hyper_(hyper) {
    if (hyper_.K < 1) throw ConfigError("bad_hyper", "polynomial basis needs K >= 1", {{"K", hyper_.K}});
    if (hyper_.c < 0.0 || hyper_.d < 0.0) {
        throw ConfigError("bad_hyper", "prior rates must be nonnegative",
                          {{"c", hyper_.c}, {"d", hyper_.d}});
    }
    proper_ = hyper_.b > 0.5 * hyper_.K && hyper_.c > 0.0 && hyper_.d > 0.0;
    if (proper_) {
        const double shape = hyper_.b - 0.5 * hyper_.K;
        log_prior_norm_ = 0.5 * hyper_.K * std::log(2.0 * std::acos(-1.0) / hyper_.d)
            + std::lgamma(shape) - shape * std::log(hyper_.c);
    } else {
        log_prior_norm_ = 0.0;
    }
}

void PolyRegressionModel::basis(double x, Eigen::VectorXd& f) const {
    f.resize(hyper_.K);
    f[0] = 1.0;
    for (int k = 1; k < hyper_.K; ++k) f[k] = f[k - 1] * x;
}

double PolyRegressionModel::log_density(std::span<const double> obs, std::span<const double> theta) const {
    const double u = theta[static_cast<std::size_t>(hyper_.K)];
    const double s = std::exp(u);
    double mean = 0.0;
    double xp = 1.0;
    for (int k = 0; k < hyper_.K; ++k) {
        mean += theta[static_cast<std::size_t>(k)] * xp;
        xp *= obs[0];
    }
    const double r = obs[1] - mean;
    return 0.5 * u - 0.5 * kLog2Pi - 0.5 * s * r * r;
}

double PolyRegressionModel::log_prior(std::span<const double> theta) const {
    const double u = theta[static_cast<std::size_t>(hyper_.K)];
    const double s = std::exp(u);
    double norm_a = 0.0;
    for (int k = 0; k < hyper_.K; ++k) norm_a += theta[static_cast<std::size_t>(k)] * theta[static_cast<std::size_t>(k)];
    return hyper_.b * u - hyper_.c * s - 0.5 * hyper_.d * s * norm_a - log_prior_norm_;
}

void PolyRegressionModel::sample_prior(std::span<double> theta, Rng& rng) const {
    if (!proper_) ModelSpec::sample_prior(theta, rng);  // throws
    const double s = rng.gamma(hyper_.b - 0.5 * hyper_.K) / hyper_.c;
    const double sd_a = 1.0 / std::sqrt(hyper_.d * s);
    for (int k = 0; k < hyper_.K; ++k) theta[static_cast<std::size_t>(k)] = sd_a * rng.normal();
    theta[static_cast<std::size_t>(hyper_.K)] = std::log(s);
}

void PolyRegressionModel::grad_log_density(std::span<const double> obs, std::span<const double> theta,
                                           std::span<double> grad) const {
    const double s = std::exp(theta[static_cast<std::size_t>(hyper_.K)]);
    double mean = 0.0;
    double xp = 1.0;
    for (int k = 0; k < hyper_.K; ++k) {
        mean += theta[static_cast<std::size_t>(k)] * xp;
        xp *= obs[0];
    }
    const double r = obs[1] - mean;
    xp = 1.0;
    for (int k = 0; k < hyper_.K; ++k) {
        grad[static_cast<std::size_t>(k)] = s * r * xp;
        xp *= obs[0];
    }
    grad[static_cast<std::size_t>(hyper_.K)] = 0.5 - 0.5 * s * r * r;
}

void PolyRegressionModel::grad_log_prior(std::span<const double> theta, std::span<double> grad) const {
    const double s = std::exp(theta[static_cast<std::size_t>(hyper_.K)]);
    double norm_a = 0.0;
    for (int k = 0; k < hyper_.K; ++k) {
        const double ak = theta[static_cast<std::size_t>(k)];
        norm_a += ak * ak;
        grad[static_cast<std::size_t>(k)] = -hyper_.d * s * ak;
    }
    grad[static_cast<std::size_t>(hyper_.K)] = hyper_.b - hyper_.c * s - 0.5 * hyper_.d * s * norm_a;
}

std::unique_ptr<LikelihoodContext> PolyRegressionModel::make_context(const DataView& data) const {
    return std::make_unique<PolyRegContext>(*this, data);
}

double PolyRegPosterior::quad_inv(const Eigen::VectorXd& f) const {
    return f.dot(lambda_llt.solve(f));
}

PolyRegPosterior polyreg_conjugate(const PolyRegressionModel& model, const DataView& data, double beta) {
    if (!(beta > 0.0)) throw ConfigError("bad_beta", "inverse temperature must be positive", {{"beta", beta}});
    return posterior_from_stats(model.hyper(), collect_stats(data, model.hyper().K), beta);
}

double polyreg_predictive_logpdf(const PolyRegressionModel& model, const PolyRegPosterior& post,
                                 std::span<const double> obs) {
    Eigen::VectorXd f;
    model.basis(obs[0], f);
    const PredictiveMoments pm = predictive_moments(post, f);
    return student_t_logpdf(obs[1], pm.loc, pm.scale2, pm.nu);
}

double polyreg_free_energy(const PolyRegressionModel& model, const DataView& data) {
    if (!model.proper_prior()) {
        throw DomainError("improper_prior", "free energy undefined; the prior is improper and the "
                          "marginal likelihood may be made infinite",
                          {{"model", model.name()}});
    }
    const PolyRegHyper& h = model.hyper();
    const PolyRegPosterior post = polyreg_conjugate(model, data);
    const double prior_shape = h.b - 0.5 * h.K;
    const double log_prior_norm = 0.5 * h.K * std::log(2.0 * std::acos(-1.0) / h.d)
        + std::lgamma(prior_shape) - prior_shape * std::log(h.c);
    const double log_ml = 0.5 * (h.K - static_cast<double>(post.n)) * kLog2Pi
        - 0.5 * post.log_det_lambda + std::lgamma(post.shape) - post.shape * std::log(post.rate)
        - log_prior_norm;
    return -log_ml;
}

PolyRegExact polyreg_exact_eval(const PolyRegressionModel& model, const DataView& data) {
    const std::size_t n = data.size();
    if (n == 0) throw DomainError("empty_data", "exact evaluation of an empty sample");
    const PolyRegPosterior post = polyreg_conjugate(model, data);
    const double alpha = post.shape;
    const double gamma = post.rate;
    const double mean_log_s = digamma(alpha) - std::log(gamma);
    const double mean_s = alpha / gamma;
    const double var_log_s = trigamma(alpha);

    PolyRegExact out;
    out.mean_loglik.resize(static_cast<Eigen::Index>(n));
    out.var_loglik.resize(static_cast<Eigen::Index>(n));

    Eigen::VectorXd f;
    double t_acc = 0.0, vbar = 0.0, mean_ll_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto obs = data.row(i);
        model.basis(obs[0], f);
        const double m = obs[1] - post.mu.dot(f);
        const double v = post.quad_inv(f);
        const PredictiveMoments pm = predictive_moments(post, f);
        t_acc += student_t_logpdf(obs[1], pm.loc, pm.scale2, pm.nu);

        const double mean_i = 0.5 * mean_log_s - 0.5 * kLog2Pi - 0.5 * (v + mean_s * m * m);
        // law of total variance over (a | s) then s
        const double var_i = 0.5 * v * v + v * m * m * mean_s
            + 0.25 * var_log_s + 0.25 * m * m * m * m * (alpha / (gamma * gamma))
            - 0.5 * m * m / gamma;
        out.mean_loglik[static_cast<Eigen::Index>(i)] = mean_i;
        out.var_loglik[static_cast<Eigen::Index>(i)] = var_i;
        mean_ll_sum += mean_i;
        vbar += var_i;
    }
    const double nn = static_cast<double>(n);
    out.t_n = -t_acc / nn;
    out.w_n = out.t_n + vbar / nn;
    out.c_n = polyreg_exact_loo(model, data);

    // deviance criterion at the flat-coordinate posterior mean (mu, E[log s])
    Eigen::VectorXd theta_bar(model.dim());
    theta_bar.head(model.hyper().K) = post.mu;
    theta_bar[model.hyper().K] = mean_log_s;
    double plug = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        plug += model.log_density(data.row(i), {theta_bar.data(), static_cast<std::size_t>(theta_bar.size())});
    }
    out.dic = 2.0 * (-mean_ll_sum / nn) - (-plug / nn);
    return out;
}

double polyreg_exact_loo(const PolyRegressionModel& model, const DataView& data) {
    const std::size_t n = data.size();
    if (n < 2) throw DomainError("too_few_observations", "leave-one-out needs n >= 2", {{"n", n}});
    const PolyRegHyper& h = model.hyper();
    const RegressionStats full = collect_stats(data, h.K);
    Eigen::VectorXd f;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto obs = data.row(i);
        model.basis(obs[0], f);
        RegressionStats rest = full;
        rest.gram -= f * f.transpose();
        rest.xty -= obs[1] * f;
        rest.yty -= obs[1] * obs[1];
        rest.n -= 1;
        const PolyRegPosterior post = posterior_from_stats(h, rest, 1.0);
        const PredictiveMoments pm = predictive_moments(post, f);
        acc += student_t_logpdf(obs[1], pm.loc, pm.scale2, pm.nu);
    }
    return -acc / static_cast<double>(n);
}

double polyreg_exact_holdout(const PolyRegressionModel& model, const DataView& train,
                             const DataView& held_out) {
    if (held_out.size() == 0) throw DomainError("empty_data", "hold-out split is empty");
    const PolyRegPosterior post = polyreg_conjugate(model, train);
    double acc = 0.0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
        acc += polyreg_predictive_logpdf(model, post, held_out.row(i));
    }
    return -acc / static_cast<double>(held_out.size());
}

double polyreg_tempered_mean_total_loss(const PolyRegressionModel& model, const DataView& data,
                                        double beta) {
    const PolyRegPosterior post = polyreg_conjugate(model, data, beta);
    const double mean_log_s = digamma(post.shape) - std::log(post.rate);
    const double mean_s = post.shape / post.rate;
    Eigen::VectorXd f;
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto obs = data.row(i);
        model.basis(obs[0], f);
        const double m = obs[1] - post.mu.dot(f);
        const double v = post.quad_inv(f);
        acc += -(0.5 * mean_log_s - 0.5 * kLog2Pi - 0.5 * (v + mean_s * m * m));
    }
    return acc;
}

PolyRegMle polyreg_mle(const DataView& data, int K) {
    const std::size_t n = data.size();
    if (n <= static_cast<std::size_t>(K)) {
        throw DomainError("too_few_observations", "maximum likelihood needs n > K",
                          {{"n", n}, {"K", K}});
    }
    const RegressionStats st = collect_stats(data, K);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(st.gram);
    const Eigen::VectorXd a = ldlt.solve(st.xty);
    double rss = 0.0;
    Eigen::VectorXd f(K);
    for (std::size_t i = 0; i < n; ++i) {
        const auto obs = data.row(i);
        f[0] = 1.0;
        for (int k = 1; k < K; ++k) f[k] = f[k - 1] * obs[0];
        const double r = obs[1] - a.dot(f);
        rss += r * r;
    }
    if (!(rss > 0.0)) {
        throw DomainError("degenerate_mle", "residual sum of squares vanished; precision unbounded",
                          {{"n", n}});
    }
    const double s_hat = static_cast<double>(n) / rss;
    PolyRegMle out;
    out.theta.resize(K + 1);
    out.theta.head(K) = a;
    out.theta[K] = std::log(s_hat);
    out.loss = 0.5 * kLog2Pi - 0.5 * std::log(s_hat) + 0.5;
    return out;
}

PolyRegTruth::PolyRegTruth(Eigen::VectorXd a0, double s0) : a0_(std::move(a0)), s0_(s0) {
    if (a0_.size() == 0) throw ConfigError("bad_hyper", "regression truth needs coefficients");
    if (!(s0 > 0.0)) throw ConfigError("bad_hyper", "regression truth needs s0 > 0", {{"s0", s0}});
}

double PolyRegTruth::regression_mean(double x) const { return poly_eval(a0_, x); }

Dataset PolyRegTruth::sample(std::size_t n, Rng& rng) const {
    RowMatrix m(static_cast<Eigen::Index>(n), 2);
    const double sd = 1.0 / std::sqrt(s0_);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        m(static_cast<Eigen::Index>(i), 0) = x;
        m(static_cast<Eigen::Index>(i), 1) = poly_eval(a0_, x) + sd * rng.normal();
    }
    return Dataset({2}, std::move(m));
}

double PolyRegTruth::log_density(std::span<const double> obs) const {
    const double r = obs[1] - poly_eval(a0_, obs[0]);
    return 0.5 * std::log(s0_) - 0.5 * kLog2Pi - 0.5 * s0_ * r * r;
}

double PolyRegTruth::entropy() const {
    return 0.5 * (kLog2Pi + 1.0 - std::log(s0_));
}

std::optional<Eigen::VectorXd> PolyRegTruth::realizing_params(const ModelSpec& model) const {
    const auto* pr = dynamic_cast<const PolyRegressionModel*>(&model);
    if (pr == nullptr || pr->hyper().K < a0_.size()) return std::nullopt;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(pr->dim());
    theta.head(a0_.size()) = a0_;
    theta[pr->hyper().K] = std::log(s0_);
    return theta;
}

void PolyRegTruth::resample_response(std::span<const double> obs, std::span<double> out, Rng& rng) const {
    out[0] = obs[0];
    out[1] = poly_eval(a0_, obs[0]) + rng.normal() / std::sqrt(s0_);
}

double polyreg_gen_loss(const PolyRegressionModel& model, const PolyRegPosterior& post,
                        const PolyRegTruth& truth, std::size_t x_draws, Rng& rng) {
    if (x_draws == 0) throw ConfigError("bad_config", "generalization loss needs x draws");
    static const GaussHermite rule = gauss_hermite(40);
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::acos(-1.0));
    const double sd_y = std::sqrt(2.0 / truth.s0());
    Eigen::VectorXd f;
    double acc = 0.0;
    for (std::size_t j = 0; j < x_draws; ++j) {
        const double x = rng.normal();
        model.basis(x, f);
        const PredictiveMoments pm = predictive_moments(post, f);
        const double mean_y = truth.regression_mean(x);
        double inner = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double y = mean_y + sd_y * rule.nodes[k];
            inner += rule.weights[k] * student_t_logpdf(y, pm.loc, pm.scale2, pm.nu);
        }
        acc += inner * inv_sqrt_pi;
    }
    return -acc / static_cast<double>(x_draws);
}

}  // namespace bayeseval
