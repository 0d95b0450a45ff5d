#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "bayeseval/model.hpp"

namespace bayeseval {

// Polynomial regression of y on x with Gaussian noise of unknown precision s:
//   y | x, a, s ~ N(a^T f(x), 1/s),  f(x) = (1, x, ..., x^{K-1})
//   prior(a, s) ∝ s^{b-1} exp(-c s - (d s / 2) ||a||^2)
// Observations are rows (x, y).  Flat parameters are (a, log s).  The prior
// is proper iff b > K/2, c > 0, d > 0; the normalizer is included when
// proper so free energies are absolute.
struct PolyRegHyper {
    int K = 3;
    double b = 2.0;
    double c = 0.01;
    double d = 0.01;
};

class PolyRegressionModel final : public ModelSpec {
public:
    explicit PolyRegressionModel(PolyRegHyper hyper);

    std::string name() const override { return "poly_regression"; }
    int dim() const override { return hyper_.K + 1; }
    std::vector<int> obs_shape() const override { return {2}; }

    double log_density(std::span<const double> obs, std::span<const double> theta) const override;
    double log_prior(std::span<const double> theta) const override;
    bool proper_prior() const override { return proper_; }
    void sample_prior(std::span<double> theta, Rng& rng) const override;

    bool has_gradients() const override { return true; }
    void grad_log_density(std::span<const double> obs, std::span<const double> theta,
                          std::span<double> grad) const override;
    void grad_log_prior(std::span<const double> theta, std::span<double> grad) const override;

    std::unique_ptr<LikelihoodContext> make_context(const DataView& data) const override;

    const PolyRegHyper& hyper() const { return hyper_; }
    void basis(double x, Eigen::VectorXd& f) const;

private:
    PolyRegHyper hyper_;
    bool proper_;
    double log_prior_norm_;  // log Z of the proper prior, 0 otherwise
};

// Normal-gamma posterior at inverse temperature beta:
//   a | s ~ N(mu, (s Lambda)^{-1}),  s ~ Gamma(shape, rate)
// with Lambda = d I + beta Phi^T Phi.
struct PolyRegPosterior {
    Eigen::MatrixXd lambda;
    Eigen::LLT<Eigen::MatrixXd> lambda_llt;
    Eigen::VectorXd mu;
    double shape;
    double rate;
    double log_det_lambda;
    std::size_t n;
    double beta;

    // f^T Lambda^{-1} f
    double quad_inv(const Eigen::VectorXd& f) const;
};

PolyRegPosterior polyreg_conjugate(const PolyRegressionModel& model, const DataView& data,
                                   double beta = 1.0);

// log Student-t posterior predictive of obs = (x, y)
double polyreg_predictive_logpdf(const PolyRegressionModel& model, const PolyRegPosterior& post,
                                 std::span<const double> obs);

// exact -log marginal likelihood; requires a proper prior
double polyreg_free_energy(const PolyRegressionModel& model, const DataView& data);

struct PolyRegExact {
    double t_n, w_n, c_n, dic;
    Eigen::VectorXd mean_loglik, var_loglik;  // per-datum posterior moments
};
PolyRegExact polyreg_exact_eval(const PolyRegressionModel& model, const DataView& data);

double polyreg_exact_loo(const PolyRegressionModel& model, const DataView& data);
double polyreg_exact_holdout(const PolyRegressionModel& model, const DataView& train,
                             const DataView& held_out);

// E over the tempered posterior of n L_n (closed form; oracle for tempered runs)
double polyreg_tempered_mean_total_loss(const PolyRegressionModel& model, const DataView& data,
                                        double beta);

struct PolyRegMle {
    Eigen::VectorXd theta;  // (a, log s)
    double loss;            // L_n at the maximum-likelihood parameter
};
PolyRegMle polyreg_mle(const DataView& data, int K);

class PolyRegTruth final : public ConditionalTruth {
public:
    PolyRegTruth(Eigen::VectorXd a0, double s0);

    std::string name() const override { return "poly_regression"; }
    Dataset sample(std::size_t n, Rng& rng) const override;
    // conditional density of y given x; the standard-normal x marginal is
    // shared by model and truth and cancels from every comparison
    double log_density(std::span<const double> obs) const override;
    double entropy() const override;
    std::optional<Eigen::VectorXd> realizing_params(const ModelSpec& model) const override;
    void resample_response(std::span<const double> obs, std::span<double> out, Rng& rng) const override;

    double regression_mean(double x) const;
    double s0() const { return s0_; }
    const Eigen::VectorXd& a0() const { return a0_; }

private:
    Eigen::VectorXd a0_;
    double s0_;
};

// Generalization loss of the conjugate predictive against the truth:
// Monte Carlo over x ~ N(0,1), exact Gauss-Hermite integration over y | x.
double polyreg_gen_loss(const PolyRegressionModel& model, const PolyRegPosterior& post,
                        const PolyRegTruth& truth, std::size_t x_draws, Rng& rng);

}  // namespace bayeseval
