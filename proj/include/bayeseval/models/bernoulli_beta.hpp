#pragma once

#include <Eigen/Dense>

#include "bayeseval/model.hpp"

namespace bayeseval {

// Bernoulli likelihood with a Beta(alpha, beta0) prior on the success
// probability.  The flat parameter is the log-odds eta = logit(p); the prior
// density includes the Jacobian p(1-p).  Everything about this model has a
// closed form, which makes it the main exactness oracle for the samplers and
// criteria.
class BernoulliBetaModel final : public ModelSpec {
public:
    BernoulliBetaModel(double alpha, double beta0);

    std::string name() const override { return "bernoulli_beta"; }
    int dim() const override { return 1; }
    std::vector<int> obs_shape() const override { return {1}; }

    double log_density(std::span<const double> obs, std::span<const double> theta) const override;
    double log_prior(std::span<const double> theta) const override;
    bool proper_prior() const override { return true; }
    void sample_prior(std::span<double> theta, Rng& rng) const override;

    bool has_gradients() const override { return true; }
    void grad_log_density(std::span<const double> obs, std::span<const double> theta,
                          std::span<double> grad) const override;
    void grad_log_prior(std::span<const double> theta, std::span<double> grad) const override;

    double alpha() const { return alpha_; }
    double beta0() const { return beta0_; }

    // ---- closed forms ----

    struct Posterior {
        double a, b;  // Beta(a, b)
        double mean() const { return a / (a + b); }
        double variance() const { return a * b / ((a + b) * (a + b) * (a + b + 1.0)); }
    };
    Posterior posterior(const DataView& data) const;

    // log of the ordered-sample marginal likelihood; the free energy is its
    // negation
    double log_marginal(const DataView& data) const;
    double free_energy(const DataView& data) const { return -log_marginal(data); }

    // posterior predictive probability of observing 1
    double predictive_one(const DataView& data) const;

    // exact leave-one-out loss -(1/n) sum_i log p(X_i | data without i)
    double exact_loo(const DataView& data) const;

    // Dense midpoint-grid quadrature over p for posterior functionals at
    // inverse temperature `beta`.  Serves as the Monte-Carlo-free oracle.
    struct Quadrature {
        double t_n;                     // predictive training loss
        double w_n;                     // t_n + mean functional variance
        double c_n;                     // importance-sampling leave-one-out
        double dic;                     // 2 E[L_n] - L_n(posterior mean of eta)
        double mean_theta;              // posterior mean of eta = logit(p)
        double mean_p;                  // posterior mean of p
        double var_p;                   // posterior variance of p
        double mean_total_loss;         // E[n L_n]
        Eigen::VectorXd mean_loglik;    // per-datum posterior means
        Eigen::VectorXd var_loglik;     // per-datum posterior variances
    };
    Quadrature quadrature(const DataView& data, double beta = 1.0, int grid = 100000) const;

private:
    double alpha_;
    double beta0_;
    double log_norm_;  // log B(alpha, beta0)
};

class BernoulliTruth final : public TruthOracle {
public:
    explicit BernoulliTruth(double p);

    std::string name() const override { return "bernoulli"; }
    Dataset sample(std::size_t n, Rng& rng) const override;
    double log_density(std::span<const double> obs) const override;
    double entropy() const override;
    std::optional<Eigen::VectorXd> realizing_params(const ModelSpec& model) const override;

private:
    double p_;
};

}  // namespace bayeseval
