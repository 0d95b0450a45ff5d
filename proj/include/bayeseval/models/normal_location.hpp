#pragma once

#include "bayeseval/model.hpp"

namespace bayeseval {

// Gaussian observations with known precision tau and unknown location:
// x ~ N(theta, 1/tau), theta ~ N(m0, v0).  Fully conjugate; every criterion
// has a closed form, so this is the regular-model oracle.
class NormalLocationModel final : public ModelSpec {
public:
    NormalLocationModel(double tau, double m0, double v0);

    std::string name() const override { return "normal_location"; }
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

    double tau() const { return tau_; }

    // ---- closed forms ----

    struct Posterior {
        double mean, var;
    };
    // tempered posterior: precision 1/v0 + beta*n*tau
    Posterior posterior(const DataView& data, double beta = 1.0) const;

    double log_marginal(const DataView& data) const;
    double free_energy(const DataView& data) const { return -log_marginal(data); }

    // log posterior-predictive density of a scalar y given `data`
    double predictive_logpdf(const DataView& data, double y) const;

    struct Exact {
        double t_n, w_n, c_n, dic;
    };
    Exact exact_eval(const DataView& data) const;

    double exact_loo(const DataView& data) const;
    double exact_holdout(const DataView& train, const DataView& held_out) const;

    // E over the tempered posterior of n L_n (oracle for the tempered runs)
    double tempered_mean_total_loss(const DataView& data, double beta) const;

    // exact generalization loss against a Gaussian truth N(mean, var)
    double exact_gen_loss(const DataView& data, double truth_mean, double truth_var) const;

private:
    double tau_;
    double m0_;
    double v0_;
};

class NormalTruth final : public TruthOracle {
public:
    NormalTruth(double mean, double var);

    std::string name() const override { return "normal"; }
    Dataset sample(std::size_t n, Rng& rng) const override;
    double log_density(std::span<const double> obs) const override;
    double entropy() const override;
    std::optional<Eigen::VectorXd> realizing_params(const ModelSpec& model) const override;

    double mean() const { return mean_; }
    double var() const { return var_; }

private:
    double mean_;
    double var_;
};

}  // namespace bayeseval
