#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "bayeseval/dataset.hpp"
#include "bayeseval/rng.hpp"

namespace bayeseval {

class ModelSpec;

// Sum of pointwise log densities over one fixed data view, with an optional
// gradient.  Models that admit sufficient statistics bind them here once so
// the sampler's target evaluations stay O(1) in n.
class LikelihoodContext {
public:
    virtual ~LikelihoodContext() = default;
    virtual double sum_log_density(std::span<const double> theta) const = 0;
    virtual void grad_sum_log_density(std::span<const double> theta, std::span<double> grad) const = 0;
};

// A statistical model: pointwise log density, log prior, and (optionally)
// gradients, all over one flat real parameter vector.  Parameters for
// positive quantities live on log scale so the whole of R^d is valid.
class ModelSpec {
public:
    virtual ~ModelSpec() = default;

    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    virtual std::vector<int> obs_shape() const = 0;

    virtual double log_density(std::span<const double> obs, std::span<const double> theta) const = 0;
    virtual double log_prior(std::span<const double> theta) const = 0;
    virtual bool proper_prior() const = 0;

    // Draw from the prior; only valid when proper_prior() is true.
    virtual void sample_prior(std::span<double> theta, Rng& rng) const;

    virtual bool has_gradients() const { return false; }
    virtual void grad_log_density(std::span<const double> obs, std::span<const double> theta,
                                  std::span<double> grad) const;
    virtual void grad_log_prior(std::span<const double> theta, std::span<double> grad) const;

    // Default context walks the rows; models override with sufficient
    // statistics where available.
    virtual std::unique_ptr<LikelihoodContext> make_context(const DataView& data) const;

    // out(s, i) = log p(data_i | theta_s) for every row of `thetas` (one draw
    // per row, row-major so each draw is contiguous).  The default double
    // loop is fine for small observations; matrix models override it with a
    // matrix product.
    virtual void log_density_matrix(const DataView& data, const RowMatrix& thetas,
                                    Eigen::MatrixXd& out) const;
};

// Data-generating distribution, with its own entropy for error bookkeeping.
class TruthOracle {
public:
    virtual ~TruthOracle() = default;

    virtual std::string name() const = 0;
    virtual Dataset sample(std::size_t n, Rng& rng) const = 0;
    virtual double log_density(std::span<const double> obs) const = 0;
    virtual double entropy() const = 0;

    // Flat parameter of `model` that reproduces the truth exactly, when the
    // model realizes it.
    virtual std::optional<Eigen::VectorXd> realizing_params(const ModelSpec& model) const {
        (void)model;
        return std::nullopt;
    }
};

// Truths for response models of the form q(y | x): the observation carries
// the covariate, and fresh responses can be drawn at a fixed design point.
class ConditionalTruth : public TruthOracle {
public:
    // replace the response part of `obs` with a fresh draw at its covariate
    virtual void resample_response(std::span<const double> obs, std::span<double> out, Rng& rng) const = 0;
};

// -(1/n) sum_i log q(X_i): plug-in entropy of the sample under the truth.
double empirical_entropy(const TruthOracle& truth, const DataView& data);

// -(1/n) sum_i log p(X_i | theta)
double empirical_log_loss(const ModelSpec& model, const DataView& data, std::span<const double> theta);

}  // namespace bayeseval
