#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bayeseval/dataset.hpp"
#include "bayeseval/model.hpp"

namespace bayeseval {

enum class Proposal { RandomWalk, GradientAssisted };

struct SamplerConfig {
    int chains = 4;
    int burn_in = 5000;
    int draws_per_chain = 2000;
    int thinning = 1;
    double beta = 1.0;
    Proposal proposal = Proposal::RandomWalk;
    // 0 means "kernel default": 0.234 for the random walk, 0.574 with
    // gradients.
    double target_acceptance = 0.0;
    std::uint64_t seed = 0;
    int threads = 0;

    void validate() const;
    double resolved_target() const;
};

struct Diagnostics {
    Eigen::VectorXd rhat;             // split-Rhat per coordinate
    Eigen::VectorXd ess;              // batch-means ESS per coordinate, summed over chains
    std::vector<double> acceptance;   // post-burn-in rate per chain
    std::vector<std::string> warnings;
};

// Draws from p(theta)^1 * prod_i p(X_i | theta)^beta, flattened across
// chains: row c * draws_per_chain + t is draw t of chain c.
struct PosteriorDraws {
    RowMatrix theta;          // S x d
    Eigen::MatrixXd loglik;   // S x n, col-major so per-datum columns are contiguous
    double beta = 1.0;
    int chains = 1;
    int draws_per_chain = 0;
    Diagnostics diagnostics;

    Eigen::Index size() const { return theta.rows(); }
};

struct ChainResult {
    RowMatrix theta;     // draws_per_chain x d
    double acceptance;   // post-burn-in
};

// One adaptive Metropolis chain; exposed so tests can check that chains are
// exchangeable under seed permutation.
ChainResult run_chain(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg,
                      std::uint64_t chain_seed);

PosteriorDraws sample_tempered(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg);

}  // namespace bayeseval
