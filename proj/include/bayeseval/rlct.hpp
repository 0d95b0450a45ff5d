#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bayeseval/rng.hpp"

namespace bayeseval {

enum class RlctProvenance { Regular, ReducedRank, VolumeEstimate, User };

std::string to_string(RlctProvenance p);

// Learning coefficient lambda and pole multiplicity m.  lambda drives the
// lambda/n generalization rate and the lambda*log(n) free-energy term;
// multiplicity only enters at log log n order and is estimated nowhere, so
// it is flagged untrusted except for the regular rule.
struct RLCTSpec {
    double lambda = 0.0;
    int multiplicity = 1;
    RlctProvenance provenance = RlctProvenance::User;
    bool multiplicity_trusted = false;

    nlohmann::json to_json() const;
};

// regular case: lambda = d/2, m = 1
RLCTSpec rlct_regular(int d);

// Reduced-rank regression with truth rank r inside an MxN map through rank
// H.  Only the balanced branch is implemented; anything else is rejected
// rather than guessed.
RLCTSpec rlct_reduced_rank(int M, int N, int H, int r);

struct VolumeEstimate {
    RLCTSpec spec;
    std::vector<double> eps;
    std::vector<double> prob;
    std::vector<std::size_t> hits;
    std::size_t samples = 0;
};

// Volume-scaling estimate: Prob(eps) = Pr_prior[ excess_loss(theta) <= eps ]
// behaves like C * eps^lambda, so lambda is the least-squares slope of
// log Prob against log eps.  Sampling is split into 64 fixed batches with
// derived seeds so the result does not depend on the thread count.
VolumeEstimate rlct_volume_estimate(const std::function<double(std::span<const double>)>& excess_loss,
                                    int dim,
                                    const std::function<void(std::span<double>, Rng&)>& sample_prior,
                                    std::vector<double> eps_grid, std::size_t samples,
                                    std::uint64_t seed, int threads = 0);

}  // namespace bayeseval
