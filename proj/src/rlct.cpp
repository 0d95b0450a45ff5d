#include "bayeseval/rlct.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bayeseval/errors.hpp"
#include "bayeseval/parallel.hpp"

namespace bayeseval {

std::string to_string(RlctProvenance p) {
    switch (p) {
        case RlctProvenance::Regular: return "regular";
        case RlctProvenance::ReducedRank: return "reduced-rank";
        case RlctProvenance::VolumeEstimate: return "volume-estimate";
        case RlctProvenance::User: return "user";
    }
    return "user";
}

nlohmann::json RLCTSpec::to_json() const {
    return {{"lambda", lambda},
            {"multiplicity", multiplicity},
            {"provenance", to_string(provenance)},
            {"multiplicity_trusted", multiplicity_trusted}};
}

RLCTSpec rlct_regular(int d) {
    if (d < 1) throw ConfigError("bad_config", "dimension must be positive", {{"d", d}});
    return {0.5 * static_cast<double>(d), 1, RlctProvenance::Regular, true};
}

RLCTSpec rlct_reduced_rank(int M, int N, int H, int r) {
    if (M < 1 || N < 1 || H < 1)
        throw ConfigError("bad_config", "matrix dimensions must be positive", {{"M", M}, {"N", N}, {"H", H}});
    if (r < 0 || r > std::min({H, M, N}))
        throw ConfigError("bad_config", "truth rank must satisfy 0 <= r <= min(H, M, N)", {{"r", r}});
    const bool balanced = (M + r <= N + H) && (N + r <= M + H) && (H + r <= M + N);
    if (!balanced)
        throw DomainError("unsupported_regime", "unsupported regime; consult reference",
                          {{"M", M}, {"N", N}, {"H", H}, {"r", r}});
    const int s = H + r;
    double num = 2.0 * s * (M + N) - static_cast<double>(M - N) * (M - N) - static_cast<double>(s) * s;
    if ((M + N + H + r) % 2 != 0) num += 1.0;
    return {num / 8.0, 1, RlctProvenance::ReducedRank, false};
}

VolumeEstimate rlct_volume_estimate(const std::function<double(std::span<const double>)>& excess_loss,
                                    int dim,
                                    const std::function<void(std::span<double>, Rng&)>& sample_prior,
                                    std::vector<double> eps_grid, std::size_t samples,
                                    std::uint64_t seed, int threads) {
    if (dim < 1) throw ConfigError("bad_config", "dimension must be positive", {{"dim", dim}});
    if (eps_grid.size() < 4)
        throw ConfigError("bad_config", "need at least 4 epsilon levels", {{"levels", eps_grid.size()}});
    for (std::size_t k = 0; k + 1 < eps_grid.size(); ++k)
        if (!(eps_grid[k] > eps_grid[k + 1]))
            throw ConfigError("bad_config", "epsilon grid must be strictly decreasing",
                              {{"index", k}, {"value", eps_grid[k]}});
    if (!(eps_grid.back() > 0.0))
        throw ConfigError("bad_config", "epsilon levels must be positive", {{"smallest", eps_grid.back()}});
    if (samples < 64) throw ConfigError("bad_config", "need at least 64 prior samples", {{"samples", samples}});

    constexpr std::size_t kBatches = 64;
    const std::size_t levels = eps_grid.size();
    std::vector<std::vector<std::size_t>> batch_hits(kBatches, std::vector<std::size_t>(levels, 0));

    parallel_for(kBatches, resolve_threads(threads), [&](std::size_t b) {
        Rng rng(derive_seed(seed, {0xe5, b}));
        const std::size_t lo = b * samples / kBatches;
        const std::size_t hi = (b + 1) * samples / kBatches;
        std::vector<double> theta(static_cast<std::size_t>(dim));
        auto& hits = batch_hits[b];
        for (std::size_t s = lo; s < hi; ++s) {
            sample_prior(theta, rng);
            const double excess = excess_loss(theta);
            for (std::size_t k = 0; k < levels; ++k) {
                if (excess <= eps_grid[k]) ++hits[k];
                else break;  // grid is decreasing, so later levels are tighter
            }
        }
    });

    VolumeEstimate out;
    out.samples = samples;
    out.eps = std::move(eps_grid);
    out.hits.assign(levels, 0);
    for (const auto& h : batch_hits)
        for (std::size_t k = 0; k < levels; ++k) out.hits[k] += h[k];
    if (out.hits.back() < 30)
        throw DomainError("insufficient_resolution", "insufficient resolution",
                          {{"smallest_eps", out.eps.back()},
                           {"hits", out.hits.back()},
                           {"samples", samples}});

    out.prob.resize(levels);
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
        out.prob[k] = static_cast<double>(out.hits[k]) / static_cast<double>(samples);
        sx += std::log(out.eps[k]);
        sy += std::log(out.prob[k]);
    }
    const double mx = sx / static_cast<double>(levels);
    const double my = sy / static_cast<double>(levels);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
        const double dx = std::log(out.eps[k]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(out.prob[k]) - my);
    }
    out.spec = {sxy / sxx, 1, RlctProvenance::VolumeEstimate, false};
    return out;
}

}  // namespace bayeseval
