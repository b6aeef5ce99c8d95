#pragma once

// Pieces shared by the parallel kernels and their serial references.

#include <cmath>

#include <fmt/core.h>

#include "spgnm/error.hpp"
#include "spgnm/gradient.hpp"
#include "spgnm/philox.hpp"

namespace spgnm::detail {

inline void check_params(const TabularMdp& mdp, const PolicyParams& params) {
    if (params.logits.rows() != mdp.n_states() || params.logits.cols() != mdp.n_actions())
        throw InvalidInput(fmt::format("logits shape {}x{} does not match MDP {}x{}", params.logits.rows(),
                                       params.logits.cols(), mdp.n_states(), mdp.n_actions()));
    if (!params.logits.all_finite()) throw InvalidInput("non-finite logit");
}

inline void check_start(const TabularMdp& mdp, std::span<const double> start) {
    if (start.size() != mdp.n_states())
        throw InvalidInput(fmt::format("start distribution has {} entries, MDP has {} states", start.size(),
                                       mdp.n_states()));
}

inline void check_sampling(const SamplingOptions& opts) {
    if (opts.batch < 1) throw InvalidInput("sampled_gradient: batch must be >= 1");
    if (opts.horizon < 1) throw InvalidInput("sampled_gradient: horizon must be >= 1");
}

/// Coordinate k of the central difference.
inline double central_difference(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start,
                                  double h, std::size_t k) {
    PolicyParams probe = params;
    const double base = params.logits.flat()[k];
    probe.logits.flat()[k] = base + h;
    const double up = objective_at(mdp, probe, start);
    probe.logits.flat()[k] = base - h;
    const double down = objective_at(mdp, probe, start);
    return (up - down) / (2.0 * h);
}

/// Index drawn from `probs` with uniform u; falls back to the last positive entry.
inline std::size_t draw(std::span<const double> probs, double u) {
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        acc += probs[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

/// Adds one trajectory's score-function term into `out` (zeroed by the caller).
inline void accumulate_trajectory(const TabularMdp& mdp, const PolicyDistribution& policy,
                                  const Trajectory& traj, const numvec* baseline, Table& out) {
    const double gamma = mdp.discount();
    double to_go = 0.0;
    numvec returns(traj.size());
    for (std::size_t t = traj.size(); t-- > 0;) {
        to_go = traj[t].reward + gamma * to_go;
        returns[t] = to_go;
    }
    double weight = 1.0;
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const auto [s, a, r] = traj[t];
        double g = returns[t];
        if (baseline) g -= (*baseline)[s];
        const double scale = weight * g;
        if (scale != 0.0) {
            auto row = out.row(s);
            for (std::size_t b = 0; b < row.size(); ++b)
                row[b] += scale * ((b == a ? 1.0 : 0.0) - policy.probs(s, b));
        }
        weight *= gamma;
    }
}

}  // namespace spgnm::detail
