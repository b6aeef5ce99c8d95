#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spgnm/mdp.hpp"

namespace spgnm {

/// dV(start)/dtheta(s, a) for a softmax policy.
struct GradientTable {
    Table partials;

    friend bool operator==(const GradientTable&, const GradientTable&) = default;
};

struct Step {
    std::size_t state;
    std::size_t action;
    double reward;
};

using Trajectory = std::vector<Step>;

struct SampleBatch {
    std::vector<Trajectory> trajectories;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
};

struct SamplingOptions {
    std::size_t batch = 1;
    std::size_t horizon = 1;
    std::uint64_t seed = 0;
    /// Subtract the exact V(s_t) from each return-to-go.
    bool baseline = false;
};

/// Monte Carlo estimate plus the per-coordinate standard error of the mean.
struct SampledGradient {
    Table mean;
    Table std_error;
};

/**
Exact softmax policy gradient

    dV(start)/dtheta(s,a) = d(s) pi(a|s) A(s,a) / (1 - gamma)

where d is the normalised discounted visitation from `start`. Each state's
row sums to zero since the advantages are centred under pi.
*/
GradientTable exact_gradient(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start);

/// Same formula from an already computed evaluation of softmax(params).
GradientTable exact_gradient(const TabularMdp& mdp, const PolicyDistribution& policy,
                             const EvaluationBundle& eval);

/// Central differences of objective(softmax(theta)); every probe re-solves
/// the Bellman system. Probes run in parallel (OpenMP); entries are
/// independent so the result does not depend on the thread count.
GradientTable finite_difference_gradient(const TabularMdp& mdp, const PolicyParams& params,
                                         std::span<const double> start, double h);

/// One rollout of `horizon` steps for trajectory number `index` of the stream
/// keyed by `seed`.
Trajectory rollout(const TabularMdp& mdp, const PolicyDistribution& policy, std::span<const double> start,
                   std::size_t horizon, std::uint64_t seed, std::uint64_t index);

SampleBatch sample_batch(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start,
                         std::size_t batch, std::size_t horizon, std::uint64_t seed);

/**
REINFORCE estimator averaging sum_t gamma^t G_t grad log pi(a_t|s_t) over
`batch` rollouts, with G_t the return-to-go truncated at the horizon.

Trajectories are processed in fixed-size chunks across OpenMP threads and the
chunk sums are combined in chunk order, so the output is bit-identical for a
given seed whatever the thread count.
*/
SampledGradient sampled_gradient_stats(const TabularMdp& mdp, const PolicyParams& params,
                                       std::span<const double> start, const SamplingOptions& opts);

GradientTable sampled_gradient(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start,
                               std::size_t batch, std::size_t horizon, std::uint64_t seed, bool baseline = false);

/// Single-threaded reference versions of the parallel kernels.
namespace reference {

GradientTable finite_difference_gradient(const TabularMdp& mdp, const PolicyParams& params,
                                         std::span<const double> start, double h);

SampledGradient sampled_gradient_stats(const TabularMdp& mdp, const PolicyParams& params,
                                       std::span<const double> start, const SamplingOptions& opts);

}  // namespace reference

}  // namespace spgnm
