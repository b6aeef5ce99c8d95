#include "spgnm/gradient.hpp"

#include <algorithm>
#include <exception>

#include <omp.h>

#include "gradient_detail.hpp"

namespace spgnm {

namespace {

constexpr std::size_t kChunk = 512;

struct Moments {
    Table sum;
    Table sum_sq;
};

SampledGradient finish(const Moments& m, std::size_t n) {
    SampledGradient out{Table(m.sum.rows(), m.sum.cols()), Table(m.sum.rows(), m.sum.cols())};
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < m.sum.size(); ++i) {
        const double mean = m.sum.flat()[i] / dn;
        out.mean.flat()[i] = mean;
        if (n > 1) {
            const double var = std::max(0.0, (m.sum_sq.flat()[i] - dn * mean * mean) / (dn - 1.0));
            out.std_error.flat()[i] = std::sqrt(var / dn);
        }
    }
    return out;
}

}  // namespace

GradientTable exact_gradient(const TabularMdp& mdp, const PolicyDistribution& policy,
                             const EvaluationBundle& eval) {
    const double scale = 1.0 / (1.0 - mdp.discount());
    GradientTable g{Table(mdp.n_states(), mdp.n_actions())};
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a)
            g.partials(s, a) = scale * eval.visitation[s] * policy.probs(s, a) * eval.advantages(s, a);
    return g;
}

GradientTable exact_gradient(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start) {
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);
    const PolicyDistribution policy = softmax_policy(params);
    return exact_gradient(mdp, policy, evaluate(mdp, policy, start));
}

GradientTable finite_difference_gradient(const TabularMdp& mdp, const PolicyParams& params,
                                         std::span<const double> start, double h) {
    if (!(h > 0.0)) throw InvalidInput(fmt::format("finite_difference_gradient: h must be positive, got {}", h));
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);

    GradientTable g{Table(mdp.n_states(), mdp.n_actions())};
    auto out = g.partials.flat();
    const auto n = static_cast<long>(out.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long k = 0; k < n; ++k) {
        try {
            out[static_cast<std::size_t>(k)] =
                detail::central_difference(mdp, params, start, h, static_cast<std::size_t>(k));
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return g;
}

Trajectory rollout(const TabularMdp& mdp, const PolicyDistribution& policy, std::span<const double> start,
                   std::size_t horizon, std::uint64_t seed, std::uint64_t index) {
    const Philox4x32 rng(seed);
    const auto lo = static_cast<std::uint32_t>(index);
    const auto hi = static_cast<std::uint32_t>(index >> 32);

    Trajectory traj;
    traj.reserve(horizon);
    std::size_t s = detail::draw(start, rng.uniforms({0, lo, hi, 1})[0]);
    for (std::size_t t = 0; t < horizon; ++t) {
        const auto u = rng.uniforms({static_cast<std::uint32_t>(t), lo, hi, 0});
        const std::size_t a = detail::draw(policy.probs.row(s), u[0]);
        traj.push_back({s, a, mdp.reward(s, a)});
        s = detail::draw(mdp.transition(s, a), u[1]);
    }
    return traj;
}

SampleBatch sample_batch(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start,
                         std::size_t batch, std::size_t horizon, std::uint64_t seed) {
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);
    detail::check_sampling({batch, horizon, seed, false});
    const PolicyDistribution policy = softmax_policy(params);
    SampleBatch out{std::vector<Trajectory>(batch), horizon, seed};
    const auto n = static_cast<long>(batch);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
        out.trajectories[static_cast<std::size_t>(i)] =
            rollout(mdp, policy, start, horizon, seed, static_cast<std::uint64_t>(i));
    return out;
}

SampledGradient sampled_gradient_stats(const TabularMdp& mdp, const PolicyParams& params,
                                       std::span<const double> start, const SamplingOptions& opts) {
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);
    detail::check_sampling(opts);

    const PolicyDistribution policy = softmax_policy(params);
    numvec values;
    if (opts.baseline) values = policy_evaluation(mdp, policy);
    const numvec* baseline = opts.baseline ? &values : nullptr;

    const std::size_t rows = mdp.n_states();
    const std::size_t cols = mdp.n_actions();
    const std::size_t n_chunks = (opts.batch + kChunk - 1) / kChunk;
    std::vector<Moments> partial(n_chunks, Moments{Table(rows, cols), Table(rows, cols)});

#pragma omp parallel
    {
        Table contrib(rows, cols);
#pragma omp for schedule(dynamic, 1)
        for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
            auto& m = partial[static_cast<std::size_t>(c)];
            const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
            const std::size_t end = std::min(opts.batch, begin + kChunk);
            for (std::size_t i = begin; i < end; ++i) {
                std::fill(contrib.flat().begin(), contrib.flat().end(), 0.0);
                const Trajectory traj = rollout(mdp, policy, start, opts.horizon, opts.seed, i);
                detail::accumulate_trajectory(mdp, policy, traj, baseline, contrib);
                for (std::size_t k = 0; k < contrib.size(); ++k) {
                    const double x = contrib.flat()[k];
                    m.sum.flat()[k] += x;
                    m.sum_sq.flat()[k] += x * x;
                }
            }
        }
    }

    Moments total{Table(rows, cols), Table(rows, cols)};
    for (const auto& m : partial) {
        for (std::size_t k = 0; k < total.sum.size(); ++k) {
            total.sum.flat()[k] += m.sum.flat()[k];
            total.sum_sq.flat()[k] += m.sum_sq.flat()[k];
        }
    }
    return finish(total, opts.batch);
}

GradientTable sampled_gradient(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start,
                               std::size_t batch, std::size_t horizon, std::uint64_t seed, bool baseline) {
    return {sampled_gradient_stats(mdp, params, start, {batch, horizon, seed, baseline}).mean};
}

namespace reference {

GradientTable finite_difference_gradient(const TabularMdp& mdp, const PolicyParams& params,
                                         std::span<const double> start, double h) {
    if (!(h > 0.0)) throw InvalidInput(fmt::format("finite_difference_gradient: h must be positive, got {}", h));
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);
    GradientTable g{Table(mdp.n_states(), mdp.n_actions())};
    for (std::size_t k = 0; k < g.partials.size(); ++k)
        g.partials.flat()[k] = detail::central_difference(mdp, params, start, h, k);
    return g;
}

SampledGradient sampled_gradient_stats(const TabularMdp& mdp, const PolicyParams& params,
                                       std::span<const double> start, const SamplingOptions& opts) {
    detail::check_params(mdp, params);
    detail::check_start(mdp, start);
    detail::check_sampling(opts);

    const PolicyDistribution policy = softmax_policy(params);
    numvec values;
    if (opts.baseline) values = policy_evaluation(mdp, policy);

    Moments m{Table(mdp.n_states(), mdp.n_actions()), Table(mdp.n_states(), mdp.n_actions())};
    Table contrib(mdp.n_states(), mdp.n_actions());
    for (std::size_t i = 0; i < opts.batch; ++i) {
        std::fill(contrib.flat().begin(), contrib.flat().end(), 0.0);
        const Trajectory traj = rollout(mdp, policy, start, opts.horizon, opts.seed, i);
        detail::accumulate_trajectory(mdp, policy, traj, opts.baseline ? &values : nullptr, contrib);
        for (std::size_t k = 0; k < contrib.size(); ++k) {
            m.sum.flat()[k] += contrib.flat()[k];
            m.sum_sq.flat()[k] += contrib.flat()[k] * contrib.flat()[k];
        }
    }
    return finish(m, opts.batch);
}

}  // namespace reference

}  // namespace spgnm
