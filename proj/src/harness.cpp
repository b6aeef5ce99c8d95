#include "spgnm/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <exception>

#include <fmt/core.h>

#include "spgnm/environments.hpp"
#include "spgnm/error.hpp"
#include "spgnm/mdp_io.hpp"
#include "spgnm/philox.hpp"

namespace spgnm {

namespace {

PolicyParams explicit_init(const InitSpec& init, const TabularMdp& mdp) {
    if (!init.logits) throw InvalidInput("explicit init requires a logits table");
    if (init.logits->rows() != mdp.n_states() || init.logits->cols() != mdp.n_actions())
        throw InvalidInput(fmt::format("init logits are {}x{}, MDP is {}x{}", init.logits->rows(),
                                       init.logits->cols(), mdp.n_states(), mdp.n_actions()));
    if (!init.logits->all_finite()) throw InvalidInput("init logits must be finite");
    return PolicyParams(*init.logits);
}

Hyper filled_hyper(const ExperimentConfig& c) {
    Hyper h = c.hyper;
    h.eta = h.eta.value_or(defaults::eta);
    if (c.optimizer == "pg-hb") h.beta = h.beta.value_or(defaults::beta);
    if (c.optimizer == "pg-adam") {
        h.beta1 = h.beta1.value_or(defaults::beta1);
        h.beta2 = h.beta2.value_or(defaults::beta2);
        h.epsilon = h.epsilon.value_or(defaults::epsilon);
    }
    if (c.optimizer == "spg-nm") {
        h.lambda = h.lambda.value_or(defaults::lambda);
        h.overflow = h.overflow.value_or(OverflowPolicy::reject);
    }
    return h;
}

}  // namespace

ResolvedProblem resolve(const ExperimentConfig& config) {
    if (config.record_every < 1) throw InvalidInput("record_every must be >= 1");
    if (config.iterations && *config.iterations < 1) throw InvalidInput("iterations must be >= 1");
    if (config.gradient.sampled && (config.gradient.batch < 1 || config.gradient.horizon < 1))
        throw InvalidInput("sampled gradient needs batch >= 1 and horizon >= 1");

    ExperimentConfig resolved = config;
    std::optional<TabularMdp> mdp;
    PolicyParams initial;
    InitSpec init = config.init.value_or(InitSpec{});

    if (is_builtin(config.environment)) {
        auto env = builtin_environment(config.environment);
        mdp = env.mdp;
        if (!config.init) init.kind = config.environment.ends_with("-hard") ? InitKind::hard : InitKind::uniform;
        switch (init.kind) {
            case InitKind::uniform: initial = env.uniform_init; break;
            case InitKind::hard: initial = env.hard_init; break;
            case InitKind::explicit_logits: initial = explicit_init(init, env.mdp); break;
        }
    } else {
        if (!std::filesystem::exists(config.environment))
            throw InvalidInput(fmt::format("environment '{}' is neither a built-in nor an existing file",
                                           config.environment));
        mdp = load_mdp(config.environment);
        switch (init.kind) {
            case InitKind::uniform: initial = PolicyParams::zeros(mdp->n_states(), mdp->n_actions()); break;
            case InitKind::hard:
                throw InvalidInput("hard initialisation is only defined for built-in environments");
            case InitKind::explicit_logits: initial = explicit_init(init, *mdp); break;
        }
    }

    if (config.gamma) {
        *mdp = mdp->with_discount(*config.gamma);
        require_valid(*mdp);
    }

    resolved.init = init;
    resolved.gamma = mdp->discount();
    resolved.iterations =
        config.iterations.value_or(mdp->n_states() == 1 ? kDefaultBanditIterations : kDefaultMdpIterations);
    resolved.hyper = filled_hyper(config);
    // Validates the hyperparameters.
    make_stepper(resolved.optimizer, resolved.hyper, initial);
    return {std::move(*mdp), std::move(initial), std::move(resolved)};
}

RunTrace run(const ExperimentConfig& config) { return run(resolve(config)); }

RunTrace run(const ResolvedProblem& problem) {
    const TabularMdp& mdp = problem.mdp;
    const ExperimentConfig& cfg = problem.config;
    const auto rho = std::span<const double>(mdp.initial_dist());
    const long total = *cfg.iterations;

    RunTrace trace;
    trace.config = cfg;
    Stepper stepper = make_stepper(cfg.optimizer, cfg.hyper, problem.initial);

    std::uint64_t gradient_calls = 0;
    GradientOracle gradient_at = [&](const PolicyParams& p) {
        if (!cfg.gradient.sampled) return exact_gradient(mdp, p, rho);
        const std::uint64_t seed = splitmix64(cfg.seed + gradient_calls++);
        return sampled_gradient(mdp, p, rho, cfg.gradient.batch, cfg.gradient.horizon, seed,
                                cfg.gradient.baseline);
    };
    ObjectiveOracle objective_fn = [&](const PolicyParams& p) { return objective_at(mdp, p, rho); };

    const auto started = std::chrono::steady_clock::now();
    try {
        for (long t = 1; t <= total; ++t) {
            stepper.step(gradient_at, objective_fn);
            if (t % cfg.record_every != 0 && t != total) continue;

            TraceRecord rec;
            rec.t = t;
            rec.values = policy_evaluation(mdp, softmax_policy(stepper.theta()));
            if (const auto* spg = stepper.spg_nm()) {
                rec.objective = *spg->theta_objective;
                rec.omega_objective = spg->omega_objective;
            } else {
                rec.objective = objective(mdp, rec.values, rho);
            }
            if (cfg.record_wall_time)
                rec.wall_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            trace.records.push_back(std::move(rec));
        }
    } catch (const NumericalFailure& e) {
        trace.failed = true;
        trace.failure = e.what();
    }

    trace.final_params = stepper.reported();
    if (const auto* spg = stepper.spg_nm()) {
        trace.accepted = spg->accepted;
        trace.overflow_rejections = spg->overflow_rejections;
    }
    return trace;
}

GapSeries gap_series(const RunTrace& trace, const TabularMdp& mdp) {
    for (const auto& r : trace.records)
        if (r.values.size() != mdp.n_states())
            throw InvalidInput(fmt::format("trace records {} state values, MDP has {} states", r.values.size(),
                                           mdp.n_states()));
    const auto sol = optimal_values(mdp, kGapTolerance);
    GapSeries out;
    out.optimum = objective(mdp, sol.values, mdp.initial_dist());
    out.gaps.reserve(trace.records.size());
    for (const auto& r : trace.records) out.gaps.push_back(out.optimum - r.reported());
    return out;
}

void attach_gap(RunTrace& trace, const TabularMdp& mdp) {
    const GapSeries g = gap_series(trace, mdp);
    for (std::size_t i = 0; i < trace.records.size(); ++i) trace.records[i].gap = g.gaps[i];
}

std::optional<long> iterations_to_threshold(const RunTrace& trace, double target) {
    for (const auto& r : trace.records)
        if (r.reported() >= target) return r.t;
    return std::nullopt;
}

int workers_from_env() {
    const char* v = std::getenv("SPGNM_WORKERS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw InvalidInput(fmt::format("SPGNM_WORKERS must be a positive integer, got '{}'", v));
    return static_cast<int>(n);
}

std::vector<RunTrace> compare(const std::vector<ExperimentConfig>& configs, int workers) {
    if (configs.empty()) throw InvalidInput("compare: no configurations");
    if (workers < 1) throw InvalidInput("compare: workers must be >= 1");
    for (const auto& c : configs)
        if (c.environment != configs.front().environment || c.gamma != configs.front().gamma)
            throw InvalidInput(fmt::format("compare: mixed environments '{}' and '{}'", configs.front().environment,
                                           c.environment));

    // Resolve up front so configuration errors surface before any run starts.
    std::vector<ResolvedProblem> problems;
    problems.reserve(configs.size());
    for (const auto& c : configs) problems.push_back(resolve(c));

    std::vector<RunTrace> traces(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    const auto n = static_cast<long>(configs.size());
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            traces[k] = run(problems[k]);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return traces;
}

std::vector<RunTrace> lambda_sweep(const ExperimentConfig& base, const std::vector<double>& lambdas, int workers) {
    if (base.optimizer != "spg-nm")
        throw InvalidInput(fmt::format("lambda_sweep needs an spg-nm base config, got '{}'", base.optimizer));
    if (lambdas.empty()) throw InvalidInput("lambda_sweep: empty lambda list");
    std::vector<ExperimentConfig> configs;
    for (double lam : lambdas) {
        ExperimentConfig c = base;
        c.hyper.lambda = lam;
        configs.push_back(std::move(c));
    }
    return compare(configs, workers);
}

}  // namespace spgnm
