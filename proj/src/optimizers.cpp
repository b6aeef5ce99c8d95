#include "spgnm/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "spgnm/error.hpp"

namespace spgnm {

namespace {

GradientTable checked_gradient(const StepContext& ctx, const PolicyParams& at) {
    GradientTable g = ctx.gradient_at(at);
    if (!g.partials.same_shape(at.logits))
        throw InvalidInput(fmt::format("gradient shape {}x{} does not match logits {}x{}", g.partials.rows(),
                                       g.partials.cols(), at.logits.rows(), at.logits.cols()));
    if (!g.partials.all_finite())
        throw NumericalFailure(fmt::format("non-finite gradient at iteration {}", ctx.iteration), ctx.iteration);
    return g;
}

void check_iterate(const PolicyParams& p, const StepContext& ctx, std::string_view what) {
    if (!p.logits.all_finite())
        throw NumericalFailure(fmt::format("non-finite {} at iteration {}", what, ctx.iteration), ctx.iteration);
}

void check_iteration(const StepContext& ctx) {
    if (ctx.iteration < 1) throw InvalidInput(fmt::format("iteration must start at 1, got {}", ctx.iteration));
}

}  // namespace

PgState pg_step(const PgState& state, const StepContext& ctx) {
    check_iteration(ctx);
    const GradientTable g = checked_gradient(ctx, state.theta);
    PgState next = state;
    auto th = next.theta.logits.flat();
    const auto gf = g.partials.flat();
    for (std::size_t i = 0; i < th.size(); ++i) th[i] += state.eta * gf[i];
    check_iterate(next.theta, ctx, "theta");
    return next;
}

HeavyBallState heavy_ball_step(const HeavyBallState& state, const StepContext& ctx) {
    check_iteration(ctx);
    const GradientTable g = checked_gradient(ctx, state.theta);
    HeavyBallState next = state;
    const auto th = state.theta.logits.flat();
    const auto prev = state.theta_prev.logits.flat();
    const auto gf = g.partials.flat();
    auto out = next.theta.logits.flat();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = th[i] + state.eta * gf[i] + state.beta * (th[i] - prev[i]);
    next.theta_prev = state.theta;
    check_iterate(next.theta, ctx, "theta");
    return next;
}

double nag_momentum(long t) { return static_cast<double>(t - 1) / static_cast<double>(t + 2); }

NagState nag_step(const NagState& state, const StepContext& ctx) {
    check_iteration(ctx);
    const GradientTable g = checked_gradient(ctx, state.lookahead);
    const double mu = nag_momentum(ctx.iteration);
    NagState next = state;
    const auto x = state.theta.logits.flat();
    const auto y = state.lookahead.logits.flat();
    const auto gf = g.partials.flat();
    auto nx = next.theta.logits.flat();
    auto ny = next.lookahead.logits.flat();
    for (std::size_t i = 0; i < nx.size(); ++i) {
        nx[i] = y[i] + state.eta * gf[i];
        ny[i] = nx[i] + mu * (nx[i] - x[i]);
    }
    check_iterate(next.theta, ctx, "theta");
    check_iterate(next.lookahead, ctx, "lookahead");
    return next;
}

AdamState adam_step(const AdamState& state, const StepContext& ctx) {
    check_iteration(ctx);
    const GradientTable g = checked_gradient(ctx, state.theta);
    AdamState next = state;
    const double t = static_cast<double>(ctx.iteration);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto th = next.theta.logits.flat();
    auto m = next.first_moment.flat();
    auto v = next.second_moment.flat();
    const auto gf = g.partials.flat();
    for (std::size_t i = 0; i < th.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gf[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gf[i] * gf[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        th[i] += state.eta * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    check_iterate(next.theta, ctx, "theta");
    return next;
}

SpgNmState spg_nm_step(const SpgNmState& state, const StepContext& ctx) {
    check_iteration(ctx);
    const GradientTable g = checked_gradient(ctx, state.omega);

    PolicyParams theta_new = state.omega;
    {
        auto th = theta_new.logits.flat();
        const auto gf = g.partials.flat();
        for (std::size_t i = 0; i < th.size(); ++i) th[i] += state.eta * gf[i];
    }
    check_iterate(theta_new, ctx, "theta");

    PolicyParams phi = theta_new;
    {
        const double lam = state.lambda;
        auto out = phi.logits.flat();
        const auto cur = theta_new.logits.flat();
        const auto old = state.theta.logits.flat();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = lam * cur[i] + (1.0 - lam) * (cur[i] - old[i]);
    }

    SpgNmState next = state;
    const double theta_value = ctx.objective_at(theta_new);
    next.theta_objective = theta_value;

    if (!phi.logits.all_finite()) {
        if (state.overflow == OverflowPolicy::fail)
            throw NumericalFailure(
                fmt::format("non-finite negative-momentum candidate at iteration {} (lambda = {})", ctx.iteration,
                            state.lambda),
                ctx.iteration);
        next.omega = theta_new;
        next.omega_objective = theta_value;
        ++next.overflow_rejections;
    } else {
        const double phi_value = ctx.objective_at(phi);
        if (phi_value >= theta_value) {
            next.omega = std::move(phi);
            next.omega_objective = phi_value;
            ++next.accepted;
        } else {
            next.omega = theta_new;
            next.omega_objective = theta_value;
        }
    }
    next.theta_prev = state.theta;
    next.theta = std::move(theta_new);
    return next;
}

const std::vector<std::string>& optimizer_names() {
    static const std::vector<std::string> names = {"pg", "pg-hb", "apg", "pg-adam", "spg-nm"};
    return names;
}

bool is_optimizer_name(std::string_view name) {
    const auto& names = optimizer_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string_view to_string(OverflowPolicy p) { return p == OverflowPolicy::reject ? "reject" : "fail"; }

OverflowPolicy overflow_policy_from_string(std::string_view s) {
    if (s == "reject") return OverflowPolicy::reject;
    if (s == "fail") return OverflowPolicy::fail;
    throw InvalidInput(fmt::format("unknown overflow policy '{}' (expected reject or fail)", s));
}

void Stepper::step(const GradientOracle& gradient_at, const ObjectiveOracle& objective_at) {
    const StepContext ctx{gradient_at, objective_at, iteration_ + 1};
    state_ = std::visit(
        [&](const auto& s) -> OptimizerState {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, PgState>) return pg_step(s, ctx);
            else if constexpr (std::is_same_v<S, HeavyBallState>) return heavy_ball_step(s, ctx);
            else if constexpr (std::is_same_v<S, NagState>) return nag_step(s, ctx);
            else if constexpr (std::is_same_v<S, AdamState>) return adam_step(s, ctx);
            else return spg_nm_step(s, ctx);
        },
        state_);
    ++iteration_;
}

const PolicyParams& Stepper::theta() const {
    return std::visit([](const auto& s) -> const PolicyParams& { return s.theta; }, state_);
}

const PolicyParams& Stepper::reported() const {
    if (const auto* s = spg_nm()) return s->omega;
    return theta();
}

namespace {

double positive(std::optional<double> v, double fallback, const char* name) {
    const double x = v.value_or(fallback);
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidInput(fmt::format("{} must be positive and finite, got {}", name, x));
    return x;
}

double unit_interval(std::optional<double> v, double fallback, const char* name) {
    const double x = v.value_or(fallback);
    if (!(x >= 0.0 && x < 1.0)) throw InvalidInput(fmt::format("{} must lie in [0, 1), got {}", name, x));
    return x;
}

}  // namespace

Stepper make_stepper(std::string_view name, const Hyper& hyper, const PolicyParams& initial) {
    if (!initial.logits.all_finite()) throw InvalidInput("initial logits must be finite");
    const double eta = positive(hyper.eta, defaults::eta, "eta");

    if (name == "pg") return Stepper("pg", PgState{initial, eta});
    if (name == "pg-hb")
        return Stepper("pg-hb", HeavyBallState{initial, initial, eta, unit_interval(hyper.beta, defaults::beta, "beta")});
    if (name == "apg") return Stepper("apg", NagState{initial, initial, eta});
    if (name == "pg-adam") {
        AdamState s{initial,
                    Table(initial.logits.rows(), initial.logits.cols()),
                    Table(initial.logits.rows(), initial.logits.cols()),
                    eta,
                    unit_interval(hyper.beta1, defaults::beta1, "beta1"),
                    unit_interval(hyper.beta2, defaults::beta2, "beta2"),
                    positive(hyper.epsilon, defaults::epsilon, "epsilon")};
        return Stepper("pg-adam", std::move(s));
    }
    if (name == "spg-nm") {
        SpgNmState s;
        s.theta = initial;
        s.theta_prev = initial;
        s.omega = initial;
        s.eta = eta;
        s.lambda = positive(hyper.lambda, defaults::lambda, "lambda");
        s.overflow = hyper.overflow.value_or(OverflowPolicy::reject);
        return Stepper("spg-nm", std::move(s));
    }
    std::string valid;
    for (const auto& n : optimizer_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InvalidInput(fmt::format("unknown optimizer '{}' (valid: {})", name, valid));
}

}  // namespace spgnm
