#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spgnm/gradient.hpp"
#include "spgnm/mdp.hpp"

namespace spgnm {

using GradientOracle = std::function<GradientTable(const PolicyParams&)>;
using ObjectiveOracle = std::function<double(const PolicyParams&)>;

/// What a stepper may ask of the problem at iteration t (t starts at 1).
struct StepContext {
    GradientOracle gradient_at;
    ObjectiveOracle objective_at;
    long iteration = 1;
};

// All steppers ascend the objective: gradient terms enter with a plus sign.

struct PgState {
    PolicyParams theta;
    double eta = 0.1;
};

struct HeavyBallState {
    PolicyParams theta;
    PolicyParams theta_prev;
    double eta = 0.1;
    double beta = 0.9;
};

/// x iterate in `theta`, lookahead y in `lookahead`.
struct NagState {
    PolicyParams theta;
    PolicyParams lookahead;
    double eta = 0.1;
};

struct AdamState {
    PolicyParams theta;
    Table first_moment;
    Table second_moment;
    double eta = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// What SPG-NM does with a candidate phi that is not finite.
enum class OverflowPolicy {
    reject,  ///< phi loses the acceptance test, omega = theta.
    fail,    ///< raise NumericalFailure.
};

/**
State of the negative-momentum method. Each step:

    theta'  = omega + eta * grad V(omega)
    phi     = lambda * theta' + (1 - lambda) * (theta' - theta)
    omega'  = phi if V(phi) >= V(theta') else theta'

and theta moves to theta_prev. Objectives of the last step are cached.
*/
struct SpgNmState {
    PolicyParams theta;
    PolicyParams theta_prev;
    PolicyParams omega;
    double eta = 0.1;
    double lambda = 1000.0;
    OverflowPolicy overflow = OverflowPolicy::reject;

    std::optional<double> theta_objective;
    std::optional<double> omega_objective;
    long accepted = 0;
    long overflow_rejections = 0;
};

PgState pg_step(const PgState& state, const StepContext& ctx);
HeavyBallState heavy_ball_step(const HeavyBallState& state, const StepContext& ctx);
NagState nag_step(const NagState& state, const StepContext& ctx);
AdamState adam_step(const AdamState& state, const StepContext& ctx);
SpgNmState spg_nm_step(const SpgNmState& state, const StepContext& ctx);

/// Nesterov momentum multiplier (t - 1) / (t + 2).
double nag_momentum(long t);

/// Optional hyperparameters; unset fields take the documented defaults.
struct Hyper {
    std::optional<double> eta;
    std::optional<double> beta;
    std::optional<double> lambda;
    std::optional<double> beta1;
    std::optional<double> beta2;
    std::optional<double> epsilon;
    std::optional<OverflowPolicy> overflow;

    friend bool operator==(const Hyper&, const Hyper&) = default;
};

namespace defaults {
inline constexpr double eta = 0.1;
inline constexpr double beta = 0.9;
inline constexpr double lambda = 1000.0;
inline constexpr double beta1 = 0.9;
inline constexpr double beta2 = 0.999;
inline constexpr double epsilon = 1e-8;
}  // namespace defaults

/// pg, pg-hb, apg, pg-adam, spg-nm.
const std::vector<std::string>& optimizer_names();
bool is_optimizer_name(std::string_view name);

std::string_view to_string(OverflowPolicy p);
OverflowPolicy overflow_policy_from_string(std::string_view s);

using OptimizerState = std::variant<PgState, HeavyBallState, NagState, AdamState, SpgNmState>;

/// One optimiser run in progress: owns the state and the step counter.
class Stepper {
public:
    Stepper(std::string name, OptimizerState state) : name_(std::move(name)), state_(std::move(state)) {}

    const std::string& name() const noexcept { return name_; }
    long iteration() const noexcept { return iteration_; }
    const OptimizerState& state() const noexcept { return state_; }

    /// Advances one iteration; throws NumericalFailure on non-finite iterates.
    void step(const GradientOracle& gradient_at, const ObjectiveOracle& objective_at);

    /// The theta (x) iterate.
    const PolicyParams& theta() const;
    /// The iterate the method reports: omega for SPG-NM, theta otherwise.
    const PolicyParams& reported() const;

    const SpgNmState* spg_nm() const noexcept { return std::get_if<SpgNmState>(&state_); }

private:
    std::string name_;
    OptimizerState state_;
    long iteration_ = 0;
};

/// Validates hyperparameters and initialises the named method at `initial`.
Stepper make_stepper(std::string_view name, const Hyper& hyper, const PolicyParams& initial);

}  // namespace spgnm
