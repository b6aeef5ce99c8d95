#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spgnm/table.hpp"

namespace spgnm {

/**
Finite discounted MDP with tabular rewards and transitions.

The constructor only checks that the pieces have consistent shapes; whether
the probabilities and rewards are admissible is reported by validate().
Transition rows are stored as transition(s, a)[s'] = P(s' | s, a).
*/
class TabularMdp {
public:
    TabularMdp(std::size_t n_states, std::size_t n_actions, Table reward, numvec transition,
               double discount, numvec initial_dist);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double discount() const noexcept { return discount_; }
    const Table& reward() const noexcept { return reward_; }
    double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
    const numvec& initial_dist() const noexcept { return initial_; }

    std::span<const double> transition(std::size_t s, std::size_t a) const {
        return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }
    const numvec& transition_flat() const noexcept { return transition_; }

    /// Same model with a different discount factor.
    TabularMdp with_discount(double discount) const;

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    Table reward_;
    numvec transition_;
    double discount_;
    numvec initial_;
};

/// Softmax logits theta(s, a).
struct PolicyParams {
    Table logits;

    PolicyParams() = default;
    explicit PolicyParams(Table t) : logits(std::move(t)) {}
    static PolicyParams zeros(std::size_t n_states, std::size_t n_actions) {
        return PolicyParams(Table(n_states, n_actions));
    }
    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// pi(a | s); each row is strictly positive and sums to one.
struct PolicyDistribution {
    Table probs;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
    std::string to_string() const;
};

/// Exact evaluation of one policy from one start distribution.
struct EvaluationBundle {
    numvec state_values;
    Table action_values;
    Table advantages;
    numvec visitation;
};

/// Checks every probability/reward/discount invariant of the model.
ValidationReport validate(const TabularMdp& mdp);

/// Throws InvalidInput carrying the report when validate() fails.
void require_valid(const TabularMdp& mdp);

/// Row-wise softmax with max subtraction; throws InvalidInput on non-finite logits.
PolicyDistribution softmax_policy(const PolicyParams& params);

/// Solves (I - gamma P^pi) V = r^pi with a dense LU factorisation.
numvec policy_evaluation(const TabularMdp& mdp, const PolicyDistribution& policy);

/// Q(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) V(s').
Table action_values(const TabularMdp& mdp, std::span<const double> state_values);

/// Normalised discounted occupancy d = (1 - gamma) start^T (I - gamma P^pi)^-1.
numvec visitation_distribution(const TabularMdp& mdp, const PolicyDistribution& policy,
                               std::span<const double> start);

/// Sum_s start(s) V(s).
double objective(const TabularMdp& mdp, std::span<const double> state_values,
                 std::span<const double> start);

/// V, Q, advantages and visitation in one pass.
EvaluationBundle evaluate(const TabularMdp& mdp, const PolicyDistribution& policy,
                          std::span<const double> start);

/// Shortcut for objective(softmax(params)) from `start`.
double objective_at(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start);

struct OptimalSolution {
    numvec values;
    std::vector<std::size_t> greedy_policy;
    long sweeps = 0;
};

/**
Value iteration on the Bellman optimality operator.

Stops once the sup-norm change drops to tol * (1 - gamma) / (2 gamma), which
bounds the distance to V* by tol. With gamma = 0 a single sweep is exact.
Ties in the greedy policy go to the lowest action index. Throws InvalidInput
for tol <= 0 and NumericalFailure after max_sweeps.
*/
OptimalSolution optimal_values(const TabularMdp& mdp, double tol, long max_sweeps = 1'000'000);

/// One-state, gamma = 0 MDP whose actions pay `rewards`.
TabularMdp bandit_as_mdp(const numvec& rewards);

/// Policy-averaged reward r^pi(s) and transition matrix P^pi(s, s').
numvec policy_reward(const TabularMdp& mdp, const PolicyDistribution& policy);
Table policy_transition(const TabularMdp& mdp, const PolicyDistribution& policy);

}  // namespace spgnm
