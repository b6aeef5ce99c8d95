#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spgnm/mdp.hpp"

namespace spgnm {

/// A built-in benchmark problem with both initialisations it ships with.
struct BuiltinEnvironment {
    std::string name;
    TabularMdp mdp;
    PolicyParams uniform_init;
    PolicyParams hard_init;
    /// Logits selected by the environment name (uniform or hard).
    PolicyParams init;
};

/// Three-armed bandit paying [1.0, 0.99, 0].
TabularMdp bandit_problem();
PolicyParams bandit_hard_init();

/**
Five-state, five-action MDP with start distribution [0.3, 0.2, 0.1, 0.15, 0.25].
The published transition matrices list next states down the rows and
actions across the columns, so they are transposed into transition(s, a)[s'].
*/
TabularMdp five_state_problem(double discount = 0.9);
PolicyParams five_state_hard_init();

/// bandit-uniform, bandit-hard, mdp-uniform, mdp-hard.
const std::vector<std::string>& builtin_names();
bool is_builtin(std::string_view name);

/// Throws InvalidInput for unknown names.
BuiltinEnvironment builtin_environment(std::string_view name);

}  // namespace spgnm
