#include "spgnm/environments.hpp"

#include <algorithm>
#include <array>

#include <fmt/core.h>

#include "spgnm/error.hpp"

namespace spgnm {

namespace {

using Matrix5 = std::array<std::array<double, 5>, 5>;

// Row = next state, column = action, one matrix per source state.
constexpr std::array<Matrix5, 5> kPublishedTransitions = {{
    {{{0.1, 0.6, 0.5, 0.4, 0.2},
      {0.5, 0.1, 0.1, 0.3, 0.1},
      {0.1, 0.1, 0.1, 0.1, 0.1},
      {0.2, 0.1, 0.2, 0.1, 0.1},
      {0.1, 0.1, 0.1, 0.1, 0.5}}},
    {{{0.1, 0.4, 0.1, 0.4, 0.2},
      {0.5, 0.1, 0.4, 0.1, 0.2},
      {0.2, 0.2, 0.3, 0.1, 0.2},
      {0.1, 0.2, 0.1, 0.1, 0.2},
      {0.1, 0.1, 0.1, 0.3, 0.2}}},
    {{{0.6, 0.2, 0.3, 0.1, 0.2},
      {0.1, 0.4, 0.3, 0.4, 0.1},
      {0.1, 0.1, 0.2, 0.3, 0.1},
      {0.1, 0.2, 0.1, 0.1, 0.1},
      {0.1, 0.1, 0.1, 0.1, 0.5}}},
    {{{0.6, 0.1, 0.2, 0.4, 0.5},
      {0.1, 0.5, 0.1, 0.3, 0.1},
      {0.1, 0.1, 0.1, 0.1, 0.1},
      {0.1, 0.2, 0.1, 0.1, 0.2},
      {0.1, 0.1, 0.5, 0.1, 0.1}}},
    {{{0.2, 0.4, 0.4, 0.1, 0.2},
      {0.2, 0.1, 0.1, 0.4, 0.5},
      {0.2, 0.2, 0.1, 0.2, 0.1},
      {0.2, 0.2, 0.3, 0.1, 0.1},
      {0.2, 0.1, 0.1, 0.2, 0.1}}},
}};

}  // namespace

TabularMdp bandit_problem() { return bandit_as_mdp({1.0, 0.99, 0.0}); }

PolicyParams bandit_hard_init() { return PolicyParams(Table{{1.0, 3.0, 5.0}}); }

TabularMdp five_state_problem(double discount) {
    Table reward{{1.0, 0.8, 0.6, 0.7, 0.4},
                 {0.5, 0.3, 0.1, 1.0, 0.6},
                 {0.6, 0.9, 0.8, 0.7, 1.0},
                 {0.1, 0.2, 0.6, 0.7, 0.4},
                 {0.8, 0.4, 0.6, 0.2, 0.9}};
    numvec transition;
    transition.reserve(5 * 5 * 5);
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t next = 0; next < 5; ++next) transition.push_back(kPublishedTransitions[s][next][a]);
    return TabularMdp(5, 5, std::move(reward), std::move(transition), discount, {0.3, 0.2, 0.1, 0.15, 0.25});
}

PolicyParams five_state_hard_init() {
    return PolicyParams(Table{{1, 2, 3, 4, 5}, {3, 4, 5, 1, 2}, {5, 2, 3, 4, 1}, {5, 4, 2, 1, 3}, {2, 4, 3, 5, 1}});
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"bandit-uniform", "bandit-hard", "mdp-uniform", "mdp-hard"};
    return names;
}

bool is_builtin(std::string_view name) {
    const auto& names = builtin_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

BuiltinEnvironment builtin_environment(std::string_view name) {
    if (name == "bandit-uniform" || name == "bandit-hard") {
        const PolicyParams uniform = PolicyParams::zeros(1, 3);
        const PolicyParams hard = bandit_hard_init();
        return {std::string(name), bandit_problem(), uniform, hard, name == "bandit-hard" ? hard : uniform};
    }
    if (name == "mdp-uniform" || name == "mdp-hard") {
        const PolicyParams uniform = PolicyParams::zeros(5, 5);
        const PolicyParams hard = five_state_hard_init();
        return {std::string(name), five_state_problem(), uniform, hard, name == "mdp-hard" ? hard : uniform};
    }
    throw InvalidInput(fmt::format("unknown environment '{}' (built-ins: bandit-uniform, bandit-hard, "
                                   "mdp-uniform, mdp-hard)",
                                   name));
}

}  // namespace spgnm
