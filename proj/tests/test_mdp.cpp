#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "spgnm/environments.hpp"
#include "spgnm/error.hpp"
#include "spgnm/mdp.hpp"
#include "spgnm/mdp_io.hpp"

using namespace spgnm;
using doctest::Approx;

namespace {

PolicyDistribution uniform_policy(const TabularMdp& m) {
    return softmax_policy(PolicyParams::zeros(m.n_states(), m.n_actions()));
}

double bellman_residual(const TabularMdp& m, const PolicyDistribution& pi, const numvec& v) {
    const numvec r = policy_reward(m, pi);
    const Table pp = policy_transition(m, pi);
    double worst = 0.0;
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        double next = 0.0;
        for (std::size_t sn = 0; sn < m.n_states(); ++sn) next += pp(s, sn) * v[sn];
        worst = std::max(worst, std::abs(v[s] - (r[s] + m.discount() * next)));
    }
    return worst;
}

}  // namespace

TEST_CASE("validate accepts the built-in problems") {
    CHECK(validate(five_state_problem()).ok());
    CHECK(validate(bandit_as_mdp({1.0, 0.99, 0.0})).ok());
}

TEST_CASE("validate names the offending transition row") {
    numvec tr = {1.0, 0.0, 0.9, 0.0, 0.0, 1.0, 0.5, 0.5};  // (0,1) sums to 0.9
    TabularMdp m(2, 2, Table{{0.1, 0.2}, {0.3, 0.4}}, tr, 0.5, {0.5, 0.5});
    const auto report = validate(m);
    REQUIRE_FALSE(report.ok());
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].find("transition(0, 1)") != std::string::npos);
}

TEST_CASE("validate reports rewards, discount and start distribution") {
    TabularMdp m(1, 2, Table{{1.5, -0.1}}, {1.0, 1.0}, 1.0, {0.7});
    const auto report = validate(m);
    CHECK(report.violations.size() == 4);
    CHECK(report.to_string().find("discount") != std::string::npos);
    CHECK_THROWS_AS(require_valid(m), InvalidInput);
}

TEST_CASE("constructor rejects inconsistent shapes") {
    CHECK_THROWS_AS(TabularMdp(2, 2, Table(2, 3), numvec(8, 0.5), 0.5, {0.5, 0.5}), InvalidInput);
    CHECK_THROWS_AS(TabularMdp(2, 2, Table(2, 2), numvec(7, 0.5), 0.5, {0.5, 0.5}), InvalidInput);
    CHECK_THROWS_AS(TabularMdp(2, 2, Table(2, 2), numvec(8, 0.5), 0.5, {1.0}), InvalidInput);
}

TEST_CASE("softmax of the published initialisations") {
    const auto hard = softmax_policy(PolicyParams(Table{{1, 3, 5}}));
    CHECK(std::abs(hard.probs(0, 0) - 0.01588) <= 1e-5);
    CHECK(std::abs(hard.probs(0, 1) - 0.11731) <= 1e-5);
    CHECK(std::abs(hard.probs(0, 2) - 0.86681) <= 1e-5);

    const auto uni = softmax_policy(PolicyParams(Table{{0, 0, 0}}));
    for (double p : uni.probs.flat()) CHECK(p == Approx(1.0 / 3.0).epsilon(1e-15));

    const auto shifted = softmax_policy(PolicyParams(Table{{123.5, 123.5, 123.5}}));
    CHECK(max_abs_diff(shifted.probs, uni.probs) <= 1e-15);
}

TEST_CASE("softmax rejects non-finite logits") {
    CHECK_THROWS_AS(softmax_policy(PolicyParams(Table{{0.0, std::nan("")}})), InvalidInput);
    CHECK_THROWS_AS(softmax_policy(PolicyParams(Table{{0.0, INFINITY}})), InvalidInput);
}

TEST_CASE("property: softmax rows are distributions and shift invariant") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = oracle::random_logits(rng, 4, 5, -50.0, 50.0);
        const auto pi = softmax_policy(p);
        PolicyParams moved = p;
        for (std::size_t s = 0; s < 4; ++s) {
            const double c = shift(rng);
            for (double& x : moved.logits.row(s)) x += c;
        }
        const auto pi_moved = softmax_policy(moved);
        for (std::size_t s = 0; s < 4; ++s) {
            double z = 0.0;
            for (double x : pi.probs.row(s)) {
                CHECK(x > 0.0);
                z += x;
            }
            CHECK(std::abs(z - 1.0) <= 1e-12);
        }
        CHECK(max_abs_diff(pi.probs, pi_moved.probs) <= 1e-12);

        PolicyParams huge = p;
        for (double& x : huge.logits.flat()) x *= 1e6;
        const auto sharp = softmax_policy(huge);
        for (std::size_t s = 0; s < 4; ++s) {
            double z = 0.0;
            for (double x : sharp.probs.row(s)) {
                CHECK(x >= 0.0);
                z += x;
            }
            CHECK(std::abs(z - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("policy evaluation on the bandit is the policy-averaged reward") {
    const auto m = bandit_as_mdp({1.0, 0.99, 0.0});
    const auto v = policy_evaluation(m, uniform_policy(m));
    REQUIRE(v.size() == 1);
    CHECK(v[0] == Approx(1.99 / 3.0).epsilon(1e-14));
}

TEST_CASE("gamma = 0 evaluation truncates to one step") {
    std::mt19937_64 rng(3);
    const auto m = oracle::random_mdp(rng, 4, 3, 0.0);
    const auto pi = softmax_policy(oracle::random_logits(rng, 4, 3, -2, 2));
    const auto v = policy_evaluation(m, pi);
    for (std::size_t s = 0; s < 4; ++s) {
        double expected = 0.0;
        for (std::size_t a = 0; a < 3; ++a) expected += pi.probs(s, a) * m.reward(s, a);
        CHECK(v[s] == Approx(expected).epsilon(1e-15));
    }
    CHECK(max_abs_diff(action_values(m, v), m.reward()) == 0.0);
}

TEST_CASE("five-state MDP: direct solve agrees with fixed-point iteration") {
    const auto m = five_state_problem(0.9);
    const auto pi = uniform_policy(m);
    const auto v = policy_evaluation(m, pi);
    const auto ref = oracle::iterative_evaluation(m, pi);
    for (std::size_t s = 0; s < 5; ++s) CHECK(std::abs(v[s] - ref[s]) <= 1e-8);
}

TEST_CASE("action values match direct summation and reproduce V") {
    const auto m = five_state_problem(0.9);
    const auto pi = uniform_policy(m);
    const auto v = policy_evaluation(m, pi);
    const auto q = action_values(m, v);
    for (std::size_t s = 0; s < 5; ++s) {
        double back = 0.0;
        for (std::size_t a = 0; a < 5; ++a) {
            double expected = m.reward(s, a);
            for (std::size_t sn = 0; sn < 5; ++sn) expected += 0.9 * m.transition(s, a)[sn] * v[sn];
            CHECK(q(s, a) == Approx(expected).epsilon(1e-14));
            back += pi.probs(s, a) * q(s, a);
        }
        CHECK(std::abs(back - v[s]) <= 1e-10);
    }
    CHECK(max_abs_diff(action_values(m, numvec(5, 0.0)), m.reward()) == 0.0);
    CHECK_THROWS_AS(action_values(m, numvec(4, 0.0)), InvalidInput);
}

TEST_CASE("visitation distribution") {
    SUBCASE("gamma = 0 returns the start distribution") {
        std::mt19937_64 rng(11);
        const auto m = oracle::random_mdp(rng, 3, 2, 0.0);
        const numvec start = {0.2, 0.5, 0.3};
        CHECK(visitation_distribution(m, uniform_policy(m), start) == start);
    }
    SUBCASE("single state") {
        const auto m = bandit_as_mdp({0.2, 0.4}).with_discount(0.7);
        const auto d = visitation_distribution(m, uniform_policy(m), numvec{1.0});
        CHECK(d[0] == Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("five-state MDP matches the truncated series") {
        const auto m = five_state_problem(0.9);
        const auto pi = uniform_policy(m);
        const auto d = visitation_distribution(m, pi, m.initial_dist());
        const auto ref = oracle::truncated_visitation(m, pi, m.initial_dist(), 200);
        for (std::size_t s = 0; s < 5; ++s) CHECK(std::abs(d[s] - ref[s]) <= 1e-6);
    }
    SUBCASE("shape mismatch") {
        const auto m = five_state_problem(0.9);
        CHECK_THROWS_AS(visitation_distribution(m, uniform_policy(m), numvec{1.0}), InvalidInput);
    }
}

TEST_CASE("objective is the start-weighted value") {
    const auto m = five_state_problem(0.9);
    const auto v = policy_evaluation(m, uniform_policy(m));
    const numvec rho = {0.3, 0.2, 0.1, 0.15, 0.25};
    double hand = 0.0;
    for (std::size_t s = 0; s < 5; ++s) hand += rho[s] * v[s];
    CHECK(objective(m, v, rho) == Approx(hand).epsilon(1e-15));
    CHECK(objective(m, v, numvec{0, 0, 1, 0, 0}) == v[2]);

    const auto bandit = bandit_as_mdp({1.0, 0.99, 0.0});
    CHECK(objective_at(bandit, PolicyParams::zeros(1, 3), numvec{1.0}) == Approx(0.663333333333).epsilon(1e-12));
    CHECK_THROWS_AS(objective(m, v, numvec{1.0}), InvalidInput);
}

TEST_CASE("optimal values") {
    SUBCASE("bandit") {
        const auto sol = optimal_values(bandit_as_mdp({1.0, 0.99, 0.0}), 1e-10);
        CHECK(sol.values[0] == 1.0);
        CHECK(sol.greedy_policy[0] == 0);
        CHECK(sol.sweeps == 1);
    }
    SUBCASE("single action") {
        CHECK(optimal_values(bandit_as_mdp({0.5}), 1e-10).values[0] == 0.5);
    }
    SUBCASE("gamma = 0 is the row maximum") {
        std::mt19937_64 rng(5);
        const auto m = oracle::random_mdp(rng, 4, 3, 0.0);
        const auto sol = optimal_values(m, 1e-10);
        for (std::size_t s = 0; s < 4; ++s) {
            const auto row = m.reward().row(s);
            CHECK(sol.values[s] == *std::max_element(row.begin(), row.end()));
        }
    }
    SUBCASE("ties go to the lowest action") {
        CHECK(optimal_values(bandit_as_mdp({0.3, 0.7, 0.7}), 1e-10).greedy_policy[0] == 1);
    }
    SUBCASE("five-state MDP matches enumeration of all 3125 deterministic policies") {
        const auto m = five_state_problem(0.9);
        const auto sol = optimal_values(m, 1e-10);
        const auto brute = oracle::enumerate_deterministic(m);
        CHECK(brute.policies == 3125);
        for (std::size_t s = 0; s < 5; ++s) CHECK(std::abs(sol.values[s] - brute.best_values[s]) <= 1e-8);
        // The greedy policy itself attains V*.
        const auto greedy = oracle::deterministic_value(m, sol.greedy_policy);
        for (std::size_t s = 0; s < 5; ++s) CHECK(std::abs(greedy[s] - brute.best_values[s]) <= 1e-8);
    }
    SUBCASE("invalid tolerance and sweep cap") {
        const auto m = five_state_problem(0.9);
        CHECK_THROWS_AS(optimal_values(m, 0.0), InvalidInput);
        CHECK_THROWS_AS(optimal_values(m, 1e-10, 3), NumericalFailure);
    }
}

TEST_CASE("bandit_as_mdp") {
    const auto m = bandit_as_mdp({1.0, 0.99, 0.0});
    CHECK(m.n_states() == 1);
    CHECK(m.n_actions() == 3);
    CHECK(m.discount() == 0.0);
    const auto pi = softmax_policy(PolicyParams(Table{{1, 3, 5}}));
    // 0.0158762 * 1.0 + 0.1173104 * 0.99
    CHECK(std::abs(objective(m, policy_evaluation(m, pi), numvec{1.0}) - 0.1320136) <= 2e-5);
    CHECK_THROWS_AS(bandit_as_mdp({}), InvalidInput);
    CHECK_THROWS_AS(bandit_as_mdp({0.5, 1.2}), InvalidInput);
}

TEST_CASE("property: random MDPs satisfy the evaluation invariants") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    const double gammas[] = {0.0, 0.5, 0.9, 0.99};
    for (int trial = 0; trial < 80; ++trial) {
        const double gamma = gammas[trial % 4];
        const std::size_t ns = dim(rng);
        const std::size_t na = dim(rng);
        const auto m = oracle::random_mdp(rng, ns, na, gamma);
        REQUIRE(validate(m).ok());
        const auto pi = softmax_policy(oracle::random_logits(rng, ns, na, -3, 3));
        const auto bundle = evaluate(m, pi, m.initial_dist());

        CHECK(bellman_residual(m, pi, bundle.state_values) <= 1e-8);

        double mass = 0.0;
        for (double d : bundle.visitation) {
            CHECK(d >= 0.0);
            mass += d;
        }
        CHECK(std::abs(mass - 1.0) <= 1e-9);

        // d = (1 - gamma) start + gamma (P^pi)^T d
        const Table pp = policy_transition(m, pi);
        for (std::size_t s = 0; s < ns; ++s) {
            double rhs = (1.0 - gamma) * m.initial_dist()[s];
            for (std::size_t k = 0; k < ns; ++k) rhs += gamma * pp(k, s) * bundle.visitation[k];
            CHECK(std::abs(bundle.visitation[s] - rhs) <= 1e-8);
        }

        for (std::size_t s = 0; s < ns; ++s) {
            double centred = 0.0;
            for (std::size_t a = 0; a < na; ++a) centred += pi.probs(s, a) * bundle.advantages(s, a);
            CHECK(std::abs(centred) <= 1e-10);
        }
    }
}

TEST_CASE("property: V* dominates random policies") {
    std::mt19937_64 rng(99);
    const double tol = 1e-8;
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = oracle::random_mdp(rng, 4, 3, trial % 2 ? 0.9 : 0.5);
        const auto sol = optimal_values(m, tol);
        for (int k = 0; k < 100; ++k) {
            const auto v = policy_evaluation(m, softmax_policy(oracle::random_logits(rng, 4, 3, -5, 5)));
            for (std::size_t s = 0; s < 4; ++s) CHECK(sol.values[s] >= v[s] - tol);
        }
    }
}

TEST_CASE("MDP files round-trip and are validated on load") {
    const auto dir = std::filesystem::temp_directory_path() / "spgnm_test_mdp";
    std::filesystem::create_directories(dir);
    const auto m = five_state_problem(0.9);
    save_mdp(m, dir / "five.json");
    CHECK(load_mdp(dir / "five.json") == m);

    auto doc = mdp_to_json(m);
    doc["transition"][0][0][0] = 0.5;  // row now sums to 1.4
    std::ofstream(dir / "bad.json") << doc.dump();
    CHECK_THROWS_AS(load_mdp(dir / "bad.json"), InvalidInput);
    CHECK_FALSE(validate(read_mdp_unchecked(dir / "bad.json")).ok());

    auto extra = mdp_to_json(m);
    extra["colour"] = "blue";
    CHECK_THROWS_AS(mdp_from_json(extra), InvalidInput);

    auto ragged = mdp_to_json(m);
    ragged["reward"][2] = {0.1, 0.2};
    CHECK_THROWS_AS(mdp_from_json(ragged), InvalidInput);

    CHECK_THROWS(load_mdp(dir / "missing.json"));
    std::filesystem::remove_all(dir);
}
