#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spgnm/environments.hpp"
#include "spgnm/error.hpp"
#include "spgnm/optimizers.hpp"

using namespace spgnm;

namespace {

const numvec kStart = {1.0};

struct Problem {
    TabularMdp mdp;
    numvec start;

    GradientOracle gradient() const {
        return [this](const PolicyParams& p) { return exact_gradient(mdp, p, start); };
    }
    ObjectiveOracle objective() const {
        return [this](const PolicyParams& p) { return objective_at(mdp, p, start); };
    }
    StepContext ctx(long t) const { return {gradient(), objective(), t}; }
};

Problem bandit() { return {bandit_problem(), kStart}; }
Problem five_state() {
    auto m = five_state_problem(0.9);
    numvec rho = m.initial_dist();
    return {std::move(m), std::move(rho)};
}

GradientOracle zero_gradient() {
    return [](const PolicyParams& p) { return GradientTable{Table(p.logits.rows(), p.logits.cols())}; };
}

PolicyParams axpy(const PolicyParams& x, double a, const Table& y) {
    PolicyParams out = x;
    for (std::size_t i = 0; i < out.logits.size(); ++i) out.logits.flat()[i] += a * y.flat()[i];
    return out;
}

}  // namespace

TEST_CASE("pg step") {
    const auto prob = bandit();
    SUBCASE("uniform bandit, eta = 0.1") {
        const auto next = pg_step({PolicyParams::zeros(1, 3), 0.1}, prob.ctx(1));
        CHECK(std::abs(next.theta.logits(0, 0) - 0.0112222) <= 1e-6);
        CHECK(std::abs(next.theta.logits(0, 1) - 0.0108889) <= 1e-6);
        CHECK(std::abs(next.theta.logits(0, 2) + 0.0221111) <= 1e-6);
    }
    SUBCASE("zero gradient and zero step leave theta alone") {
        const PgState s{PolicyParams(Table{{0.3, -1.0, 2.0}}), 0.1};
        CHECK(pg_step(s, {zero_gradient(), prob.objective(), 1}).theta == s.theta);
        const PgState frozen{s.theta, 0.0};
        CHECK(pg_step(pg_step(frozen, prob.ctx(1)), prob.ctx(2)).theta == s.theta);
    }
    SUBCASE("non-finite gradient reports the iteration") {
        GradientOracle bad = [](const PolicyParams& p) {
            GradientTable g{Table(p.logits.rows(), p.logits.cols())};
            g.partials(0, 1) = NAN;
            return g;
        };
        try {
            pg_step({PolicyParams::zeros(1, 3), 0.1}, {bad, prob.objective(), 17});
            FAIL("expected NumericalFailure");
        } catch (const NumericalFailure& e) {
            CHECK(e.iteration() == 17);
        }
    }
    SUBCASE("iteration counter starts at 1") {
        CHECK_THROWS_AS(pg_step({PolicyParams::zeros(1, 3), 0.1}, prob.ctx(0)), InvalidInput);
    }
}

TEST_CASE("heavy ball") {
    const auto prob = five_state();
    SUBCASE("beta = 0 reproduces pg bit for bit") {
        PgState pg{five_state_hard_init(), 0.1};
        HeavyBallState hb{five_state_hard_init(), five_state_hard_init(), 0.1, 0.0};
        for (long t = 1; t <= 50; ++t) {
            pg = pg_step(pg, prob.ctx(t));
            hb = heavy_ball_step(hb, prob.ctx(t));
            REQUIRE(hb.theta == pg.theta);
        }
    }
    SUBCASE("zero gradient at rest is a fixed point") {
        const HeavyBallState s{five_state_hard_init(), five_state_hard_init(), 0.1, 0.9};
        const auto next = heavy_ball_step(s, {zero_gradient(), prob.objective(), 1});
        CHECK(next.theta == s.theta);
        CHECK(next.theta_prev == s.theta);
    }
    SUBCASE("two steps on the bandit follow the recurrence") {
        const auto b = bandit();
        const auto theta0 = PolicyParams::zeros(1, 3);
        const auto s1 = heavy_ball_step({theta0, theta0, 0.1, 0.9}, b.ctx(1));
        const auto g0 = exact_gradient(b.mdp, theta0, kStart);
        const auto theta1 = axpy(theta0, 0.1, g0.partials);
        CHECK(max_abs_diff(s1.theta.logits, theta1.logits) <= 1e-15);

        const auto s2 = heavy_ball_step(s1, b.ctx(2));
        const auto g1 = exact_gradient(b.mdp, theta1, kStart);
        for (std::size_t a = 0; a < 3; ++a) {
            const double displacement = theta1.logits(0, a) - theta0.logits(0, a);
            const double expected = theta1.logits(0, a) + 0.1 * g1.partials(0, a) + 0.9 * displacement;
            CHECK(std::abs(s2.theta.logits(0, a) - expected) <= 1e-15);
        }
        CHECK(s2.theta_prev == s1.theta);
    }
}

TEST_CASE("nesterov") {
    const auto prob = five_state();
    SUBCASE("momentum coefficients are (t-1)/(t+2)") {
        CHECK(nag_momentum(1) == 0.0);
        CHECK(nag_momentum(2) == 0.25);
        CHECK(nag_momentum(8) == 0.7);
        CHECK(nag_momentum(100) == 99.0 / 102.0);
    }
    SUBCASE("first step has no momentum") {
        const NagState s{five_state_hard_init(), five_state_hard_init(), 0.1};
        const auto next = nag_step(s, prob.ctx(1));
        CHECK(next.lookahead == next.theta);
    }
    SUBCASE("zero gradient from rest") {
        const NagState s{five_state_hard_init(), five_state_hard_init(), 0.1};
        const auto next = nag_step(s, {zero_gradient(), prob.objective(), 5});
        CHECK(next.theta == s.theta);
        CHECK(next.lookahead == s.lookahead);
    }
    SUBCASE("t = 8 expands by hand") {
        std::mt19937_64 rng(1);
        const NagState s{oracle::random_logits(rng, 5, 5, -1, 1), oracle::random_logits(rng, 5, 5, -1, 1), 0.2};
        const auto next = nag_step(s, prob.ctx(8));
        const auto g = exact_gradient(prob.mdp, s.lookahead, prob.start);
        for (std::size_t i = 0; i < 25; ++i) {
            const double x_new = s.lookahead.logits.flat()[i] + 0.2 * g.partials.flat()[i];
            const double y_new = x_new + 0.7 * (x_new - s.theta.logits.flat()[i]);
            CHECK(std::abs(next.theta.logits.flat()[i] - x_new) <= 1e-15);
            CHECK(std::abs(next.lookahead.logits.flat()[i] - y_new) <= 1e-14);
        }
    }
}

TEST_CASE("adam") {
    const auto b = bandit();
    const auto theta0 = PolicyParams::zeros(1, 3);
    auto fresh = [&](double eta) {
        return AdamState{theta0, Table(1, 3), Table(1, 3), eta, 0.9, 0.999, 1e-8};
    };
    SUBCASE("first step is eta * g / (|g| + eps)") {
        const auto next = adam_step(fresh(0.1), b.ctx(1));
        const auto g = exact_gradient(b.mdp, theta0, kStart);
        for (std::size_t a = 0; a < 3; ++a) {
            const double gi = g.partials(0, a);
            CHECK(std::abs(next.theta.logits(0, a) - 0.1 * gi / (std::abs(gi) + 1e-8)) <= 1e-12);
        }
    }
    SUBCASE("zero gradient forever") {
        AdamState s = fresh(0.1);
        for (long t = 1; t <= 20; ++t) s = adam_step(s, {zero_gradient(), b.objective(), t});
        CHECK(s.theta == theta0);
    }
    SUBCASE("three steps match a hand-rolled recurrence") {
        AdamState s = fresh(0.05);
        double th[3] = {0, 0, 0}, m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
        for (int t = 1; t <= 3; ++t) {
            s = adam_step(s, b.ctx(t));
            const auto g = exact_gradient(b.mdp, PolicyParams(Table{{th[0], th[1], th[2]}}), kStart);
            for (int a = 0; a < 3; ++a) {
                const double gi = g.partials(0, static_cast<std::size_t>(a));
                m[a] = 0.9 * m[a] + 0.1 * gi;
                v[a] = 0.999 * v[a] + 0.001 * gi * gi;
                const double mh = m[a] / (1 - std::pow(0.9, t));
                const double vh = v[a] / (1 - std::pow(0.999, t));
                th[a] += 0.05 * mh / (std::sqrt(vh) + 1e-8);
            }
            for (int a = 0; a < 3; ++a) CHECK(std::abs(s.theta.logits(0, static_cast<std::size_t>(a)) - th[a]) <= 1e-12);
        }
    }
}

TEST_CASE("spg-nm step") {
    SUBCASE("lambda = 1 is plain gradient ascent") {
        const auto prob = five_state();
        PgState pg{five_state_hard_init(), 0.1};
        SpgNmState spg;
        spg.theta = spg.theta_prev = spg.omega = five_state_hard_init();
        spg.eta = 0.1;
        spg.lambda = 1.0;
        for (long t = 1; t <= 200; ++t) {
            pg = pg_step(pg, prob.ctx(t));
            spg = spg_nm_step(spg, prob.ctx(t));
            REQUIRE(max_abs_diff(spg.theta.logits, pg.theta.logits) <= 1e-12);
            REQUIRE(spg.omega == spg.theta);
        }
    }
    SUBCASE("first step from zero logits: phi equals theta(1) and is kept") {
        const auto b = bandit();
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = PolicyParams::zeros(1, 3);
        s.lambda = 1000.0;
        const auto next = spg_nm_step(s, b.ctx(1));
        CHECK(std::abs(next.theta.logits(0, 0) - 0.0112222) <= 1e-6);
        CHECK(max_abs_diff(next.omega.logits, next.theta.logits) <= 1e-12);
        CHECK(next.theta_prev == s.theta);
        CHECK(next.accepted == 1);
        CHECK(*next.omega_objective >= *next.theta_objective);
    }
    SUBCASE("zero gradient: phi = lambda * theta sharpens toward the best arm and wins") {
        const auto b = bandit();
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = PolicyParams(Table{{1.0, 0.0, 0.0}});
        s.lambda = 10.0;
        const auto next = spg_nm_step(s, {zero_gradient(), b.objective(), 1});
        CHECK(next.theta == s.theta);
        for (std::size_t a = 0; a < 3; ++a) CHECK(next.omega.logits(0, a) == 10.0 * s.theta.logits(0, a));
        CHECK(*next.omega_objective > *next.theta_objective);
        CHECK(*next.omega_objective == objective_at(b.mdp, next.omega, kStart));
    }
    SUBCASE("ties accept phi") {
        const auto flat = bandit_as_mdp({0.4, 0.4});
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = PolicyParams(Table{{0.5, -0.5}});
        s.lambda = 3.0;
        const auto next = spg_nm_step(s, {[&](const PolicyParams& p) { return exact_gradient(flat, p, kStart); },
                                          [&](const PolicyParams& p) { return objective_at(flat, p, kStart); }, 1});
        CHECK(next.theta == s.theta);
        CHECK(next.omega.logits(0, 0) == 1.5);
        CHECK(next.accepted == 1);
    }
    SUBCASE("worse candidates are rejected") {
        const auto b = bandit();
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = bandit_hard_init();  // greedy arm is the worst one
        s.lambda = 1000.0;
        const auto next = spg_nm_step(s, b.ctx(1));
        CHECK(next.omega == next.theta);
        CHECK(next.accepted == 0);
        CHECK(*next.omega_objective == *next.theta_objective);
    }
    SUBCASE("non-finite candidates") {
        const auto b = bandit();
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = PolicyParams(Table{{1e300, 0.0, 0.0}});
        s.lambda = 1e10;
        const auto rejected = spg_nm_step(s, {zero_gradient(), b.objective(), 4});
        CHECK(rejected.omega == rejected.theta);
        CHECK(rejected.overflow_rejections == 1);

        s.overflow = OverflowPolicy::fail;
        try {
            spg_nm_step(s, {zero_gradient(), b.objective(), 4});
            FAIL("expected NumericalFailure");
        } catch (const NumericalFailure& e) {
            CHECK(e.iteration() == 4);
            CHECK(std::string(e.what()).find("lambda") != std::string::npos);
        }
    }
}

TEST_CASE("property: SPG-NM keeps the better of phi and theta") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = oracle::random_mdp(rng, 4, 3, 0.9);
        const numvec start = m.initial_dist();
        const StepContext base{[&](const PolicyParams& p) { return exact_gradient(m, p, start); },
                               [&](const PolicyParams& p) { return objective_at(m, p, start); }, 1};
        SpgNmState s;
        s.theta = s.theta_prev = s.omega = oracle::random_logits(rng, 4, 3, -2, 2);
        s.lambda = trial % 2 ? 1000.0 : 5.0;
        for (long t = 1; t <= 100; ++t) {
            StepContext ctx = base;
            ctx.iteration = t;
            s = spg_nm_step(s, ctx);
            REQUIRE(*s.omega_objective >= *s.theta_objective);
            REQUIRE(*s.theta_objective == objective_at(m, s.theta, start));
        }
    }
}

TEST_CASE("make_stepper") {
    const auto init = five_state_hard_init();
    SUBCASE("spg-nm initial state") {
        const auto st = make_stepper("spg-nm", Hyper{.eta = 0.1, .lambda = 1000.0}, init);
        const auto* s = st.spg_nm();
        REQUIRE(s != nullptr);
        CHECK(s->omega == init);
        CHECK(s->theta_prev == init);
        CHECK(s->lambda == 1000.0);
        CHECK(s->eta == 0.1);
        CHECK(st.iteration() == 0);
    }
    SUBCASE("defaults") {
        const auto apg = make_stepper("apg", {}, init);
        CHECK(std::get<NagState>(apg.state()).eta == defaults::eta);
        CHECK(std::get<NagState>(apg.state()).lookahead == init);
        const auto adam = make_stepper("pg-adam", {}, init);
        const auto& a = std::get<AdamState>(adam.state());
        CHECK(a.beta1 == 0.9);
        CHECK(a.beta2 == 0.999);
        CHECK(a.epsilon == 1e-8);
        CHECK(a.first_moment.max_abs() == 0.0);
        CHECK(std::get<HeavyBallState>(make_stepper("pg-hb", {}, init).state()).beta == 0.9);
        CHECK(std::get<PgState>(make_stepper("pg", Hyper{.eta = 0.1}, init).state()).eta == 0.1);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(make_stepper("nosuch", {}, init), InvalidInput);
        CHECK_THROWS_AS(make_stepper("pg", Hyper{.eta = 0.0}, init), InvalidInput);
        CHECK_THROWS_AS(make_stepper("pg-hb", Hyper{.beta = 1.0}, init), InvalidInput);
        CHECK_THROWS_AS(make_stepper("spg-nm", Hyper{.lambda = -1.0}, init), InvalidInput);
        CHECK_THROWS_AS(make_stepper("pg-adam", Hyper{.epsilon = 0.0}, init), InvalidInput);
        try {
            make_stepper("nosuch", {}, init);
        } catch (const InvalidInput& e) {
            for (const auto& n : optimizer_names()) CHECK(std::string(e.what()).find(n) != std::string::npos);
        }
    }
}

TEST_CASE("property: steppers are deterministic and zero gradients keep them still") {
    const auto prob = five_state();
    for (const auto& name : optimizer_names()) {
        CAPTURE(name);
        auto a = make_stepper(name, {}, five_state_hard_init());
        auto b = make_stepper(name, {}, five_state_hard_init());
        for (int t = 0; t < 30; ++t) {
            a.step(prob.gradient(), prob.objective());
            b.step(prob.gradient(), prob.objective());
        }
        CHECK(a.theta() == b.theta());
        CHECK(a.reported() == b.reported());
        CHECK(a.iteration() == 30);

        // Constant rewards: every gradient is zero and every policy has the same value.
        const TabularMdp flat(5, 5, Table(5, 5, 0.3), prob.mdp.transition_flat(), 0.9, prob.start);
        const GradientOracle g = [&](const PolicyParams& p) { return exact_gradient(flat, p, prob.start); };
        const ObjectiveOracle f = [&](const PolicyParams& p) { return objective_at(flat, p, prob.start); };
        auto still = make_stepper(name, {}, five_state_hard_init());
        for (int t = 0; t < 5; ++t) still.step(g, f);
        if (const auto* s = still.spg_nm()) {
            // Every candidate ties, and ties accept the scaled iterate.
            CHECK(std::abs(*s->omega_objective - *s->theta_objective) <= 1e-12);
            CHECK(s->accepted == 5);
        } else {
            // Adam normalises round-off sized gradients, hence the looser bound.
            const double tol = name == "pg-adam" ? 1e-6 : 1e-12;
            CHECK(max_abs_diff(still.theta().logits, five_state_hard_init().logits) <= tol);
        }
    }
}
