#include "spgnm/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/core.h>

#include "spgnm/error.hpp"

namespace spgnm {

namespace {

constexpr double kProbTol = 1e-9;

void check_policy_shape(const TabularMdp& mdp, const PolicyDistribution& policy) {
    if (policy.probs.rows() != mdp.n_states() || policy.probs.cols() != mdp.n_actions())
        throw InvalidInput(fmt::format("policy shape {}x{} does not match MDP {}x{}", policy.probs.rows(),
                                       policy.probs.cols(), mdp.n_states(), mdp.n_actions()));
}

void check_state_vector(const TabularMdp& mdp, std::span<const double> v, const char* what) {
    if (v.size() != mdp.n_states())
        throw InvalidInput(fmt::format("{} has {} entries, MDP has {} states", what, v.size(), mdp.n_states()));
}

Eigen::MatrixXd resolvent(const TabularMdp& mdp, const PolicyDistribution& policy) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    const Table pp = policy_transition(mdp, policy);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) -= mdp.discount() * pp(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return m;
}

}  // namespace

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, Table reward, numvec transition,
                       double discount, numvec initial_dist)
    : n_states_(n_states),
      n_actions_(n_actions),
      reward_(std::move(reward)),
      transition_(std::move(transition)),
      discount_(discount),
      initial_(std::move(initial_dist)) {
    if (n_states_ == 0 || n_actions_ == 0) throw InvalidInput("MDP needs at least one state and one action");
    if (reward_.rows() != n_states_ || reward_.cols() != n_actions_)
        throw InvalidInput(fmt::format("reward table is {}x{}, expected {}x{}", reward_.rows(), reward_.cols(),
                                       n_states_, n_actions_));
    if (transition_.size() != n_states_ * n_actions_ * n_states_)
        throw InvalidInput(fmt::format("transition table has {} entries, expected {}", transition_.size(),
                                       n_states_ * n_actions_ * n_states_));
    if (initial_.size() != n_states_)
        throw InvalidInput(fmt::format("initial distribution has {} entries, expected {}", initial_.size(),
                                       n_states_));
}

TabularMdp TabularMdp::with_discount(double discount) const {
    TabularMdp copy = *this;
    copy.discount_ = discount;
    return copy;
}

std::string ValidationReport::to_string() const {
    if (ok()) return "valid";
    std::string out;
    for (const auto& v : violations) {
        out += v;
        out += '\n';
    }
    return out;
}

ValidationReport validate(const TabularMdp& mdp) {
    ValidationReport report;
    auto& out = report.violations;

    if (!(mdp.discount() >= 0.0 && mdp.discount() < 1.0))
        out.push_back(fmt::format("discount {} outside [0, 1)", mdp.discount()));

    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double r = mdp.reward(s, a);
            if (!(r >= 0.0 && r <= 1.0))
                out.push_back(fmt::format("reward({}, {}) = {} outside [0, 1]", s, a, r));

            const auto row = mdp.transition(s, a);
            double sum = 0.0;
            for (std::size_t sn = 0; sn < row.size(); ++sn) {
                if (!(row[sn] >= 0.0))
                    out.push_back(fmt::format("transition({}, {})[{}] = {} is negative", s, a, sn, row[sn]));
                sum += row[sn];
            }
            if (!(std::abs(sum - 1.0) <= kProbTol))
                out.push_back(fmt::format("transition({}, {}) sums to {:.17g}, not 1", s, a, sum));
        }
    }

    double sum = 0.0;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const double p = mdp.initial_dist()[s];
        if (!(p >= 0.0)) out.push_back(fmt::format("initial_dist[{}] = {} is negative", s, p));
        sum += p;
    }
    if (!(std::abs(sum - 1.0) <= kProbTol))
        out.push_back(fmt::format("initial_dist sums to {:.17g}, not 1", sum));
    return report;
}

void require_valid(const TabularMdp& mdp) {
    const auto report = validate(mdp);
    if (!report.ok()) throw InvalidInput("invalid MDP:\n" + report.to_string());
}

PolicyDistribution softmax_policy(const PolicyParams& params) {
    const Table& logits = params.logits;
    if (!logits.all_finite()) throw InvalidInput("softmax_policy: non-finite logit");
    PolicyDistribution out{Table(logits.rows(), logits.cols())};
    for (std::size_t s = 0; s < logits.rows(); ++s) {
        const auto in = logits.row(s);
        auto p = out.probs.row(s);
        const double m = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (std::size_t a = 0; a < in.size(); ++a) {
            p[a] = std::exp(in[a] - m);
            z += p[a];
        }
        for (double& x : p) x /= z;
    }
    return out;
}

numvec policy_reward(const TabularMdp& mdp, const PolicyDistribution& policy) {
    check_policy_shape(mdp, policy);
    numvec r(mdp.n_states(), 0.0);
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) r[s] += policy.probs(s, a) * mdp.reward(s, a);
    return r;
}

Table policy_transition(const TabularMdp& mdp, const PolicyDistribution& policy) {
    check_policy_shape(mdp, policy);
    Table pp(mdp.n_states(), mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double w = policy.probs(s, a);
            const auto row = mdp.transition(s, a);
            for (std::size_t sn = 0; sn < mdp.n_states(); ++sn) pp(s, sn) += w * row[sn];
        }
    }
    return pp;
}

numvec policy_evaluation(const TabularMdp& mdp, const PolicyDistribution& policy) {
    check_policy_shape(mdp, policy);
    const numvec r = policy_reward(mdp, policy);
    if (mdp.discount() == 0.0) return r;

    const Eigen::MatrixXd m = resolvent(mdp, policy);
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    const Eigen::VectorXd v = m.partialPivLu().solve(rhs);
    return numvec(v.data(), v.data() + v.size());
}

Table action_values(const TabularMdp& mdp, std::span<const double> state_values) {
    check_state_vector(mdp, state_values, "state_values");
    Table q(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const auto row = mdp.transition(s, a);
            double next = 0.0;
            for (std::size_t sn = 0; sn < mdp.n_states(); ++sn) next += row[sn] * state_values[sn];
            q(s, a) = mdp.reward(s, a) + mdp.discount() * next;
        }
    }
    return q;
}

numvec visitation_distribution(const TabularMdp& mdp, const PolicyDistribution& policy,
                               std::span<const double> start) {
    check_policy_shape(mdp, policy);
    check_state_vector(mdp, start, "start distribution");
    if (mdp.discount() == 0.0) return numvec(start.begin(), start.end());

    const Eigen::MatrixXd m = resolvent(mdp, policy);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(start.size()));
    for (std::size_t s = 0; s < start.size(); ++s)
        rhs(static_cast<Eigen::Index>(s)) = (1.0 - mdp.discount()) * start[s];
    const Eigen::VectorXd d = m.transpose().partialPivLu().solve(rhs);

    numvec out(d.size());
    // Unreachable states can come back as -1e-17 or so.
    for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, d(i));
    return out;
}

double objective(const TabularMdp& mdp, std::span<const double> state_values, std::span<const double> start) {
    check_state_vector(mdp, state_values, "state_values");
    check_state_vector(mdp, start, "start distribution");
    return std::inner_product(start.begin(), start.end(), state_values.begin(), 0.0);
}

EvaluationBundle evaluate(const TabularMdp& mdp, const PolicyDistribution& policy, std::span<const double> start) {
    EvaluationBundle b;
    b.state_values = policy_evaluation(mdp, policy);
    b.action_values = action_values(mdp, b.state_values);
    b.advantages = b.action_values;
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (double& x : b.advantages.row(s)) x -= b.state_values[s];
    b.visitation = visitation_distribution(mdp, policy, start);
    return b;
}

double objective_at(const TabularMdp& mdp, const PolicyParams& params, std::span<const double> start) {
    return objective(mdp, policy_evaluation(mdp, softmax_policy(params)), start);
}

OptimalSolution optimal_values(const TabularMdp& mdp, double tol, long max_sweeps) {
    if (!(tol > 0.0)) throw InvalidInput(fmt::format("optimal_values: tol must be positive, got {}", tol));
    const double gamma = mdp.discount();
    const double stop = gamma == 0.0 ? 0.0 : tol * (1.0 - gamma) / (2.0 * gamma);

    OptimalSolution sol;
    numvec v(mdp.n_states(), 0.0);
    numvec next(mdp.n_states());
    for (;;) {
        if (sol.sweeps >= max_sweeps)
            throw NumericalFailure(fmt::format("value iteration did not converge in {} sweeps", max_sweeps),
                                   sol.sweeps);
        const Table q = action_values(mdp, v);
        double change = 0.0;
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            const auto row = q.row(s);
            next[s] = *std::max_element(row.begin(), row.end());
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        ++sol.sweeps;
        if (gamma == 0.0 || change <= stop) break;
    }

    const Table q = action_values(mdp, v);
    sol.greedy_policy.resize(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < mdp.n_actions(); ++a)
            if (q(s, a) > q(s, best)) best = a;
        sol.greedy_policy[s] = best;
    }
    sol.values = std::move(v);
    return sol;
}

TabularMdp bandit_as_mdp(const numvec& rewards) {
    if (rewards.empty()) throw InvalidInput("bandit_as_mdp: empty reward list");
    for (std::size_t a = 0; a < rewards.size(); ++a)
        if (!(rewards[a] >= 0.0 && rewards[a] <= 1.0))
            throw InvalidInput(fmt::format("bandit_as_mdp: reward[{}] = {} outside [0, 1]", a, rewards[a]));
    Table reward(1, rewards.size());
    std::copy(rewards.begin(), rewards.end(), reward.row(0).begin());
    return TabularMdp(1, rewards.size(), std::move(reward), numvec(rewards.size(), 1.0), 0.0, numvec{1.0});
}

}  // namespace spgnm
