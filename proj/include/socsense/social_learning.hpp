#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/rng.hpp"

namespace socsense {

using Belief = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;

/// Observation likelihoods B[i][y] = P(y | x = i).
struct ObservationModel {
    Matrix b;

    int state_count() const { return static_cast<int>(b.size()); }
    int observation_count() const { return b.empty() ? 0 : static_cast<int>(b[0].size()); }

    void validate() const {
        detail::require(!b.empty() && !b[0].empty(), "observation matrix is empty");
        for (const auto& row : b) {
            detail::require(row.size() == b[0].size(), "observation matrix rows differ in length");
            double s = 0.0;
            for (double p : row) {
                detail::require(p >= 0.0, "negative observation probability");
                s += p;
            }
            detail::require(std::abs(s - 1.0) <= 1e-12, "observation matrix row does not sum to 1");
        }
    }
};

/// Costs c[i][a] of action a in state i.
struct CostMatrix {
    Matrix c;

    int state_count() const { return static_cast<int>(c.size()); }
    int action_count() const { return c.empty() ? 0 : static_cast<int>(c[0].size()); }

    void validate() const {
        detail::require(!c.empty() && !c[0].empty(), "cost matrix is empty");
        for (const auto& row : c) {
            detail::require(row.size() == c[0].size(), "cost matrix rows differ in length");
            for (double v : row) detail::require(std::isfinite(v), "cost matrix entries must be finite");
        }
    }
};

/// Action chosen by the policy is not the observed one under any observation.
class InconsistentAction : public Error {
public:
    explicit InconsistentAction(int action)
        : Error("action " + std::to_string(action) + " has zero probability under the current public belief"),
          action_(action) {}
    int action() const noexcept { return action_; }
    const char* kind() const noexcept override { return "inconsistent_action"; }

private:
    int action_;
};

namespace detail {

inline void check_belief(const Belief& p, int states) {
    require(static_cast<int>(p.size()) == states, "belief length differs from state count");
    double s = 0.0;
    for (double v : p) {
        require(v >= 0.0, "belief has a negative entry");
        s += v;
    }
    require(std::abs(s - 1.0) <= 1e-10, "belief does not sum to 1");
}

// normalizes exp(logs); returns false if every entry is -inf
inline bool normalize_log(const std::vector<double>& logs, Belief& out) {
    const double m = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(m)) return false;
    out.resize(logs.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) s += out[i] = std::exp(logs[i] - m);
    for (double& v : out) v /= s;
    return true;
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

} // namespace detail

/// eta(i) proportional to B[i][y] pi(i).
inline Belief private_belief(const Belief& pub, const ObservationModel& model, int y) {
    detail::check_belief(pub, model.state_count());
    detail::require(y >= 0 && y < model.observation_count(), "observation index out of range");
    std::vector<double> logs(pub.size());
    for (std::size_t i = 0; i < pub.size(); ++i) logs[i] = detail::safe_log(pub[i]) + detail::safe_log(model.b[i][y]);
    Belief eta;
    if (!detail::normalize_log(logs, eta))
        throw InvalidArgument("observation " + std::to_string(y) + " is impossible under the prior");
    return eta;
}

/// argmin_a sum_i c[i][a] eta(i); near-ties go to the smallest index.
inline int myopic_action(const Belief& eta, const CostMatrix& costs) {
    detail::require(static_cast<int>(eta.size()) == costs.state_count(), "belief length differs from cost rows");
    int best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int a = 0; a < costs.action_count(); ++a) {
        double v = 0.0;
        for (std::size_t i = 0; i < eta.size(); ++i) v += costs.c[i][a] * eta[i];
        if (a == 0 || v < best_cost - 1e-12 * (1.0 + std::abs(best_cost))) {
            best = a;
            best_cost = v;
        }
    }
    return best;
}

/// Action taken for each observation y from public belief pi.
inline std::vector<int> action_policy(const Belief& pub, const ObservationModel& model, const CostMatrix& costs) {
    std::vector<int> act(static_cast<std::size_t>(model.observation_count()), -1);
    for (int y = 0; y < model.observation_count(); ++y) {
        bool possible = false;
        for (std::size_t i = 0; i < pub.size(); ++i) possible = possible || (pub[i] > 0.0 && model.b[i][y] > 0.0);
        if (possible) act[y] = myopic_action(private_belief(pub, model, y), costs);
    }
    return act;
}

/// True when every possible observation leads to the same action, i.e. the
/// public belief can no longer move.
inline bool policy_is_constant(const std::vector<int>& policy) {
    int seen = -1;
    for (int a : policy) {
        if (a < 0) continue;
        if (seen >= 0 && a != seen) return false;
        seen = a;
    }
    return true;
}

/// Public belief update from an observed action.
inline Belief social_learning_filter(const Belief& pub, int action, const ObservationModel& model,
                                     const CostMatrix& costs) {
    model.validate();
    costs.validate();
    detail::check_belief(pub, model.state_count());
    detail::require(costs.state_count() == model.state_count(), "cost and observation state counts differ");
    detail::require(action >= 0 && action < costs.action_count(), "action index out of range");
    const auto policy = action_policy(pub, model, costs);
    bool any = false;
    for (int a : policy) any = any || a == action;
    if (!any) throw InconsistentAction(action);
    if (policy_is_constant(policy)) return pub;

    std::vector<double> logs(pub.size());
    for (std::size_t i = 0; i < pub.size(); ++i) {
        double r = 0.0;
        for (int y = 0; y < model.observation_count(); ++y)
            if (policy[y] == action) r += model.b[i][y];
        logs[i] = detail::safe_log(pub[i]) + detail::safe_log(r);
    }
    Belief out;
    if (!detail::normalize_log(logs, out)) throw InconsistentAction(action);
    return out;
}

struct ProtocolRun {
    std::vector<int> observations;      ///< y_1..y_H
    std::vector<int> actions;           ///< a_1..a_H
    std::vector<Belief> public_beliefs; ///< pi_0..pi_H
    std::optional<int> cascade_time;    ///< first k with a frozen pi_k
};

/// Agents act in sequence: private observation, myopic action, public
/// filter update. The state of nature is fixed.
inline ProtocolRun run_protocol(int true_state, const ObservationModel& model, const CostMatrix& costs,
                                const Belief& prior, int horizon, std::uint64_t seed) {
    model.validate();
    costs.validate();
    detail::require(horizon >= 1, "horizon must be at least 1");
    detail::require(true_state >= 0 && true_state < model.state_count(), "true state out of range");
    detail::require(costs.state_count() == model.state_count(), "cost and observation state counts differ");
    detail::check_belief(prior, model.state_count());
    Rng rng = Rng(seed).child("social_learning.observations");

    ProtocolRun run;
    run.public_beliefs.push_back(prior);
    for (int k = 0; k < horizon; ++k) {
        const Belief& pub = run.public_beliefs.back();
        const auto policy = action_policy(pub, model, costs);
        if (!run.cascade_time && policy_is_constant(policy)) run.cascade_time = k;
        const int y = static_cast<int>(rng.categorical(model.b[true_state]));
        const int a = myopic_action(private_belief(pub, model, y), costs);
        run.observations.push_back(y);
        run.actions.push_back(a);
        run.public_beliefs.push_back(social_learning_filter(pub, a, model, costs));
    }
    if (!run.cascade_time && policy_is_constant(action_policy(run.public_beliefs.back(), model, costs)))
        run.cascade_time = horizon;
    return run;
}

/// B[i+1][y] B[i][y+1] <= B[i][y] B[i+1][y+1] for all i, y.
inline bool is_tp2(const ObservationModel& model) {
    const auto& b = model.b;
    for (std::size_t i = 0; i + 1 < b.size(); ++i)
        for (std::size_t y = 0; y + 1 < b[i].size(); ++y)
            if (b[i + 1][y] * b[i][y + 1] > b[i][y] * b[i + 1][y + 1] + 1e-12) return false;
    return true;
}

/// c(x, a+1) - c(x, a) <= c(x+1, a+1) - c(x+1, a) for all x, a, evaluated
/// exactly as written (increasing differences in x).
inline bool is_submodular(const CostMatrix& costs) {
    const auto& c = costs.c;
    for (std::size_t x = 0; x + 1 < c.size(); ++x)
        for (std::size_t a = 0; a + 1 < c[x].size(); ++a)
            if (c[x][a + 1] - c[x][a] > c[x + 1][a + 1] - c[x + 1][a] + 1e-12) return false;
    return true;
}

/// c(x, a+1) - c(x, a) nonincreasing in x. Together with TP2 this makes
/// the myopic action nondecreasing in the observation.
inline bool has_decreasing_cost_differences(const CostMatrix& costs) {
    const auto& c = costs.c;
    for (std::size_t x = 0; x + 1 < c.size(); ++x)
        for (std::size_t a = 0; a + 1 < c[x].size(); ++a)
            if (c[x][a + 1] - c[x][a] < c[x + 1][a + 1] - c[x + 1][a] - 1e-12) return false;
    return true;
}

/// p_i / p_{i+1} <= q_i / q_{i+1} for all i, over the extended reals; a
/// 0/0 ratio imposes no constraint.
inline bool mlr_dominates(const Belief& p, const Belief& q) {
    detail::require(p.size() == q.size(), "beliefs differ in length");
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        if ((p[i] == 0.0 && p[i + 1] == 0.0) || (q[i] == 0.0 && q[i + 1] == 0.0)) continue;
        if (p[i] * q[i + 1] > q[i] * p[i + 1]) return false;
    }
    return true;
}

} // namespace socsense
