#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/rng.hpp"
#include "socsense/social_learning.hpp"

namespace socsense {

/// Information-flow DAG. Node ids are 0-based and edges only run from a
/// lower to a higher id, so the graph is acyclic by construction. Nodes are
/// append-only; with S agents, node n belongs to agent n mod S at epoch
/// n / S unless explicit labels are given.
class FlowDag {
public:
    FlowDag() = default;

    explicit FlowDag(int node_count) {
        detail::require(node_count >= 0, "node count must be nonnegative");
        for (int i = 0; i < node_count; ++i) add_node(0, i);
    }

    FlowDag(int node_count, std::span<const std::pair<int, int>> edges) : FlowDag(node_count) {
        for (auto [j, i] : edges) add_edge(j, i);
    }

    int add_node(int agent, int epoch, std::span<const int> predecessors = {}) {
        const int id = node_count();
        preds_.emplace_back();
        agent_.push_back(agent);
        epoch_.push_back(epoch);
        for (int j : predecessors) add_edge(j, id);
        return id;
    }

    void add_edge(int j, int i) {
        if (i < 0 || i >= node_count() || j < 0)
            throw InvalidArgument("edge (" + std::to_string(j) + ", " + std::to_string(i) + ") references an unknown node");
        if (j >= i)
            throw InvalidArgument("edge (" + std::to_string(j) + ", " + std::to_string(i) +
                                  ") must run from a lower to a higher node id");
        auto& p = preds_[i];
        const auto it = std::lower_bound(p.begin(), p.end(), j);
        if (it != p.end() && *it == j)
            throw InvalidArgument("duplicate edge (" + std::to_string(j) + ", " + std::to_string(i) + ")");
        p.insert(it, j);
    }

    int node_count() const { return static_cast<int>(preds_.size()); }
    int agent(int n) const { return agent_.at(n); }
    int epoch(int n) const { return epoch_.at(n); }

    /// H_n: nodes with a direct edge into n.
    std::span<const int> predecessors(int n) const { return preds_.at(n); }

    bool has_edge(int j, int i) const {
        if (i < 0 || i >= node_count()) return false;
        return std::binary_search(preds_[i].begin(), preds_[i].end(), j);
    }

    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int i = 0; i < node_count(); ++i)
            for (int j : preds_[i]) out.emplace_back(j, i);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// The first n nodes and the edges among them.
    FlowDag prefix(int n) const {
        FlowDag d;
        for (int i = 0; i < n; ++i) d.add_node(agent_[i], epoch_[i], preds_[i]);
        return d;
    }

private:
    std::vector<std::vector<int>> preds_;
    std::vector<int> agent_;
    std::vector<int> epoch_;
};

/// Reachability matrix T(i, j) = 1 iff a directed path i -> j exists (the
/// diagonal is 1).
class ClosureMatrix {
public:
    explicit ClosureMatrix(int n = 0) : n_(n), words_((n + 63) / 64), bits_(static_cast<std::size_t>(n) * words_, 0) {
        for (int i = 0; i < n; ++i) set(i, i);
    }

    int size() const { return n_; }
    bool operator()(int i, int j) const { return (row(i)[j >> 6] >> (j & 63)) & 1U; }
    void set(int i, int j) { bits_[static_cast<std::size_t>(i) * words_ + (j >> 6)] |= std::uint64_t{1} << (j & 63); }

    void or_row(int dst, int src) {
        for (int w = 0; w < words_; ++w) bits_[static_cast<std::size_t>(dst) * words_ + w] |= row(src)[w];
    }

    friend bool operator==(const ClosureMatrix&, const ClosureMatrix&) = default;

private:
    const std::uint64_t* row(int i) const { return bits_.data() + static_cast<std::size_t>(i) * words_; }

    int n_;
    int words_;
    std::vector<std::uint64_t> bits_;
};

/// Boolean Warshall closure.
inline ClosureMatrix closure(const FlowDag& dag) {
    const int n = dag.node_count();
    ClosureMatrix t(n);
    for (int i = 0; i < n; ++i)
        for (int j : dag.predecessors(i)) t.set(j, i);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (i != k && t(i, k)) t.or_row(i, k);
    return t;
}

struct NeighborSets {
    std::vector<int> history;  ///< H_n: direct predecessors
    std::vector<int> full;     ///< F_n: every m < n with a path m -> n
};

inline NeighborSets neighbor_sets(const FlowDag& dag, const ClosureMatrix& t, int n) {
    detail::require(n >= 0 && n < dag.node_count(), "node out of range");
    NeighborSets s;
    s.history.assign(dag.predecessors(n).begin(), dag.predecessors(n).end());
    for (int m = 0; m < n; ++m)
        if (t(m, n)) s.full.push_back(m);
    return s;
}

inline NeighborSets neighbor_sets(const FlowDag& dag, int n) { return neighbor_sets(dag, closure(dag), n); }

/// Solution of T_{n-1} w = t_n over nodes 0..n-1 (node n excluded).
struct IncestWeights {
    std::vector<double> w;
    std::vector<std::int64_t> exact;  ///< filled when the integer solve did not overflow
    bool is_exact = false;
};

/// Back substitution on the unit upper triangular closure. Exact in int64
/// unless an intermediate overflows, in which case it is redone in double.
inline IncestWeights incest_weights(const ClosureMatrix& t, int n) {
    detail::require(n >= 1 && n < t.size(), "weights need a node with at least one earlier node");
    IncestWeights out;
    out.exact.assign(static_cast<std::size_t>(n), 0);
    bool overflow = false;
    for (int i = n - 1; i >= 0 && !overflow; --i) {
        std::int64_t v = t(i, n) ? 1 : 0;
        for (int j = i + 1; j < n; ++j)
            if (t(i, j) && __builtin_sub_overflow(v, out.exact[j], &v)) {
                overflow = true;
                break;
            }
        out.exact[i] = v;
    }
    out.w.assign(static_cast<std::size_t>(n), 0.0);
    if (!overflow) {
        out.is_exact = true;
        for (int i = 0; i < n; ++i) out.w[i] = static_cast<double>(out.exact[i]);
        return out;
    }
    out.exact.clear();
    for (int i = n - 1; i >= 0; --i) {
        double v = t(i, n) ? 1.0 : 0.0;
        for (int j = i + 1; j < n; ++j)
            if (t(i, j)) v -= out.w[j];
        out.w[i] = v;
    }
    return out;
}

inline IncestWeights incest_weights(const FlowDag& dag, int n) { return incest_weights(closure(dag), n); }

/// Fair rating is achievable at n iff every node with nonzero weight is a
/// direct predecessor of n.
struct Achievability {
    bool achievable = true;
    std::vector<int> violators;
};

inline Achievability achievable(const FlowDag& dag, const IncestWeights& w, int n) {
    Achievability a;
    for (int j = 0; j < static_cast<int>(w.w.size()); ++j)
        if (std::abs(w.w[j]) > 1e-9 && !dag.has_edge(j, n)) a.violators.push_back(j);
    a.achievable = a.violators.empty();
    return a;
}

inline Achievability achievable(const FlowDag& dag, int n) {
    if (n == 0) return {};
    return achievable(dag, incest_weights(dag, n), n);
}

class NotAchievable : public Error {
public:
    NotAchievable(int node, std::vector<int> violators)
        : Error(message(node, violators)), node_(node), violators_(std::move(violators)) {}
    int node() const noexcept { return node_; }
    const std::vector<int>& violators() const noexcept { return violators_; }
    const char* kind() const noexcept override { return "not_achievable"; }

private:
    static std::string message(int node, const std::vector<int>& v) {
        std::string s = "fair rating not achievable at node " + std::to_string(node) + "; nodes without a direct edge: ";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    }

    int node_;
    std::vector<int> violators_;
};

using LogBelief = std::vector<double>;

namespace detail {

inline void accumulate_log(LogBelief& acc, const LogBelief& l, double w) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    if (w == 0.0) return;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (l[i] == ninf || acc[i] == ninf) acc[i] = ninf;  // a zero coordinate stays zero
        else acc[i] += w * l[i];
    }
}

} // namespace detail

/// sum_m w(m) l_m, coordinatewise.
inline LogBelief fair_rating(std::span<const LogBelief> log_beliefs, std::span<const double> w) {
    detail::require(log_beliefs.size() == w.size(), "one weight per log belief is required");
    detail::require(!log_beliefs.empty(), "no beliefs to combine");
    LogBelief acc(log_beliefs[0].size(), 0.0);
    for (std::size_t m = 0; m < w.size(); ++m) {
        detail::require(log_beliefs[m].size() == acc.size(), "log beliefs differ in length");
        detail::accumulate_log(acc, log_beliefs[m], w[m]);
    }
    return acc;
}

/// Same, with the prior counted exactly once: adds (1 - sum w) log pi_0.
/// Needed whenever the prior is not uniform, because every l_m already
/// contains it.
inline LogBelief fair_rating(std::span<const LogBelief> log_beliefs, std::span<const double> w,
                             const LogBelief& log_prior) {
    LogBelief acc = log_beliefs.empty() ? LogBelief(log_prior.size(), 0.0) : fair_rating(log_beliefs, w);
    double total = 0.0;
    for (double x : w) total += x;
    detail::require(log_prior.size() == acc.size(), "prior length differs from beliefs");
    detail::accumulate_log(acc, log_prior, 1.0 - total);
    return acc;
}

inline Belief normalize_log_belief(const LogBelief& l) {
    Belief out;
    if (!detail::normalize_log(l, out)) throw InvalidArgument("log belief has no finite coordinate");
    return out;
}

/// Product of the given beliefs, renormalized. This double counts shared
/// information and is kept only as a baseline.
inline Belief naive_fusion(std::span<const Belief> beliefs) {
    detail::require(!beliefs.empty(), "no beliefs to fuse");
    std::vector<double> logs(beliefs[0].size(), 0.0);
    for (const auto& b : beliefs) {
        detail::require(b.size() == logs.size(), "beliefs differ in length");
        for (std::size_t i = 0; i < logs.size(); ++i) logs[i] += detail::safe_log(b[i]);
    }
    Belief out;
    if (!detail::normalize_log(logs, out)) throw InvalidArgument("fused beliefs have disjoint support");
    return out;
}

enum class FusionMode { fair, naive };

struct ReputationRun {
    std::vector<int> observations;
    std::vector<int> actions;
    std::vector<Belief> prior_beliefs;   ///< pi_{n-}: fused belief before the private observation
    std::vector<Belief> public_beliefs;  ///< pi_n: belief broadcast after the action
};

/// Every node observes y_n ~ B[x], fuses its predecessors' public beliefs,
/// acts myopically and broadcasts the action-updated public belief.
inline ReputationRun simulate_reputation(const FlowDag& dag, const ObservationModel& model, const CostMatrix& costs,
                                         const Belief& prior, int true_state, FusionMode mode, std::uint64_t seed) {
    model.validate();
    costs.validate();
    detail::check_belief(prior, model.state_count());
    detail::require(true_state >= 0 && true_state < model.state_count(), "true state out of range");
    const int n = dag.node_count();
    const auto t = closure(dag);
    std::vector<IncestWeights> weights(static_cast<std::size_t>(n));
    if (mode == FusionMode::fair)
        for (int i = 1; i < n; ++i) {
            weights[i] = incest_weights(t, i);
            auto a = achievable(dag, weights[i], i);
            if (!a.achievable) throw NotAchievable(i, std::move(a.violators));
        }

    LogBelief log_prior(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) log_prior[i] = detail::safe_log(prior[i]);
    Rng rng = Rng(seed).child("incest.observations");
    ReputationRun run;
    std::vector<LogBelief> logs;
    for (int i = 0; i < n; ++i) {
        const auto preds = dag.predecessors(i);
        Belief fused;
        if (preds.empty()) {
            fused = prior;
        } else if (mode == FusionMode::naive) {
            std::vector<Belief> in;
            for (int j : preds) in.push_back(run.public_beliefs[j]);
            fused = naive_fusion(in);
        } else {
            std::vector<LogBelief> in;
            std::vector<double> w;
            for (int j : preds) {
                in.push_back(logs[j]);
                w.push_back(weights[i].w[j]);
            }
            fused = normalize_log_belief(fair_rating(in, w, log_prior));
        }
        const int y = static_cast<int>(rng.categorical(model.b[true_state]));
        const int a = myopic_action(private_belief(fused, model, y), costs);
        Belief pub = social_learning_filter(fused, a, model, costs);
        LogBelief l(pub.size());
        for (std::size_t k = 0; k < pub.size(); ++k) l[k] = detail::safe_log(pub[k]);
        logs.push_back(std::move(l));
        run.observations.push_back(y);
        run.actions.push_back(a);
        run.prior_beliefs.push_back(std::move(fused));
        run.public_beliefs.push_back(std::move(pub));
    }
    return run;
}

/// Directed graph from an S-agent, K-epoch reindexing: node s + S k (0-based
/// agent s, epoch k).
inline FlowDag agent_epoch_dag(int agents, int epochs, std::span<const std::pair<int, int>> edges) {
    detail::require(agents >= 1 && epochs >= 1, "need at least one agent and one epoch");
    FlowDag dag;
    for (int k = 0; k < epochs; ++k)
        for (int s = 0; s < agents; ++s) dag.add_node(s, k);
    for (auto [j, i] : edges) dag.add_edge(j, i);
    return dag;
}

} // namespace socsense
