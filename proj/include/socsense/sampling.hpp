#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/network.hpp"
#include "socsense/rng.hpp"

namespace socsense {

/// Empirical distribution of node values y = 1..Y. pmf[y - 1] is the mass
/// on value y.
struct SentimentEstimate {
    std::vector<double> pmf;
    int sample_count = 0;
};

namespace detail {

inline int value_count(std::span<const int> values, int node_count) {
    if (static_cast<int>(values.size()) != node_count)
        throw InvalidArgument("node value vector length " + std::to_string(values.size()) +
                              " differs from node count " + std::to_string(node_count));
    int y_max = 0;
    for (int y : values) {
        require(y >= 1, "node values must be integers >= 1");
        y_max = std::max(y_max, y);
    }
    return y_max;
}

inline void normalize(std::vector<double>& p) {
    double s = 0.0;
    for (double x : p) s += x;
    if (s > 0.0)
        for (double& x : p) x /= s;
}

} // namespace detail

/// Exact value distribution over `nodes` (the census).
inline std::vector<double> census_pmf(std::span<const int> values, std::span<const int> nodes, int value_count) {
    std::vector<double> p(static_cast<std::size_t>(value_count), 0.0);
    for (int m : nodes) p[values[m] - 1] += 1.0;
    detail::normalize(p);
    return p;
}

inline std::vector<int> nodes_with_degree(const Graph& graph, int d) {
    std::vector<int> out;
    for (int m = 0; m < graph.node_count(); ++m)
        if (graph.degree(m) == d) out.push_back(m);
    return out;
}

inline std::vector<int> all_nodes(const Graph& graph) {
    std::vector<int> out(static_cast<std::size_t>(graph.node_count()));
    for (int m = 0; m < graph.node_count(); ++m) out[m] = m;
    return out;
}

/// I.i.d. draws with replacement from the degree-d class.
inline SentimentEstimate uniform_sample(const Graph& graph, std::span<const int> values, int degree,
                                        int sample_size, std::uint64_t seed) {
    const int y_count = detail::value_count(values, graph.node_count());
    detail::require(sample_size >= 1, "sample size must be at least 1");
    const auto pool = nodes_with_degree(graph, degree);
    if (pool.empty()) throw InvalidArgument("no nodes of degree " + std::to_string(degree));
    Rng rng = Rng(seed).child("sampling.uniform");
    SentimentEstimate est{std::vector<double>(static_cast<std::size_t>(y_count), 0.0), sample_size};
    for (int i = 0; i < sample_size; ++i) est.pmf[values[pool[rng.below(pool.size())]] - 1] += 1.0;
    for (double& p : est.pmf) p /= sample_size;
    return est;
}

/// Degree-corrected neighbourhood polling. Each respondent is a uniformly
/// random edge endpoint (so degree-proportional) and reports its neighbours'
/// values, each weighted by 1/d(n) and scaled by 1/d(m); the estimate is the
/// ratio of the summed reports to the summed weights, which is unbiased for
/// the population value distribution.
inline SentimentEstimate social_sample(const Graph& graph, std::span<const int> values, int sample_size,
                                       std::uint64_t seed) {
    const int y_count = detail::value_count(values, graph.node_count());
    detail::require(sample_size >= 1, "sample size must be at least 1");
    if (graph.node_count() == 0 || graph.edge_count() == 0) throw InvalidArgument("empty graph");
    for (int m = 0; m < graph.node_count(); ++m)
        if (graph.degree(m) == 0)
            throw InvalidArgument("node " + std::to_string(m) + " has degree 0 and can never be polled");

    std::vector<int> endpoints;
    endpoints.reserve(2 * graph.edge_count());
    for (int m = 0; m < graph.node_count(); ++m)
        for (int i = 0; i < graph.degree(m); ++i) endpoints.push_back(m);

    Rng rng = Rng(seed).child("sampling.social");
    std::vector<double> mass(static_cast<std::size_t>(y_count), 0.0);
    for (int i = 0; i < sample_size; ++i) {
        const int m = endpoints[rng.below(endpoints.size())];
        const double scale = 1.0 / graph.degree(m);
        for (int n : graph.neighbors(m)) mass[values[n] - 1] += scale / graph.degree(n);
    }
    detail::normalize(mass);
    return {std::move(mass), sample_size};
}

struct WalkConfig {
    /// Undirected edge weights (u, v, w); edges not listed weigh 1.
    std::vector<std::tuple<int, int, double>> edge_weights;
    int walk_length = 10000;
    std::optional<int> burn_in;     ///< default walk_length / 10
    std::optional<int> start_node;  ///< default: uniform over the population
};

/// Reversible recruitment walk on the subgraph induced by a node population:
/// P(m -> n) = w(m,n) / sum_n' w(m,n'), stationary pi(m) = sum_n w(m,n) / sum w.
class RecruitmentWalk {
public:
    RecruitmentWalk(const Graph& graph, std::vector<int> population,
                    std::span<const std::tuple<int, int, double>> weights = {})
        : nodes_(std::move(population)) {
        const int n = graph.node_count();
        local_.assign(static_cast<std::size_t>(n), -1);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            detail::require(nodes_[i] >= 0 && nodes_[i] < n, "population node out of range");
            detail::require(local_[nodes_[i]] < 0, "population node listed twice");
            local_[nodes_[i]] = static_cast<int>(i);
        }
        offsets_.push_back(0);
        for (int m : nodes_) {
            for (int v : graph.neighbors(m))
                if (local_[v] >= 0) {
                    adj_.push_back(local_[v]);
                    w_.push_back(1.0);
                }
            offsets_.push_back(static_cast<int>(adj_.size()));
        }
        std::vector<char> set(w_.size(), 0);
        for (auto [u, v, w] : weights) {
            detail::require(u >= 0 && u < n && v >= 0 && v < n, "weighted edge endpoint out of range");
            if (!graph.has_edge(u, v))
                throw InvalidArgument("weight given for non-edge (" + std::to_string(u) + ", " +
                                      std::to_string(v) + ")");
            detail::require(w > 0.0, "edge weights must be positive");
            if (local_[u] < 0 || local_[v] < 0) continue;
            for (auto [a, b] : {std::pair{local_[u], local_[v]}, std::pair{local_[v], local_[u]}}) {
                const auto k = slot(a, b);
                if (set[k] && w_[k] != w)
                    throw InvalidArgument("asymmetric weights on edge (" + std::to_string(u) + ", " +
                                          std::to_string(v) + ")");
                w_[k] = w;
                set[k] = 1;
            }
        }
        check_ergodic();
        strength_.assign(nodes_.size(), 0.0);
        total_ = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) strength_[i] += w_[k];
            total_ += strength_[i];
        }
        if (!(total_ > 0.0)) throw InvalidArgument("zero total edge weight");
    }

    std::span<const int> population() const { return nodes_; }

    /// Stationary probability of population member i (local index).
    double stationary(int i) const { return strength_[i] / total_; }

    /// Transition probability between local indices.
    double transition(int i, int j) const {
        for (int k = offsets_[i]; k < offsets_[i + 1]; ++k)
            if (adj_[k] == j) return w_[k] / strength_[i];
        return 0.0;
    }

    int local_index(int node) const { return node >= 0 && node < static_cast<int>(local_.size()) ? local_[node] : -1; }

    int step(int i, Rng& rng) const {
        double r = rng.uniform() * strength_[i];
        for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            if (r < w_[k]) return adj_[k];
            r -= w_[k];
        }
        return adj_[offsets_[i + 1] - 1];
    }

private:
    std::size_t slot(int i, int j) const {
        for (int k = offsets_[i]; k < offsets_[i + 1]; ++k)
            if (adj_[k] == j) return static_cast<std::size_t>(k);
        throw InvalidArgument("edge missing from walk support");
    }

    // BFS with 2-colouring: the walk must be irreducible and aperiodic
    void check_ergodic() const {
        const auto n = nodes_.size();
        if (n == 0) throw InvalidArgument("walk population is empty");
        if (adj_.empty()) throw InvalidArgument("walk population has no internal edges");
        std::vector<int> colour(n, -1);
        std::queue<int> q;
        colour[0] = 0;
        q.push(0);
        std::size_t seen = 1;
        bool odd_cycle = false;
        while (!q.empty()) {
            const int i = q.front();
            q.pop();
            for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
                const int j = adj_[k];
                if (colour[j] < 0) {
                    colour[j] = 1 - colour[i];
                    ++seen;
                    q.push(j);
                } else if (colour[j] == colour[i]) {
                    odd_cycle = true;
                }
            }
        }
        if (seen != n)
            throw InvalidArgument("walk population is disconnected (" + std::to_string(seen) + " of " +
                                  std::to_string(n) + " nodes reachable)");
        if (!odd_cycle) throw InvalidArgument("walk population is bipartite, so the walk is periodic");
    }

    std::vector<int> nodes_;
    std::vector<int> local_;
    std::vector<int> offsets_;
    std::vector<int> adj_;
    std::vector<double> w_;
    std::vector<double> strength_;
    double total_ = 0.0;
};

namespace detail {

// visits walk states after burn-in, passing the weight 1/pi(m)
template <class Visit>
void run_walk(const RecruitmentWalk& walk, const WalkConfig& cfg, std::uint64_t seed, Visit&& visit) {
    require(cfg.walk_length >= 1, "walk length must be at least 1");
    const int burn = cfg.burn_in.value_or(cfg.walk_length / 10);
    require(burn >= 0 && burn < cfg.walk_length, "burn-in must lie in [0, walk_length)");
    Rng rng = Rng(seed).child("sampling.rds");
    int cur;
    if (cfg.start_node) {
        cur = walk.local_index(*cfg.start_node);
        if (cur < 0) throw InvalidArgument("start node " + std::to_string(*cfg.start_node) + " is not in the walk population");
    } else {
        cur = static_cast<int>(rng.below(walk.population().size()));
    }
    for (int l = 0; l < cfg.walk_length; ++l) {
        cur = walk.step(cur, rng);
        if (l >= burn) visit(walk.population()[cur], 1.0 / walk.stationary(cur));
    }
}

inline std::vector<int> rds_population(const Graph& graph, std::optional<int> degree) {
    if (!degree) return all_nodes(graph);
    auto pool = nodes_with_degree(graph, *degree);
    if (pool.empty()) throw InvalidArgument("no nodes of degree " + std::to_string(*degree));
    return pool;
}

} // namespace detail

/// Ratio estimate of the fraction of the population with value y from the
/// recruitment walk. The population is the degree class `degree`, or the
/// whole graph when it is empty.
inline double rds_estimate(const Graph& graph, std::span<const int> values, std::optional<int> degree,
                           const WalkConfig& cfg, int y, std::uint64_t seed) {
    detail::value_count(values, graph.node_count());
    const RecruitmentWalk walk(graph, detail::rds_population(graph, degree), cfg.edge_weights);
    double num = 0.0, den = 0.0;
    detail::run_walk(walk, cfg, seed, [&](int m, double inv_pi) {
        den += inv_pi;
        if (values[m] == y) num += inv_pi;
    });
    return num / den;
}

/// Same estimator applied to every value at once.
inline SentimentEstimate rds_pmf(const Graph& graph, std::span<const int> values, std::optional<int> degree,
                                 const WalkConfig& cfg, std::uint64_t seed) {
    const int y_count = detail::value_count(values, graph.node_count());
    const RecruitmentWalk walk(graph, detail::rds_population(graph, degree), cfg.edge_weights);
    std::vector<double> mass(static_cast<std::size_t>(y_count), 0.0);
    int used = 0;
    detail::run_walk(walk, cfg, seed, [&](int m, double inv_pi) {
        mass[values[m] - 1] += inv_pi;
        ++used;
    });
    detail::normalize(mass);
    return {std::move(mass), used};
}

} // namespace socsense
