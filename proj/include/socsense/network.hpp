#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/rng.hpp"

namespace socsense {

/// Undirected simple graph on dense node ids 0..N-1, stored as sorted
/// neighbor lists. Immutable after construction.
class Graph {
public:
    Graph() = default;

    /// Builds from an undirected edge list (each edge listed once).
    /// Throws InvalidArgument on self-loops, duplicate edges or bad ids, and
    /// when a node degree exceeds `max_degree_cap`.
    Graph(int node_count, std::span<const std::pair<int, int>> edges,
          std::optional<int> max_degree_cap = std::nullopt)
        : node_count_(node_count) {
        detail::require(node_count > 0, "graph needs at least one node");
        std::vector<int> degree(static_cast<std::size_t>(node_count), 0);
        for (auto [u, v] : edges) {
            detail::require(u >= 0 && u < node_count && v >= 0 && v < node_count,
                            "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                ") references a node outside 0.." + std::to_string(node_count - 1));
            detail::require(u != v, "self-loop at node " + std::to_string(u));
            ++degree[static_cast<std::size_t>(u)];
            ++degree[static_cast<std::size_t>(v)];
        }
        offsets_.assign(static_cast<std::size_t>(node_count) + 1, 0);
        for (int m = 0; m < node_count; ++m) offsets_[m + 1] = offsets_[m] + degree[m];
        neighbors_.assign(static_cast<std::size_t>(offsets_.back()), 0);
        std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
        for (auto [u, v] : edges) {
            neighbors_[fill[u]++] = v;
            neighbors_[fill[v]++] = u;
        }
        int observed_max = 0;
        for (int m = 0; m < node_count; ++m) {
            auto first = neighbors_.begin() + offsets_[m];
            auto last = neighbors_.begin() + offsets_[m + 1];
            std::sort(first, last);
            if (std::adjacent_find(first, last) != last)
                throw InvalidArgument("duplicate edge at node " + std::to_string(m));
            observed_max = std::max(observed_max, degree[m]);
        }
        if (max_degree_cap) {
            detail::require(observed_max <= *max_degree_cap,
                            "node degree " + std::to_string(observed_max) + " exceeds cap " +
                                std::to_string(*max_degree_cap));
            max_degree_ = *max_degree_cap;
        } else {
            max_degree_ = observed_max;
        }
    }

    int node_count() const noexcept { return node_count_; }
    /// Declared degree bound; every node degree is at most this.
    int max_degree() const noexcept { return max_degree_; }
    std::size_t edge_count() const noexcept { return neighbors_.size() / 2; }

    int degree(int m) const { return offsets_[m + 1] - offsets_[m]; }

    std::span<const int> neighbors(int m) const {
        return {neighbors_.data() + offsets_[m], static_cast<std::size_t>(degree(m))};
    }

    bool has_edge(int u, int v) const {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    /// Edges with u < v in lexicographic order.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(edge_count());
        for (int u = 0; u < node_count_; ++u)
            for (int v : neighbors(u))
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.node_count_ == b.node_count_ && a.offsets_ == b.offsets_ &&
               a.neighbors_ == b.neighbors_;
    }

private:
    int node_count_ = 0;
    int max_degree_ = 0;
    std::vector<int> offsets_{0};
    std::vector<int> neighbors_;
};

/// Degree histogram N(d) and pmf P(d) = N(d)/N for d = 0..max_degree.
struct DegreeDistribution {
    std::vector<double> probabilities;
    std::vector<int> counts;
    int node_count = 0;

    int max_degree() const { return static_cast<int>(counts.size()) - 1; }
    double p(int d) const {
        return d >= 0 && d < static_cast<int>(probabilities.size()) ? probabilities[d] : 0.0;
    }
    int n(int d) const { return d >= 0 && d < static_cast<int>(counts.size()) ? counts[d] : 0; }
    double mean_degree() const {
        double s = 0.0;
        for (std::size_t d = 0; d < probabilities.size(); ++d) s += static_cast<double>(d) * probabilities[d];
        return s;
    }
};

inline DegreeDistribution degree_distribution(const Graph& graph) {
    DegreeDistribution dist;
    dist.node_count = graph.node_count();
    dist.counts.assign(static_cast<std::size_t>(graph.max_degree()) + 1, 0);
    for (int m = 0; m < graph.node_count(); ++m) ++dist.counts[graph.degree(m)];
    dist.probabilities.resize(dist.counts.size());
    for (std::size_t d = 0; d < dist.counts.size(); ++d)
        dist.probabilities[d] = static_cast<double>(dist.counts[d]) / graph.node_count();
    return dist;
}

/// Total-variation distance between two pmfs on 0..K (shorter one padded with zeros).
inline double total_variation(std::span<const double> p, std::span<const double> q) {
    const std::size_t n = std::max(p.size(), q.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        s += std::abs(a - b);
    }
    return 0.5 * s;
}

// --- generation ------------------------------------------------------------

struct ErdosRenyi {
    int node_count;
    double edge_probability;
    std::optional<int> max_degree;  ///< edges that would exceed the cap are skipped
};

/// Degrees drawn from P(d) proportional to d^-exponent on [min_degree, max_degree],
/// wired by the configuration model. The tail is truncated at max_degree.
struct PowerLaw {
    int node_count;
    double exponent;
    int max_degree;
    int min_degree = 1;
};

/// Degrees drawn i.i.d. from `pmf` (indexed by degree), wired by the
/// configuration model. An odd stub total is repaired by redrawing one
/// uniformly chosen node's degree.
struct Configuration {
    int node_count;
    std::vector<double> pmf;
};

/// Exact degree sequence wired by the configuration model.
struct DegreeSequence {
    std::vector<int> degrees;
};

using GraphSpec = std::variant<ErdosRenyi, PowerLaw, Configuration, DegreeSequence>;

/// The degree sequence cannot be wired (odd stub total, degree out of range).
class InfeasibleDegreeSequence : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "infeasible_degree_sequence"; }
};

namespace detail {

inline std::uint64_t edge_key(int u, int v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
}

inline constexpr int kRewireAttempts = 1000;

/// Random stub matching. Self-loops and multi-edges are repaired by double
/// edge swaps (at most kRewireAttempts tries each) and dropped otherwise.
inline Graph wire_configuration(std::span<const int> degrees, int cap, Rng& rng) {
    const int n = static_cast<int>(degrees.size());
    long long total = 0;
    for (int d : degrees) {
        if (d < 0 || d > cap || d > n - 1)
            throw InfeasibleDegreeSequence("degree " + std::to_string(d) + " outside [0, " +
                                           std::to_string(std::min(cap, n - 1)) + "]");
        total += d;
    }
    if (total % 2 != 0)
        throw InfeasibleDegreeSequence("odd stub total " + std::to_string(total));

    std::vector<int> stubs;
    stubs.reserve(static_cast<std::size_t>(total));
    for (int m = 0; m < n; ++m) stubs.insert(stubs.end(), static_cast<std::size_t>(degrees[m]), m);
    rng.shuffle(stubs.begin(), stubs.end());

    std::vector<std::pair<int, int>> edges;
    edges.reserve(stubs.size() / 2);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) edges.emplace_back(stubs[i], stubs[i + 1]);

    std::unordered_map<std::uint64_t, int> count;
    count.reserve(edges.size() * 2);
    std::vector<std::size_t> bad;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [u, v] = edges[e];
        int& c = count[edge_key(u, v)];
        if (u == v || c > 0) bad.push_back(e);
        ++c;
    }

    std::vector<char> alive(edges.size(), 1);
    auto is_good = [&](std::size_t e) {
        auto [u, v] = edges[e];
        return alive[e] && u != v && count[edge_key(u, v)] == 1;
    };
    for (std::size_t e : bad) {
        bool fixed = false;
        for (int attempt = 0; attempt < kRewireAttempts && !fixed && edges.size() > 1; ++attempt) {
            std::size_t j = rng.below(edges.size());
            if (j == e || !is_good(j)) continue;
            auto [u, v] = edges[e];
            auto [x, y] = edges[j];
            if (rng.bernoulli(0.5)) std::swap(x, y);
            if (u == x || v == y) continue;
            const auto k1 = edge_key(u, x), k2 = edge_key(v, y);
            if (k1 == k2 || count[k1] > 0 || count[k2] > 0) continue;
            --count[edge_key(u, v)];
            --count[edge_key(edges[j].first, edges[j].second)];
            edges[e] = {u, x};
            edges[j] = {v, y};
            ++count[k1];
            ++count[k2];
            fixed = true;
        }
        if (!fixed) {
            --count[edge_key(edges[e].first, edges[e].second)];
            alive[e] = 0;
        }
    }

    std::vector<std::pair<int, int>> kept;
    kept.reserve(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (alive[e]) kept.push_back(edges[e]);
    return Graph(n, kept, cap);
}

inline std::vector<int> draw_degrees(int n, std::span<const double> pmf, Rng& rng) {
    detail::require(n > 0, "node_count must be positive");
    detail::require(!pmf.empty(), "degree pmf is empty");
    double total = 0.0;
    for (double p : pmf) {
        detail::require(p >= 0.0 && std::isfinite(p), "degree pmf has a negative or non-finite entry");
        total += p;
    }
    detail::require(total > 0.0, "degree pmf sums to zero");
    bool has_even = false;
    for (std::size_t d = 0; d < pmf.size(); d += 2) has_even = has_even || pmf[d] > 0.0;

    std::vector<int> degrees(static_cast<std::size_t>(n));
    long long sum = 0;
    for (int& d : degrees) {
        d = static_cast<int>(rng.categorical(pmf));
        sum += d;
    }
    if (sum % 2 != 0) {
        // an odd total with even support available means odd support exists too
        if (!has_even)
            throw InfeasibleDegreeSequence("pmf supports only odd degrees with an odd node count");
        for (;;) {
            int& d = degrees[rng.below(degrees.size())];
            const int old = d;
            d = static_cast<int>(rng.categorical(pmf));
            if ((old - d) % 2 != 0) break;
        }
    }
    return degrees;
}

} // namespace detail

/// Truncated power-law degree pmf, indexed by degree 0..max_degree.
inline std::vector<double> power_law_pmf(double exponent, int max_degree, int min_degree = 1) {
    detail::require(min_degree >= 0 && max_degree >= min_degree, "bad power-law degree range");
    std::vector<double> pmf(static_cast<std::size_t>(max_degree) + 1, 0.0);
    double z = 0.0;
    for (int d = std::max(min_degree, 1); d <= max_degree; ++d) z += pmf[d] = std::pow(d, -exponent);
    if (min_degree == 0) z += pmf[0] = 1.0;
    for (double& p : pmf) p /= z;
    return pmf;
}

/// Deterministic in (spec, seed). Never produces self-loops or multi-edges.
inline Graph generate_graph(const GraphSpec& spec, std::uint64_t seed) {
    Rng rng = Rng(seed).child("network.generate");
    return std::visit(
        [&](const auto& s) -> Graph {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ErdosRenyi>) {
                detail::require(s.node_count > 0, "node_count must be positive");
                detail::require(s.edge_probability >= 0.0 && s.edge_probability <= 1.0,
                                "edge probability outside [0,1]");
                const int n = s.node_count;
                const int cap = s.max_degree.value_or(n - 1);
                std::vector<int> deg(static_cast<std::size_t>(n), 0);
                std::vector<std::pair<int, int>> edges;
                auto add = [&](int v, int w) {
                    if (deg[v] < cap && deg[w] < cap) {
                        ++deg[v];
                        ++deg[w];
                        edges.emplace_back(w, v);
                    }
                };
                if (s.edge_probability >= 1.0) {
                    for (int v = 1; v < n; ++v)
                        for (int w = 0; w < v; ++w) add(v, w);
                } else if (s.edge_probability > 0.0) {
                    // geometric skipping over the lower triangle
                    const double log_q = std::log1p(-s.edge_probability);
                    long long v = 1, w = -1;
                    while (v < n) {
                        const double r = rng.uniform();
                        w += 1 + static_cast<long long>(std::floor(std::log1p(-r) / log_q));
                        while (w >= v && v < n) {
                            w -= v;
                            ++v;
                        }
                        if (v < n) add(static_cast<int>(v), static_cast<int>(w));
                    }
                }
                return Graph(n, edges, s.max_degree ? std::optional<int>(cap) : std::nullopt);
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                const auto pmf = power_law_pmf(s.exponent, s.max_degree, s.min_degree);
                const auto degrees = detail::draw_degrees(s.node_count, pmf, rng);
                return detail::wire_configuration(degrees, s.max_degree, rng);
            } else if constexpr (std::is_same_v<T, Configuration>) {
                const auto degrees = detail::draw_degrees(s.node_count, s.pmf, rng);
                return detail::wire_configuration(degrees, static_cast<int>(s.pmf.size()) - 1, rng);
            } else {
                detail::require(!s.degrees.empty(), "empty degree sequence");
                const int cap = *std::max_element(s.degrees.begin(), s.degrees.end());
                return detail::wire_configuration(s.degrees, std::max(cap, 0), rng);
            }
        },
        spec);
}

// --- edge-list text format ---------------------------------------------------

/// One `u v` pair per line, 0-based, each undirected edge once. Blank lines
/// and lines starting with '#' are ignored. Self-loops and duplicates are
/// rejected with the offending line number.
inline Graph read_edge_list(std::istream& in, std::optional<int> node_count = std::nullopt) {
    std::vector<std::pair<int, int>> edges;
    std::unordered_map<std::uint64_t, int> seen;
    std::string line;
    int lineno = 0, max_id = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        long long u = -1, v = -1;
        if (!(ls >> u >> v))
            throw ParseError("expected two integer node ids", lineno, static_cast<int>(first) + 1);
        std::string rest;
        if (ls >> rest) throw ParseError("trailing text '" + rest + "'", lineno);
        if (u < 0 || v < 0 || u > (1LL << 30) || v > (1LL << 30))
            throw ParseError("node id out of range", lineno);
        if (u == v) throw ParseError("self-loop at node " + std::to_string(u), lineno);
        const auto key = detail::edge_key(static_cast<int>(u), static_cast<int>(v));
        if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
            throw ParseError("duplicate edge (first seen on line " + std::to_string(it->second) + ")",
                             lineno);
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
        max_id = std::max<int>(max_id, static_cast<int>(std::max(u, v)));
    }
    const int n = node_count.value_or(max_id + 1);
    if (n <= 0) throw ParseError("edge list is empty");
    if (max_id >= n) throw ParseError("node id " + std::to_string(max_id) + " exceeds node count");
    return Graph(n, edges);
}

inline void write_edge_list(std::ostream& out, const Graph& graph) {
    for (auto [u, v] : graph.edges()) out << u << ' ' << v << '\n';
}

} // namespace socsense
