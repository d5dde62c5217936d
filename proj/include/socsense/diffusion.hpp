#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/network.hpp"
#include "socsense/rng.hpp"

namespace socsense {

/// Finite-state Markov chain driving the transition kernel (market state,
/// competing product, ...).
struct TargetChain {
    std::vector<std::vector<double>> transition;
    int initial_state = 0;

    int state_count() const { return static_cast<int>(transition.size()); }

    void validate() const {
        const auto n = transition.size();
        detail::require(n > 0, "target chain has no states");
        detail::require(initial_state >= 0 && initial_state < static_cast<int>(n),
                        "initial target state out of range");
        for (const auto& row : transition) {
            detail::require(row.size() == n, "target transition matrix is not square");
            double s = 0.0;
            for (double p : row) {
                detail::require(p >= 0.0, "negative target transition probability");
                s += p;
            }
            detail::require(std::abs(s - 1.0) <= 1e-12, "target transition row does not sum to 1");
        }
    }

    /// s_0..s_steps, advancing once per simulation step.
    std::vector<int> sample_path(int steps, Rng& rng) const {
        validate();
        std::vector<int> path(static_cast<std::size_t>(steps) + 1);
        path[0] = initial_state;
        for (int k = 0; k < steps; ++k) path[k + 1] = static_cast<int>(rng.categorical(transition[path[k]]));
        return path;
    }
};

/// Deterministic target path: starts in `initial_state`, and switches to
/// `state` at each listed `(time, state)`.
inline std::vector<int> piecewise_schedule(int steps, int initial_state,
                                           std::span<const std::pair<int, int>> switches) {
    std::vector<int> path(static_cast<std::size_t>(steps) + 1, initial_state);
    for (int k = 0; k <= steps; ++k)
        for (auto [t, s] : switches)
            if (k >= t) path[k] = s;
    return path;
}

/// Node-level switching probabilities p01(d, a, s) and p10(d, a, s) for
/// degree d, a infected neighbours (a <= d) and target state s.
class TransitionKernel {
public:
    TransitionKernel() = default;
    TransitionKernel(int max_degree, int state_count)
        : max_degree_(max_degree), state_count_(state_count) {
        detail::require(max_degree >= 0 && state_count > 0, "bad kernel dimensions");
        const auto per_state = static_cast<std::size_t>(max_degree + 1) * (max_degree + 2) / 2;
        p01_.assign(per_state * state_count, 0.0);
        p10_.assign(per_state * state_count, 0.0);
    }

    template <class F01, class F10>
    static TransitionKernel from_functions(int max_degree, int state_count, F01&& f01, F10&& f10) {
        TransitionKernel k(max_degree, state_count);
        for (int s = 0; s < state_count; ++s)
            for (int d = 0; d <= max_degree; ++d)
                for (int a = 0; a <= d; ++a) k.set(d, a, s, f01(d, a, s), f10(d, a, s));
        return k;
    }

    int max_degree() const noexcept { return max_degree_; }
    int state_count() const noexcept { return state_count_; }

    double p01(int d, int a, int s) const { return p01_[index(d, a, s)]; }
    double p10(int d, int a, int s) const { return p10_[index(d, a, s)]; }

    void set(int d, int a, int s, double p01, double p10) {
        detail::require(p01 >= 0.0 && p01 <= 1.0 && p10 >= 0.0 && p10 <= 1.0,
                        "kernel probability outside [0,1]");
        p01_[index(d, a, s)] = p01;
        p10_[index(d, a, s)] = p10;
    }

private:
    std::size_t index(int d, int a, int s) const {
        assert(d >= 0 && d <= max_degree_ && a >= 0 && a <= d && s >= 0 && s < state_count_);
        return static_cast<std::size_t>(s) * (max_degree_ + 1) * (max_degree_ + 2) / 2 +
               static_cast<std::size_t>(d) * (d + 1) / 2 + a;
    }

    int max_degree_ = 0;
    int state_count_ = 0;
    std::vector<double> p01_;
    std::vector<double> p10_;
};

/// Technology-adoption kernel: adoption cost ~ U[0, C(s)] against benefit a,
/// so p01 = min(a / C(s), 1); the product fails with probability p_F.
inline TransitionKernel adoption_kernel(int max_degree, std::span<const double> thresholds,
                                        double failure_prob) {
    for (double c : thresholds) detail::require(c > 0.0, "adoption threshold C must be positive");
    const std::vector<double> cs(thresholds.begin(), thresholds.end());
    return TransitionKernel::from_functions(
        max_degree, static_cast<int>(cs.size()),
        [&](int, int a, int s) { return std::min(a / cs[s], 1.0); },
        [&](int, int, int) { return failure_prob; });
}

/// Degree- and neighbour-independent switching probabilities.
inline TransitionKernel constant_kernel(int max_degree, int state_count, double p01, double p10) {
    return TransitionKernel::from_functions(
        max_degree, state_count, [&](int, int, int) { return p01; }, [&](int, int, int) { return p10; });
}

/// Probability that a uniformly sampled link points to an infected node,
/// sum_d d P(d) rho(d) / sum_d d P(d). rho is indexed by degree.
inline double infected_link_probability(std::span<const double> rho, const DegreeDistribution& dist) {
    double num = 0.0, den = 0.0;
    for (int d = 1; d <= dist.max_degree(); ++d) {
        const double w = d * dist.p(d);
        den += w;
        if (d < static_cast<int>(rho.size())) num += w * rho[d];
    }
    if (!(den > 0.0)) throw InvalidArgument("infected link probability undefined: network has no edges");
    return std::clamp(num / den, 0.0, 1.0);
}

/// Binom(d, a, alpha) for a = 0..d.
inline std::vector<double> binomial_weights(int d, double alpha) {
    std::vector<double> w(static_cast<std::size_t>(d) + 1, 0.0);
    if (alpha <= 0.0) {
        w[0] = 1.0;
        return w;
    }
    if (alpha >= 1.0) {
        w[d] = 1.0;
        return w;
    }
    const double la = std::log(alpha), lb = std::log1p(-alpha);
    const double lgd = std::lgamma(d + 1.0);
    for (int a = 0; a <= d; ++a)
        w[a] = std::exp(lgd - std::lgamma(a + 1.0) - std::lgamma(d - a + 1.0) + a * la + (d - a) * lb);
    return w;
}

// --- agent-level SIS ---------------------------------------------------------

/// Per-node infection states plus incrementally maintained per-degree
/// infected counts and per-node infected-neighbour counts. Degree-0 nodes
/// never change state.
class DiffusionState {
public:
    DiffusionState() = default;

    DiffusionState(const Graph& graph, std::vector<std::uint8_t> node_states)
        : states_(std::move(node_states)) {
        detail::require(static_cast<int>(states_.size()) == graph.node_count(),
                        "node state vector length differs from node count");
        const auto dmax = static_cast<std::size_t>(graph.max_degree());
        nodes_.assign(dmax + 1, 0);
        infected_.assign(dmax + 1, 0);
        infected_neighbors_.assign(states_.size(), 0);
        for (int m = 0; m < graph.node_count(); ++m) {
            detail::require(states_[m] <= 1, "node states must be 0 or 1");
            ++nodes_[graph.degree(m)];
            if (states_[m]) {
                ++infected_[graph.degree(m)];
                for (int n : graph.neighbors(m)) ++infected_neighbors_[n];
            }
        }
    }

    /// Exactly round(fraction * N) nodes infected, chosen uniformly.
    static DiffusionState with_infected_fraction(const Graph& graph, double fraction, Rng& rng) {
        detail::require(fraction >= 0.0 && fraction <= 1.0, "initial infected fraction outside [0,1]");
        const int n = graph.node_count();
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        const int k = static_cast<int>(std::lround(fraction * n));
        std::vector<std::uint8_t> states(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < k; ++i) states[order[i]] = 1;
        return DiffusionState(graph, std::move(states));
    }

    std::span<const std::uint8_t> node_states() const { return states_; }
    int time() const noexcept { return time_; }
    int max_degree() const { return static_cast<int>(nodes_.size()) - 1; }
    int infected_neighbors(int m) const { return infected_neighbors_[m]; }
    int infected_count(int d) const { return infected_[d]; }
    int nodes_with_degree(int d) const { return nodes_[d]; }

    /// Infected fraction among degree-d nodes (0 when there are none).
    double rho(int d) const { return nodes_[d] > 0 ? static_cast<double>(infected_[d]) / nodes_[d] : 0.0; }

    /// rho indexed by degree 0..D; entry 0 is carried but never used.
    std::vector<double> rho_vector() const {
        std::vector<double> r(nodes_.size());
        for (std::size_t d = 0; d < r.size(); ++d) r[d] = rho(static_cast<int>(d));
        return r;
    }

    double overall_infected_fraction() const {
        long long inf = 0, tot = 0;
        for (std::size_t d = 0; d < nodes_.size(); ++d) {
            inf += infected_[d];
            tot += nodes_[d];
        }
        return static_cast<double>(inf) / static_cast<double>(tot);
    }

    void flip(const Graph& graph, int m) {
        const int d = graph.degree(m);
        const int delta = states_[m] ? -1 : 1;
        states_[m] ^= 1;
        infected_[d] += delta;
        for (int n : graph.neighbors(m)) infected_neighbors_[n] += delta;
        assert(infected_[d] >= 0 && infected_[d] <= nodes_[d]);
    }

    void advance_clock() { ++time_; }

    /// Recomputes every derived count from the node states.
    bool consistent_with(const Graph& graph) const {
        DiffusionState fresh(graph, states_);
        return fresh.infected_ == infected_ && fresh.infected_neighbors_ == infected_neighbors_ &&
               fresh.nodes_ == nodes_;
    }

private:
    std::vector<std::uint8_t> states_;
    std::vector<int> nodes_;
    std::vector<int> infected_;
    std::vector<int> infected_neighbors_;
    int time_ = 0;
};

/// One uniformly chosen agent resamples its state from the kernel using its
/// actual infected-neighbour count.
inline void sis_step(DiffusionState& state, const Graph& graph, const TransitionKernel& kernel,
                     int target_state, Rng& rng) {
    const int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(graph.node_count())));
    const int d = graph.degree(m);
    const double u = rng.uniform();
    if (d > 0) {
        const int a = state.infected_neighbors(m);
        const double p = state.node_states()[m] ? kernel.p10(d, a, target_state)
                                                : kernel.p01(d, a, target_state);
        if (u < p) state.flip(graph, m);
    }
    state.advance_clock();
}

struct SisTrajectory {
    std::vector<int> target;               ///< s_k, k = 0..steps
    std::vector<double> alpha;             ///< infected link probability per k
    std::vector<std::vector<double>> rho;  ///< rho_k(d), indexed [k][d]
    DiffusionState final_state;
};

/// Runs `steps` single-agent updates along the given target path (length
/// steps + 1). Deterministic in `seed`.
inline SisTrajectory simulate_sis(const Graph& graph, const TransitionKernel& kernel,
                                  std::span<const int> target_path, double initial_infected_fraction,
                                  int steps, std::uint64_t seed) {
    detail::require(steps >= 0, "steps must be nonnegative");
    detail::require(static_cast<int>(target_path.size()) >= steps + 1, "target path shorter than horizon");
    detail::require(kernel.max_degree() >= graph.max_degree(), "kernel max degree below graph max degree");
    Rng root(seed);
    Rng init = root.child("diffusion.init");
    Rng dyn = root.child("diffusion.dynamics");
    const auto dist = degree_distribution(graph);

    SisTrajectory out;
    DiffusionState state = DiffusionState::with_infected_fraction(graph, initial_infected_fraction, init);
    out.target.assign(target_path.begin(), target_path.begin() + steps + 1);
    out.alpha.reserve(static_cast<std::size_t>(steps) + 1);
    out.rho.reserve(static_cast<std::size_t>(steps) + 1);
    for (int k = 0;; ++k) {
        auto r = state.rho_vector();
        out.alpha.push_back(infected_link_probability(r, dist));
        out.rho.push_back(std::move(r));
        if (k == steps) break;
        sis_step(state, graph, kernel, target_path[k], dyn);
    }
    out.final_state = std::move(state);
    return out;
}

/// Same, with the target path drawn from `target` (one transition per step).
inline SisTrajectory simulate_sis(const Graph& graph, const TransitionKernel& kernel,
                                  const TargetChain& target, double initial_infected_fraction, int steps,
                                  std::uint64_t seed) {
    Rng chain_rng = Rng(seed).child("diffusion.target");
    const auto path = target.sample_path(steps, chain_rng);
    return simulate_sis(graph, kernel, path, initial_infected_fraction, steps, seed);
}

// --- mean field ----------------------------------------------------------------

struct MeanFieldState {
    std::vector<double> rho_bar;  ///< indexed by degree 0..D; entry 0 unused
    int time = 0;
    int clamp_count = 0;          ///< coordinates clamped back into [0,1] so far
};

/// Scaled drift rho01(d) - rho10(d) for every degree, evaluated at `rho`.
inline std::vector<double> mean_field_drift(std::span<const double> rho, const TransitionKernel& kernel,
                                            const DegreeDistribution& dist, int target_state) {
    const double alpha = infected_link_probability(rho, dist);
    std::vector<double> drift(rho.size(), 0.0);
    for (int d = 1; d < static_cast<int>(rho.size()); ++d) {
        const auto w = binomial_weights(d, alpha);
        double up = 0.0, down = 0.0;
        for (int a = 0; a <= d; ++a) {
            up += kernel.p01(d, a, target_state) * w[a];
            down += kernel.p10(d, a, target_state) * w[a];
        }
        drift[d] = (1.0 - rho[d]) * up - rho[d] * down;
    }
    return drift;
}

/// rho_{k+1}(d) = rho_k(d) + (1/N) [rho01 - rho10], clamped to [0,1].
inline MeanFieldState mean_field_step(const MeanFieldState& mf, const TransitionKernel& kernel,
                                      const DegreeDistribution& dist, int target_state, int node_count) {
    detail::require(node_count > 0, "node count must be positive");
    const auto drift = mean_field_drift(mf.rho_bar, kernel, dist, target_state);
    MeanFieldState next{mf.rho_bar, mf.time + 1, mf.clamp_count};
    for (std::size_t d = 1; d < next.rho_bar.size(); ++d) {
        double v = mf.rho_bar[d] + drift[d] / node_count;
        if (v < 0.0 || v > 1.0) {
            v = std::clamp(v, 0.0, 1.0);
            ++next.clamp_count;
        }
        next.rho_bar[d] = v;
    }
    return next;
}

struct MeanFieldTrajectory {
    std::vector<double> alpha;
    std::vector<std::vector<double>> rho;
    int clamp_count = 0;
};

inline MeanFieldTrajectory mean_field_trajectory(std::vector<double> initial_rho, const TransitionKernel& kernel,
                                                 const DegreeDistribution& dist, std::span<const int> target_path,
                                                 int node_count, int steps) {
    detail::require(static_cast<int>(target_path.size()) >= steps + 1, "target path shorter than horizon");
    MeanFieldTrajectory out;
    MeanFieldState mf{std::move(initial_rho), 0, 0};
    for (int k = 0;; ++k) {
        out.alpha.push_back(infected_link_probability(mf.rho_bar, dist));
        out.rho.push_back(mf.rho_bar);
        if (k == steps) break;
        mf = mean_field_step(mf, kernel, dist, target_path[k], node_count);
    }
    out.clamp_count = mf.clamp_count;
    return out;
}

/// max_k max_d |rho_k(d) - rho_bar_k(d)| over degrees d >= 1 with
/// include[d] set (all degrees >= 1 when `include` is empty).
inline double deviation(const std::vector<std::vector<double>>& sim, const std::vector<std::vector<double>>& mf,
                        std::span<const char> include = {}) {
    if (sim.size() != mf.size())
        throw InvalidArgument("trajectory lengths differ: " + std::to_string(sim.size()) + " vs " +
                              std::to_string(mf.size()));
    double worst = 0.0;
    for (std::size_t k = 0; k < sim.size(); ++k) {
        if (sim[k].size() != mf[k].size()) throw InvalidArgument("trajectories have different max degree");
        for (std::size_t d = 1; d < sim[k].size(); ++d) {
            if (!include.empty() && (d >= include.size() || !include[d])) continue;
            worst = std::max(worst, std::abs(sim[k][d] - mf[k][d]));
        }
    }
    return worst;
}

/// Degrees present in the graph (N(d) > 0, d >= 1), as a mask for deviation().
inline std::vector<char> populated_degrees(const DegreeDistribution& dist) {
    std::vector<char> mask(dist.counts.size(), 0);
    for (std::size_t d = 1; d < mask.size(); ++d) mask[d] = dist.counts[d] > 0;
    return mask;
}

/// Simulation and mean-field run side by side from the same initial state.
struct TrackingRun {
    SisTrajectory sim;
    MeanFieldTrajectory mf;
    double sup_deviation = 0.0;
    double mean_abs_alpha_gap = 0.0;
};

inline TrackingRun track_mean_field(const Graph& graph, const TransitionKernel& kernel,
                                    std::span<const int> target_path, double initial_infected_fraction,
                                    int steps, std::uint64_t seed) {
    TrackingRun run;
    run.sim = simulate_sis(graph, kernel, target_path, initial_infected_fraction, steps, seed);
    const auto dist = degree_distribution(graph);
    run.mf = mean_field_trajectory(run.sim.rho.front(), kernel, dist, target_path, graph.node_count(), steps);
    run.sup_deviation = deviation(run.sim.rho, run.mf.rho, populated_degrees(dist));
    double gap = 0.0;
    for (std::size_t k = 0; k < run.sim.alpha.size(); ++k) gap += std::abs(run.sim.alpha[k] - run.mf.alpha[k]);
    run.mean_abs_alpha_gap = gap / static_cast<double>(run.sim.alpha.size());
    return run;
}

/// Parameters of the switching-threshold adoption experiment: adoption
/// threshold C jumps 1 -> 10 at k = 200 and back at k = 500.
struct SwitchingScenario {
    GraphSpec graph = PowerLaw{100, 2.0, 17, 2};
    int steps = 700;
    double initial_infected_fraction = 0.05;
    double failure_prob = 0.3;
    std::vector<double> thresholds{1.0, 10.0};
    int initial_state = 0;
    std::vector<std::pair<int, int>> switches{{200, 1}, {500, 0}};

    std::vector<int> target_path() const { return piecewise_schedule(steps, initial_state, switches); }
};

} // namespace socsense
