#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "socsense/error.hpp"
#include "socsense/lp.hpp"

namespace socsense {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Multi-agent probe/response data: at each time t a common price vector
/// p_t and one response x_t^i per agent. A single-agent dataset has n = 1.
struct Dataset {
    std::vector<Vec> prices;                  ///< [t][j]
    std::vector<std::vector<Vec>> responses;  ///< [t][i][j]
    std::vector<std::vector<double>> budgets; ///< [t][i]; empty means p_t'x_t^i

    int observation_count() const { return static_cast<int>(prices.size()); }
    int good_count() const { return prices.empty() ? 0 : static_cast<int>(prices[0].size()); }
    int agent_count() const { return responses.empty() ? 0 : static_cast<int>(responses[0].size()); }

    double budget(int t, int i) const {
        return budgets.empty() ? dot(prices[t], responses[t][i]) : budgets[t][i];
    }

    void validate() const {
        const int t_count = observation_count();
        detail::require(t_count >= 1, "dataset has no observations");
        detail::require(static_cast<int>(responses.size()) == t_count, "one response set per observation is required");
        const int m = good_count();
        detail::require(m >= 1, "dataset has no goods");
        const int n = agent_count();
        detail::require(n >= 1, "dataset has no agents");
        for (int t = 0; t < t_count; ++t) {
            detail::require(static_cast<int>(prices[t].size()) == m, "price vectors differ in length");
            for (double p : prices[t])
                if (!(p > 0.0) || !std::isfinite(p))
                    throw InvalidArgument("price at observation " + std::to_string(t) + " is not strictly positive");
            detail::require(static_cast<int>(responses[t].size()) == n, "agent count differs across observations");
            for (const auto& x : responses[t]) {
                detail::require(static_cast<int>(x.size()) == m, "response vectors differ in length");
                for (double v : x) detail::require(v >= 0.0 && std::isfinite(v), "responses must be nonnegative");
            }
        }
        if (!budgets.empty()) {
            detail::require(static_cast<int>(budgets.size()) == t_count, "one budget row per observation is required");
            for (const auto& row : budgets) detail::require(static_cast<int>(row.size()) == n, "one budget per agent is required");
        }
    }

    /// Agent i's responses as a single-agent dataset.
    Dataset slice(int i) const {
        Dataset d;
        d.prices = prices;
        for (int t = 0; t < observation_count(); ++t) {
            d.responses.push_back({responses[t][i]});
            if (!budgets.empty()) d.budgets.push_back({budgets[t][i]});
        }
        return d;
    }

    static Dataset single_agent(std::vector<Vec> p, std::vector<Vec> x) {
        Dataset d;
        d.prices = std::move(p);
        for (auto& v : x) d.responses.push_back({std::move(v)});
        return d;
    }
};

struct GarpResult {
    bool pass = true;
    std::vector<int> cycle;  ///< t_0, t_1, ..., t_k with t_k strictly preferring t_0's bundle back
};

/// t R0 tau iff p_t'x_t >= p_t'x_tau (relative tolerance 1e-9); GARP fails
/// iff t R tau (transitive closure) while p_tau'x_tau > p_tau'x_t strictly.
inline GarpResult garp_check(const Dataset& data, int agent = 0) {
    data.validate();
    detail::require(agent >= 0 && agent < data.agent_count(), "agent index out of range");
    const int n = data.observation_count();
    auto x = [&](int t) -> const Vec& { return data.responses[t][agent]; };
    std::vector<std::vector<char>> r0(n, std::vector<char>(n, 0)), strict(n, std::vector<char>(n, 0));
    for (int t = 0; t < n; ++t) {
        const double own = dot(data.prices[t], x(t));
        const double tol = 1e-9 * (1.0 + std::abs(own));
        for (int s = 0; s < n; ++s) {
            const double other = dot(data.prices[t], x(s));
            r0[t][s] = own >= other - tol;
            strict[t][s] = own > other + tol;
        }
    }
    auto r = r0;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (r[i][k])
                for (int j = 0; j < n; ++j) r[i][j] = r[i][j] || r[k][j];

    GarpResult out;
    for (int t = 0; t < n; ++t)
        for (int s = 0; s < n; ++s) {
            if (!(r[t][s] && strict[s][t])) continue;
            // shortest R0 path t -> s, closed by the strict edge s -> t
            std::vector<int> prev(n, -2);
            std::queue<int> q;
            prev[t] = -1;
            q.push(t);
            while (!q.empty() && prev[s] == -2) {
                const int u = q.front();
                q.pop();
                for (int v = 0; v < n; ++v)
                    if (r0[u][v] && prev[v] == -2) {
                        prev[v] = u;
                        q.push(v);
                    }
            }
            std::vector<int> path;
            if (s == t) path.push_back(t);
            else
                for (int v = s; v != -1; v = prev[v]) path.push_back(v);
            std::reverse(path.begin(), path.end());
            if (out.pass || path.size() < out.cycle.size()) {
                out.pass = false;
                out.cycle = std::move(path);
            }
        }
    return out;
}

struct GarpCycle {
    int agent = 0;
    std::vector<int> cycle;
};

/// Afriat multipliers. For one agent, u holds utility levels and
/// lambda[t][0] the multipliers; for n agents, u holds potential levels v_t
/// and lambda[t][i] per-agent multipliers.
struct Certificate {
    bool feasible = false;
    Vec u;
    std::vector<Vec> lambda;
    std::optional<GarpCycle> witness;   ///< GARP cycle of one agent, when found
    std::vector<double> farkas;         ///< LP infeasibility multipliers
    double epsilon = 1e-6;
};

/// u_tau - u_t - sum_i lambda_t^i p_t'(x_tau^i - x_t^i) for all t != tau.
inline double max_certificate_violation(const Certificate& c, const Dataset& data) {
    double worst = -std::numeric_limits<double>::infinity();
    const int n = data.observation_count();
    for (int t = 0; t < n; ++t)
        for (int s = 0; s < n; ++s) {
            if (s == t) continue;
            double v = c.u[s] - c.u[t];
            for (int i = 0; i < data.agent_count(); ++i) {
                double gap = 0.0;
                for (int j = 0; j < data.good_count(); ++j)
                    gap += data.prices[t][j] * (data.responses[s][i][j] - data.responses[t][i][j]);
                v -= c.lambda[t][i] * gap;
            }
            worst = std::max(worst, v);
        }
    return n > 1 ? worst : 0.0;
}

namespace detail {

// Variables: u_0..u_{T-1} (u_0 fixed at 0), lambda_t^i at T + t n + i, and
// delta last. The inequalities are homogeneous, so the scale is pinned by
// sum lambda = n T; maximizing delta <= min lambda (delta >= epsilon) picks
// a well-conditioned certificate.
inline LinearProgram afriat_lp(const Dataset& data, double epsilon) {
    const int n_obs = data.observation_count(), agents = data.agent_count(), m = data.good_count();
    LinearProgram lp;
    lp.sense = Sense::maximize;
    for (int t = 0; t < n_obs; ++t) lp.add_variable(0.0, t == 0 ? 0.0 : -LinearProgram::inf, t == 0 ? 0.0 : LinearProgram::inf);
    for (int t = 0; t < n_obs; ++t)
        for (int i = 0; i < agents; ++i) lp.add_variable(0.0, epsilon);
    const int delta = lp.add_variable(1.0, epsilon);
    const int vars = lp.variable_count();
    for (int t = 0; t < n_obs; ++t)
        for (int s = 0; s < n_obs; ++s) {
            if (s == t) continue;
            std::vector<double> row(static_cast<std::size_t>(vars), 0.0);
            row[s] += 1.0;
            row[t] -= 1.0;
            for (int i = 0; i < agents; ++i) {
                double gap = 0.0;
                for (int j = 0; j < m; ++j)
                    gap += data.prices[t][j] * (data.responses[s][i][j] - data.responses[t][i][j]);
                row[n_obs + t * agents + i] = -gap;
            }
            lp.rows.push_back(std::move(row));
            lp.relations.push_back(Relation::le);
            lp.rhs.push_back(0.0);
        }
    std::vector<double> total(static_cast<std::size_t>(vars), 0.0);
    for (int k = n_obs; k < delta; ++k) {
        total[k] = 1.0;
        std::vector<double> row(static_cast<std::size_t>(vars), 0.0);
        row[k] = 1.0;
        row[delta] = -1.0;
        lp.add_constraint(std::move(row), Relation::ge, 0.0);
    }
    lp.add_constraint(std::move(total), Relation::eq, static_cast<double>(n_obs * agents));
    return lp;
}

inline Certificate solve_afriat_lp(const Dataset& data, double epsilon) {
    Certificate c;
    c.epsilon = epsilon;
    const auto lp = afriat_lp(data, epsilon);
    const auto res = solve(lp);
    if (res.status == LpStatus::unbounded) throw LpNumericalFailure("feasibility LP reported unbounded");
    if (res.status == LpStatus::infeasible) {
        c.farkas = res.farkas;
        return c;
    }
    const int n_obs = data.observation_count(), agents = data.agent_count();
    c.feasible = true;
    c.u.assign(res.x.begin(), res.x.begin() + n_obs);
    c.lambda.assign(static_cast<std::size_t>(n_obs), Vec(static_cast<std::size_t>(agents)));
    for (int t = 0; t < n_obs; ++t)
        for (int i = 0; i < agents; ++i) c.lambda[t][i] = res.x[n_obs + t * agents + i];
    return c;
}

} // namespace detail

/// Afriat feasibility for a single agent (lambda_t >= epsilon in place of
/// strict positivity). Solved by the LP alone.
inline Certificate afriat_feasible(const Dataset& data, double epsilon = 1e-6) {
    data.validate();
    detail::require(data.agent_count() == 1, "afriat_feasible expects a single-agent dataset");
    detail::require(epsilon > 0.0, "epsilon must be positive");
    auto c = detail::solve_afriat_lp(data, epsilon);
    if (!c.feasible) {
        auto g = garp_check(data);
        if (!g.pass) c.witness = GarpCycle{0, std::move(g.cycle)};
    }
    return c;
}

/// Feasibility of the potential-game inequalities. With several agents a
/// per-agent GARP failure is reported before any LP is solved (it is a
/// necessary condition); a single agent goes straight to the Afriat LP.
inline Certificate nash_rationality_test(const Dataset& data, double epsilon = 1e-6) {
    data.validate();
    detail::require(epsilon > 0.0, "epsilon must be positive");
    if (data.agent_count() > 1)
        for (int i = 0; i < data.agent_count(); ++i) {
            auto g = garp_check(data, i);
            if (!g.pass) {
                Certificate c;
                c.epsilon = epsilon;
                c.witness = GarpCycle{i, std::move(g.cycle)};
                return c;
            }
        }
    auto c = detail::solve_afriat_lp(data, epsilon);
    if (!c.feasible && data.agent_count() == 1) {
        auto g = garp_check(data);
        if (!g.pass) c.witness = GarpCycle{0, std::move(g.cycle)};
    }
    return c;
}

/// min_t { level_t + grad_t'(z - anchor_t) }, concave and piecewise linear.
/// z stacks the agents' responses (agent-major).
class PiecewiseLinear {
public:
    struct Plane {
        double level;
        Vec gradient;
        Vec anchor;
    };

    explicit PiecewiseLinear(std::vector<Plane> planes) : planes_(std::move(planes)) {
        detail::require(!planes_.empty(), "piecewise-linear function needs at least one plane");
    }

    const std::vector<Plane>& planes() const { return planes_; }
    int dimension() const { return static_cast<int>(planes_[0].gradient.size()); }

    double plane_value(std::size_t t, std::span<const double> z) const {
        const auto& p = planes_[t];
        double v = p.level;
        for (std::size_t k = 0; k < z.size(); ++k) v += p.gradient[k] * (z[k] - p.anchor[k]);
        return v;
    }

    double operator()(std::span<const double> z) const {
        detail::require(static_cast<int>(z.size()) == dimension(), "point has wrong dimension");
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < planes_.size(); ++t) best = std::min(best, plane_value(t, z));
        return best;
    }

    /// Planes attaining the minimum within a relative tolerance.
    std::vector<int> active(std::span<const double> z, double tol = 1e-9) const {
        const double v = (*this)(z);
        std::vector<int> out;
        for (std::size_t t = 0; t < planes_.size(); ++t)
            if (plane_value(t, z) <= v + tol * (1.0 + std::abs(v))) out.push_back(static_cast<int>(t));
        return out;
    }

private:
    std::vector<Plane> planes_;
};

inline PiecewiseLinear build_potential(const Certificate& cert, const Dataset& data) {
    detail::require(cert.feasible, "certificate is not feasible");
    const int agents = data.agent_count(), m = data.good_count();
    std::vector<PiecewiseLinear::Plane> planes;
    for (int t = 0; t < data.observation_count(); ++t) {
        PiecewiseLinear::Plane p{cert.u[t], Vec(static_cast<std::size_t>(agents * m)), Vec(static_cast<std::size_t>(agents * m))};
        for (int i = 0; i < agents; ++i)
            for (int j = 0; j < m; ++j) {
                p.gradient[i * m + j] = cert.lambda[t][i] * data.prices[t][j];
                p.anchor[i * m + j] = data.responses[t][i][j];
            }
        planes.push_back(std::move(p));
    }
    return PiecewiseLinear(std::move(planes));
}

/// u(x) = min_t { u_t + lambda_t p_t'(x - x_t) }.
inline PiecewiseLinear build_utility(const Certificate& cert, const Dataset& data) {
    detail::require(data.agent_count() == 1, "build_utility expects a single-agent dataset");
    return build_potential(cert, data);
}

struct Prediction {
    std::vector<Vec> responses;  ///< [i][j]
    double value = 0.0;          ///< attained z
};

/// max z s.t. z <= V_t(x) for every plane, p'x^i <= I^i, x >= 0.
inline Prediction predict_response(const Certificate& cert, const Dataset& data, std::span<const double> price,
                                   std::span<const double> budgets) {
    detail::require(cert.feasible, "certificate is not feasible");
    const int agents = data.agent_count(), m = data.good_count();
    detail::require(static_cast<int>(price.size()) == m, "probe price has wrong length");
    detail::require(static_cast<int>(budgets.size()) == agents, "one budget per agent is required");
    for (double p : price) detail::require(p > 0.0 && std::isfinite(p), "probe prices must be strictly positive");
    for (double b : budgets) detail::require(b >= 0.0 && std::isfinite(b), "budgets must be nonnegative");
    const auto pot = build_potential(cert, data);

    LinearProgram lp;
    lp.sense = Sense::maximize;
    const int z = lp.add_variable(1.0, -LinearProgram::inf);
    for (int k = 0; k < agents * m; ++k) lp.add_variable(0.0, 0.0);
    for (const auto& plane : pot.planes()) {
        // z - grad'x <= level - grad'anchor
        std::vector<double> row(static_cast<std::size_t>(lp.variable_count()), 0.0);
        row[z] = 1.0;
        double rhs = plane.level;
        for (int k = 0; k < agents * m; ++k) {
            row[1 + k] = -plane.gradient[k];
            rhs -= plane.gradient[k] * plane.anchor[k];
        }
        lp.add_constraint(std::move(row), Relation::le, rhs);
    }
    for (int i = 0; i < agents; ++i) {
        std::vector<double> row(static_cast<std::size_t>(lp.variable_count()), 0.0);
        for (int j = 0; j < m; ++j) row[1 + i * m + j] = price[j];
        lp.add_constraint(std::move(row), Relation::le, budgets[i]);
    }
    const auto res = solve(lp);
    if (res.status == LpStatus::unbounded)
        throw LpNumericalFailure("prediction LP unbounded despite positive multipliers and prices");
    if (res.status == LpStatus::infeasible) throw InvalidArgument("prediction budgets are infeasible");
    Prediction out;
    out.value = res.x[z];
    out.responses.assign(static_cast<std::size_t>(agents), Vec(static_cast<std::size_t>(m)));
    for (int i = 0; i < agents; ++i)
        for (int j = 0; j < m; ++j) out.responses[i][j] = std::max(0.0, res.x[1 + i * m + j]);
    return out;
}

struct MrsResult {
    double ratio = 0.0;
    bool smooth = true;       ///< false when several planes are active
    std::vector<int> active;  ///< active plane (observation) indices
};

/// dV/dx^i_j divided by dV/dx^i_k at z, from the active plane(s); at a
/// kink the active gradients are averaged.
inline MrsResult marginal_rate_substitution(const PiecewiseLinear& v, std::span<const double> z, int agent, int good_j,
                                            int good_k, int good_count) {
    detail::require(good_count >= 1 && v.dimension() % good_count == 0, "good count does not divide the dimension");
    const int agents = v.dimension() / good_count;
    detail::require(agent >= 0 && agent < agents, "agent index out of range");
    detail::require(good_j >= 0 && good_j < good_count && good_k >= 0 && good_k < good_count, "good index out of range");
    MrsResult r;
    r.active = v.active(z);
    r.smooth = r.active.size() == 1;
    double gj = 0.0, gk = 0.0;
    for (int t : r.active) {
        gj += v.planes()[t].gradient[agent * good_count + good_j];
        gk += v.planes()[t].gradient[agent * good_count + good_k];
    }
    detail::require(gk > 0.0, "marginal utility of the reference good is zero");
    r.ratio = gj / gk;
    return r;
}

} // namespace socsense
