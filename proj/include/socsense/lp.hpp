#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "socsense/error.hpp"

namespace socsense {

enum class Sense { minimize, maximize };
enum class Relation { le, eq, ge };

/// Dense LP: optimize objective'x subject to rows[i]'x (relation) rhs[i]
/// and lower <= x <= upper (bounds may be infinite).
struct LinearProgram {
    static constexpr double inf = std::numeric_limits<double>::infinity();

    Sense sense = Sense::minimize;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<Relation> relations;
    std::vector<double> rhs;
    std::vector<double> lower;
    std::vector<double> upper;

    int variable_count() const { return static_cast<int>(objective.size()); }
    int row_count() const { return static_cast<int>(rows.size()); }

    int add_variable(double cost, double lo = 0.0, double hi = inf) {
        objective.push_back(cost);
        lower.push_back(lo);
        upper.push_back(hi);
        for (auto& r : rows) r.push_back(0.0);
        return variable_count() - 1;
    }

    void add_constraint(std::vector<double> coeffs, Relation rel, double b) {
        coeffs.resize(objective.size(), 0.0);
        rows.push_back(std::move(coeffs));
        relations.push_back(rel);
        rhs.push_back(b);
    }

    void validate() const {
        const auto n = objective.size();
        detail::require(lower.size() == n && upper.size() == n, "bound vectors differ from variable count");
        detail::require(relations.size() == rows.size() && rhs.size() == rows.size(),
                        "relation/rhs vectors differ from row count");
        for (double c : objective) detail::require(std::isfinite(c), "objective has NaN or Inf");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            detail::require(rows[i].size() == n, "constraint row " + std::to_string(i) + " has wrong length");
            for (double a : rows[i]) detail::require(std::isfinite(a), "constraint matrix has NaN or Inf");
            detail::require(std::isfinite(rhs[i]), "rhs has NaN or Inf");
        }
        for (std::size_t j = 0; j < n; ++j) {
            detail::require(!std::isnan(lower[j]) && !std::isnan(upper[j]), "bound is NaN");
            detail::require(lower[j] < inf && upper[j] > -inf, "bound excludes every value");
        }
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

/// Sign conventions: objective = sum_i row_duals[i] rows[i] + reduced_costs.
/// For a minimization, >= rows carry duals >= 0 and <= rows duals <= 0
/// (reversed for a maximization).
struct LpResult {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;              ///< optimal point; a feasible point when unbounded
    double value = 0.0;
    std::vector<double> row_duals;
    std::vector<double> reduced_costs;
    std::vector<double> farkas;         ///< infeasible: row multipliers y with sup_{box} (A'y)'x < y'b
    std::vector<double> ray;            ///< unbounded: improving recession direction
    int iterations = 0;
};

/// Pivoting broke down (singular basis or iteration cap); distinct from an
/// infeasible or unbounded verdict.
class LpNumericalFailure : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "lp_numerical_failure"; }
};

struct LpOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-7;
    int refactor_every = 50;
    int max_iterations = 200000;
};

namespace detail {

// Every LP is rewritten as  min c'x  s.t.  G x >= h,  x free.  Its dual
//   max h'y  s.t.  G'y = c,  y >= 0
// is in standard form with one equality per primal variable, which keeps the
// basis small when there are many more rows than variables.
struct GForm {
    struct Origin {
        int index;    // row index, or variable index for bound rows
        bool bound;
        double sign;  // G row = sign * original row (or unit vector) / scale
        double scale;
    };
    int n = 0;
    std::vector<std::vector<double>> g;
    std::vector<double> h;
    std::vector<Origin> origin;
    std::vector<double> c;
};

inline GForm to_gform(const LinearProgram& lp) {
    GForm f;
    f.n = lp.variable_count();
    const double osign = lp.sense == Sense::maximize ? -1.0 : 1.0;
    f.c.resize(f.n);
    for (int j = 0; j < f.n; ++j) f.c[j] = osign * lp.objective[j];
    auto add = [&](std::vector<double> row, double rhs, GForm::Origin o) {
        double norm = 0.0;
        for (double v : row) norm = std::max(norm, std::abs(v));
        o.scale = norm > 0.0 ? norm : 1.0;
        for (double& v : row) v /= o.scale;
        rhs /= o.scale;
        f.g.push_back(std::move(row));
        f.h.push_back(rhs);
        f.origin.push_back(o);
    };
    for (int i = 0; i < lp.row_count(); ++i) {
        const auto rel = lp.relations[i];
        if (rel == Relation::ge || rel == Relation::eq) add(lp.rows[i], lp.rhs[i], {i, false, 1.0, 1.0});
        if (rel == Relation::le || rel == Relation::eq) {
            std::vector<double> neg(lp.rows[i]);
            for (double& v : neg) v = -v;
            add(std::move(neg), -lp.rhs[i], {i, false, -1.0, 1.0});
        }
    }
    for (int j = 0; j < f.n; ++j) {
        if (lp.lower[j] > -LinearProgram::inf) {
            std::vector<double> e(f.n, 0.0);
            e[j] = 1.0;
            add(std::move(e), lp.lower[j], {j, true, 1.0, 1.0});
        }
        if (lp.upper[j] < LinearProgram::inf) {
            std::vector<double> e(f.n, 0.0);
            e[j] = -1.0;
            add(std::move(e), -lp.upper[j], {j, true, -1.0, 1.0});
        }
    }
    return f;
}

// Revised simplex with Bland's rule on  min cost'y, A y = b, y >= 0  where
// column j < M of A is sign-adjusted row j of G and columns M.. are
// artificials.
class DualSimplex {
public:
    enum class Outcome { optimal, unbounded };

    DualSimplex(const GForm& f, const LpOptions& opt) : f_(f), opt_(opt), n_(f.n), m_(static_cast<int>(f.g.size())) {
        sign_.resize(n_);
        b_.resize(n_);
        for (int i = 0; i < n_; ++i) {
            sign_[i] = f.c[i] < 0.0 ? -1.0 : 1.0;
            b_(i) = sign_[i] * f.c[i];
        }
        basis_.resize(n_);
        is_basic_.assign(static_cast<std::size_t>(m_ + n_), -1);
        for (int i = 0; i < n_; ++i) {
            basis_[i] = m_ + i;
            is_basic_[m_ + i] = i;
        }
        binv_ = Eigen::MatrixXd::Identity(n_, n_);
        xb_ = b_;
        exact_b_ = b_;
    }

    // Deterministic right-hand-side perturbation against degenerate stalls;
    // call before phase one.
    void perturb(double size) {
        for (int i = 0; i < n_; ++i) {
            const double u = static_cast<double>(splitmix(static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
            b_(i) += size * (1.0 + std::abs(b_(i))) * (0.5 + 0.5 * u);
        }
        xb_ = b_;
    }

    // Back to the exact right-hand side; false if the current basis is then
    // infeasible.
    bool restore() {
        b_ = exact_b_;
        refactor();
        const double tol = 10.0 * opt_.feasibility_tol * std::max(1.0, b_.cwiseAbs().maxCoeff());
        for (int i = 0; i < n_; ++i) {
            if (xb_(i) < -tol) return false;
            if (basis_[i] >= m_ && xb_(i) > tol) return false;
        }
        return true;
    }

    // phase 1: returns the residual infeasibility sum
    double phase_one() {
        cost_.assign(static_cast<std::size_t>(m_ + n_), 0.0);
        for (int i = 0; i < n_; ++i) cost_[m_ + i] = 1.0;
        allow_artificial_ = true;
        run();
        refactor();
        double r = 0.0;
        for (int i = 0; i < n_; ++i)
            if (basis_[i] >= m_) r += std::max(0.0, xb_(i));
        return r;
    }

    void drive_out_artificials() {
        for (int r = 0; r < n_; ++r) {
            if (basis_[r] < m_) continue;
            for (int j = 0; j < m_; ++j) {
                if (is_basic_[j] >= 0) continue;
                const double a = binv_.row(r).dot(column(j));
                if (std::abs(a) > 1e-7) {
                    pivot(j, r, binv_ * column(j));
                    break;
                }
            }
        }
    }

    Outcome phase_two() {
        cost_.assign(static_cast<std::size_t>(m_ + n_), 0.0);
        for (int j = 0; j < m_; ++j) cost_[j] = -f_.h[j];
        allow_artificial_ = false;
        return run();
    }

    // simplex multipliers pi' = c_B' B^-1 for the current cost vector
    Eigen::VectorXd multipliers() const {
        Eigen::VectorXd cb(n_);
        for (int i = 0; i < n_; ++i) cb(i) = cost_[basis_[i]];
        return binv_.transpose() * cb;
    }

    // multipliers mapped back to the unflipped rows: G_j . q = pi . A_j
    Eigen::VectorXd row_multipliers() const {
        Eigen::VectorXd pi = multipliers();
        for (int i = 0; i < n_; ++i) pi(i) *= sign_[i];
        return pi;
    }

    std::vector<double> solution() const {
        std::vector<double> y(static_cast<std::size_t>(m_), 0.0);
        for (int i = 0; i < n_; ++i)
            if (basis_[i] < m_) y[basis_[i]] = std::max(0.0, xb_(i));
        return y;
    }

    const std::vector<double>& ray() const { return ray_; }
    int iterations() const { return iterations_; }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    Eigen::VectorXd column(int j) const {
        Eigen::VectorXd a(n_);
        if (j < m_) {
            for (int i = 0; i < n_; ++i) a(i) = sign_[i] * f_.g[j][i];
        } else {
            a.setZero();
            a(j - m_) = 1.0;
        }
        return a;
    }

    void pivot(int enter, int r, const Eigen::VectorXd& alpha) {
        const double ar = alpha(r);
        const double step = std::max(0.0, xb_(r)) / ar;
        xb_ -= step * alpha;
        xb_(r) = step;
        Eigen::RowVectorXd prow = binv_.row(r) / ar;
        binv_ -= alpha * prow;
        binv_.row(r) = prow;
        is_basic_[basis_[r]] = -1;
        basis_[r] = enter;
        is_basic_[enter] = r;
        if (++since_refactor_ >= opt_.refactor_every) refactor();
    }

    void refactor() {
        since_refactor_ = 0;
        Eigen::MatrixXd bm(n_, n_);
        for (int i = 0; i < n_; ++i) bm.col(i) = column(basis_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
        const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
        if (!(diag.minCoeff() > 1e-13 * std::max(1.0, diag.maxCoeff())))
            throw LpNumericalFailure("simplex basis became singular");
        binv_ = lu.inverse();
        xb_ = binv_ * b_;
    }

    // Dantzig pricing, switching to Bland's rule (smallest eligible index,
    // smallest basic index among ratio ties) after a run of degenerate
    // pivots; a Harris-style ratio test prefers large pivots otherwise.
    Outcome run() {
        constexpr int kBlandAfter = 50;
        int degenerate = 0;
        for (;;) {
            if (++iterations_ > opt_.max_iterations)
                throw LpNumericalFailure("simplex iteration limit reached (" + std::to_string(opt_.max_iterations) + ")");
            const bool bland = degenerate >= kBlandAfter;
            const Eigen::VectorXd pi = multipliers();
            Eigen::VectorXd q(n_);
            for (int i = 0; i < n_; ++i) q(i) = pi(i) * sign_[i];
            int enter = -1;
            double most = -opt_.optimality_tol;
            const int limit = allow_artificial_ ? m_ + n_ : m_;
            for (int j = 0; j < limit; ++j) {
                if (is_basic_[j] >= 0) continue;
                double d = cost_[j];
                if (j < m_) {
                    const auto& gj = f_.g[j];
                    for (int i = 0; i < n_; ++i) d -= q(i) * gj[i];
                } else {
                    d -= pi(j - m_);
                }
                if (d < most) {
                    enter = j;
                    most = d;
                    if (bland) break;
                }
            }
            if (enter < 0) return Outcome::optimal;

            const Eigen::VectorXd alpha = binv_ * column(enter);
            const double ptol = opt_.pivot_tol * std::max(1.0, alpha.cwiseAbs().maxCoeff());
            double bound = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_; ++i)
                if (alpha(i) > ptol) bound = std::min(bound, (std::max(0.0, xb_(i)) + opt_.feasibility_tol) / alpha(i));
            if (bound == std::numeric_limits<double>::infinity()) {
                ray_.assign(static_cast<std::size_t>(m_), 0.0);
                ray_[enter] = 1.0;
                for (int i = 0; i < n_; ++i)
                    if (basis_[i] < m_) ray_[basis_[i]] = std::max(0.0, -alpha(i));
                return Outcome::unbounded;
            }
            int leave = -1;
            if (bland) {
                double best = std::numeric_limits<double>::infinity();
                for (int i = 0; i < n_; ++i) {
                    if (alpha(i) <= ptol) continue;
                    const double ratio = std::max(0.0, xb_(i)) / alpha(i);
                    if (ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis_[i] < basis_[leave])) {
                        best = std::min(best, ratio);
                        leave = i;
                    }
                }
            } else {
                for (int i = 0; i < n_; ++i)
                    if (alpha(i) > ptol && std::max(0.0, xb_(i)) / alpha(i) <= bound &&
                        (leave < 0 || alpha(i) > alpha(leave)))
                        leave = i;
            }
            const double step = std::max(0.0, xb_(leave)) / alpha(leave);
            degenerate = step * std::abs(most) > 1e-12 ? 0 : degenerate + 1;
            pivot(enter, leave, alpha);
        }
    }

    const GForm& f_;
    LpOptions opt_;
    int n_;
    int m_;
    std::vector<double> sign_;
    Eigen::VectorXd b_;
    Eigen::VectorXd exact_b_;
    std::vector<int> basis_;
    std::vector<int> is_basic_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    std::vector<double> cost_;
    std::vector<double> ray_;
    bool allow_artificial_ = true;
    int since_refactor_ = 0;
    int iterations_ = 0;
};

// maps G-form multipliers y back onto the original rows and bounds
inline void map_duals(const LinearProgram& lp, const GForm& f, const std::vector<double>& y, double osign,
                      std::vector<double>& row_duals, std::vector<double>* reduced) {
    row_duals.assign(static_cast<std::size_t>(lp.row_count()), 0.0);
    if (reduced) reduced->assign(static_cast<std::size_t>(lp.variable_count()), 0.0);
    for (std::size_t k = 0; k < y.size(); ++k) {
        const auto& o = f.origin[k];
        const double v = osign * o.sign * y[k] / o.scale;
        if (!o.bound) row_duals[o.index] += v;
        else if (reduced) (*reduced)[o.index] += v;
    }
}

} // namespace detail

inline LpResult solve(const LinearProgram& lp, const LpOptions& opt = {}) {
    lp.validate();
    const auto f = detail::to_gform(lp);
    const double osign = lp.sense == Sense::maximize ? -1.0 : 1.0;
    const int n = f.n;
    LpResult res;
    res.x.assign(static_cast<std::size_t>(n), 0.0);

    double cscale = 1.0;
    for (double v : f.c) cscale = std::max(cscale, std::abs(v));
    int spent = 0;

    // shrinking perturbations first, then the exact problem
    constexpr double kPerturbation[] = {1e-6, 1e-8, 1e-10, 0.0};
    for (double size : kPerturbation) {
        const bool perturbed = size > 0.0;
        detail::DualSimplex s(f, opt);
        try {
            if (perturbed) s.perturb(size);
            const double residual = s.phase_one();
            if (residual > opt.feasibility_tol * cscale * 10.0) {
                spent += s.iterations();
                if (perturbed) continue;
                // no dual solution: the primal is infeasible or unbounded; the
                // phase-1 multipliers give a direction d with G d >= 0, c'd < 0
                const Eigen::VectorXd q = s.row_multipliers();
                std::vector<double> ray(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) ray[i] = -q(i);
                LinearProgram feas = lp;
                feas.sense = Sense::minimize;
                std::fill(feas.objective.begin(), feas.objective.end(), 0.0);
                LpResult fr = solve(feas, opt);
                if (fr.status == LpStatus::infeasible) {
                    fr.iterations += spent;
                    return fr;
                }
                res.status = LpStatus::unbounded;
                res.x = std::move(fr.x);
                res.ray = std::move(ray);
                res.iterations = fr.iterations + spent;
                return res;
            }
            s.drive_out_artificials();
            auto outcome = s.phase_two();
            if (perturbed && outcome == detail::DualSimplex::Outcome::optimal) {
                if (!s.restore()) {
                    spent += s.iterations();
                    continue;
                }
                outcome = s.phase_two();
            }
            res.iterations = spent + s.iterations();
            if (outcome == detail::DualSimplex::Outcome::unbounded) {
                // bound multipliers are dropped; verify_farkas checks against the box
                res.status = LpStatus::infeasible;
                detail::map_duals(lp, f, s.ray(), 1.0, res.farkas, nullptr);
                return res;
            }
            const Eigen::VectorXd q = s.row_multipliers();
            for (int i = 0; i < n; ++i) res.x[i] = -q(i);
            double v = 0.0;
            for (int j = 0; j < n; ++j) v += lp.objective[j] * res.x[j];
            res.value = v;
            res.status = LpStatus::optimal;
            detail::map_duals(lp, f, s.solution(), osign, res.row_duals, &res.reduced_costs);
            return res;
        } catch (const LpNumericalFailure&) {
            if (!perturbed) throw;
            spent += s.iterations();
        }
    }
    throw LpNumericalFailure("simplex failed to converge");
}

/// Checks an infeasibility certificate: with y following the dual sign
/// convention of a minimization, every feasible x satisfies y'(Ax) >= y'b,
/// so sup over the bound box of (A'y)'x < y'b proves infeasibility.
inline bool verify_farkas(const LinearProgram& lp, const std::vector<double>& y, double tol = 1e-9) {
    if (static_cast<int>(y.size()) != lp.row_count()) return false;
    double yb = 0.0, scale = 0.0;
    for (int i = 0; i < lp.row_count(); ++i) {
        const double yi = y[i];
        if ((lp.relations[i] == Relation::ge && yi < -tol) || (lp.relations[i] == Relation::le && yi > tol)) return false;
        yb += yi * lp.rhs[i];
        scale += std::abs(yi * lp.rhs[i]);
    }
    double sup = 0.0;
    for (int j = 0; j < lp.variable_count(); ++j) {
        double g = 0.0;
        for (int i = 0; i < lp.row_count(); ++i) g += y[i] * lp.rows[i][j];
        scale += std::abs(g);
        if (g > tol) {
            if (lp.upper[j] == LinearProgram::inf) return false;
            sup += g * lp.upper[j];
        } else if (g < -tol) {
            if (lp.lower[j] == -LinearProgram::inf) return false;
            sup += g * lp.lower[j];
        } else {
            sup += std::abs(g) * std::max(std::abs(lp.lower[j] == -LinearProgram::inf ? 0.0 : lp.lower[j]),
                                          std::abs(lp.upper[j] == LinearProgram::inf ? 0.0 : lp.upper[j]));
        }
    }
    return sup < yb - tol * std::max(1.0, scale);
}

} // namespace socsense
