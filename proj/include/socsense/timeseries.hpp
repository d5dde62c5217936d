#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "socsense/error.hpp"

namespace socsense {

/// tau_k = sum_i a_i tau_{k-i} + sum_j b_j rho_{k-delay-j} + d + v_k
/// with i = 1..na and j = 0..nb-1.
struct ArxModel {
    int na = 0;
    int nb = 0;
    int delay = 0;
    std::vector<double> a;
    std::vector<double> b;
    double intercept = 0.0;
    double residual_variance = 0.0;
    double rmse = 0.0;

    /// First k with a complete regressor row.
    int first_index() const { return std::max(na, nb > 0 ? delay + nb - 1 : 0); }

    double predict_at(std::span<const double> tau, std::span<const double> rho, int k) const {
        double v = intercept;
        for (int i = 1; i <= na; ++i) v += a[i - 1] * tau[k - i];
        for (int j = 0; j < nb; ++j) v += b[j] * rho[k - delay - j];
        return v;
    }
};

struct ArxOrders {
    int na;
    int nb;
    int delay;
};

/// Two lagged inputs and no autoregressive part.
constexpr ArxOrders two_input_orders(int delay = 18) { return {0, 2, delay}; }

/// The regressor matrix has linearly dependent columns.
class RankDeficient : public Error {
public:
    RankDeficient(const std::string& what, std::vector<std::string> columns)
        : Error(what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    const char* kind() const noexcept override { return "rank_deficient"; }

private:
    std::vector<std::string> columns_;
};

/// Column names in regressor order: a1..a_na, b0..b_{nb-1}, d.
inline std::vector<std::string> arx_column_names(int na, int nb) {
    std::vector<std::string> names;
    for (int i = 1; i <= na; ++i) names.push_back("a" + std::to_string(i));
    for (int j = 0; j < nb; ++j) names.push_back("b" + std::to_string(j));
    names.push_back("d");
    return names;
}

struct ArxRegression {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<int> targets; ///< time index of each row
};

/// Rows for every k in [begin, end) that has a full set of lags.
inline ArxRegression arx_regression(std::span<const double> tau, std::span<const double> rho, int na, int nb,
                                    int delay, int begin = 0, int end = -1) {
    if (end < 0) end = static_cast<int>(tau.size());
    ArxModel shape;
    shape.na = na;
    shape.nb = nb;
    shape.delay = delay;
    begin = std::max(begin, shape.first_index());
    const int rows = std::max(0, end - begin);
    ArxRegression r{Eigen::MatrixXd(rows, na + nb + 1), Eigen::VectorXd(rows), {}};
    for (int k = begin; k < end; ++k) {
        const int row = k - begin;
        int c = 0;
        for (int i = 1; i <= na; ++i) r.x(row, c++) = tau[k - i];
        for (int j = 0; j < nb; ++j) r.x(row, c++) = rho[k - delay - j];
        r.x(row, c) = 1.0;
        r.y(row) = tau[k];
        r.targets.push_back(k);
    }
    return r;
}

namespace detail {

inline void check_arx_input(std::span<const double> tau, std::span<const double> rho, int na, int nb, int delay) {
    require(na >= 0 && nb >= 0, "ARX orders must be nonnegative");
    require(delay >= 0, "ARX delay must be nonnegative");
    require(tau.size() == rho.size(), "output and input series differ in length");
    const auto need = static_cast<std::size_t>(std::max(na, nb + delay) + 10);
    require(tau.size() > need, "series too short for the requested orders (need more than " +
                                   std::to_string(need) + " samples)");
    for (std::size_t k = 0; k < tau.size(); ++k)
        require(std::isfinite(tau[k]) && std::isfinite(rho[k]), "series contain a non-finite value");
}

inline ArxModel solve_arx(const ArxRegression& r, int na, int nb, int delay) {
    const int p = static_cast<int>(r.x.cols());
    require(r.x.rows() >= p, "fewer regression rows than coefficients");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(r.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        const auto names = arx_column_names(na, nb);
        std::vector<std::string> dropped;
        std::string msg = "regressor matrix is rank deficient; collinear columns:";
        for (Eigen::Index i = qr.rank(); i < p; ++i) {
            dropped.push_back(names[qr.colsPermutation().indices()(i)]);
            msg += " " + dropped.back();
        }
        throw RankDeficient(msg, dropped);
    }
    const Eigen::VectorXd theta = qr.solve(r.y);
    ArxModel m;
    m.na = na;
    m.nb = nb;
    m.delay = delay;
    m.a.assign(theta.data(), theta.data() + na);
    m.b.assign(theta.data() + na, theta.data() + na + nb);
    m.intercept = theta(p - 1);
    const double ssr = (r.y - r.x * theta).squaredNorm();
    const auto rows = static_cast<double>(r.x.rows());
    m.rmse = std::sqrt(ssr / rows);
    m.residual_variance = r.x.rows() > p ? ssr / (rows - p) : 0.0;
    return m;
}

} // namespace detail

/// Ordinary least squares over all complete rows.
inline ArxModel arx_fit(std::span<const double> tau, std::span<const double> rho, int na, int nb, int delay) {
    detail::check_arx_input(tau, rho, na, nb, delay);
    return detail::solve_arx(arx_regression(tau, rho, na, nb, delay), na, nb, delay);
}

inline ArxModel arx_fit(std::span<const double> tau, std::span<const double> rho, ArxOrders o) {
    return arx_fit(tau, rho, o.na, o.nb, o.delay);
}

struct ArxSeries {
    int first = 0;              ///< time index of values[0]
    std::vector<double> values;
};

/// One-step-ahead predictions from the observed lags, k = first_index..L-1.
/// On the fitting data these are the OLS fitted values.
inline ArxSeries arx_predict_one_step(const ArxModel& m, std::span<const double> tau, std::span<const double> rho) {
    detail::require(tau.size() == rho.size(), "output and input series differ in length");
    ArxSeries s{m.first_index(), {}};
    for (int k = s.first; k < static_cast<int>(tau.size()); ++k) s.values.push_back(m.predict_at(tau, rho, k));
    return s;
}

/// Free-run simulation: tau_history seeds the output lags, then predictions
/// are fed back. rho must cover history plus horizon. Returns the horizon
/// values following the history.
inline std::vector<double> arx_free_run(const ArxModel& m, std::span<const double> tau_history,
                                        std::span<const double> rho, int horizon) {
    detail::require(horizon >= 0, "horizon must be nonnegative");
    const auto h = static_cast<int>(tau_history.size());
    detail::require(h >= m.first_index(), "history shorter than the model's lags");
    detail::require(static_cast<int>(rho.size()) >= h + horizon, "input series does not cover the horizon");
    std::vector<double> tau(tau_history.begin(), tau_history.end());
    for (int k = h; k < h + horizon; ++k) tau.push_back(m.predict_at(tau, rho, k));
    return {tau.begin() + h, tau.end()};
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size() && !a.empty(), "rmse needs two equal nonempty series");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

struct DelayScan {
    int best_delay = 0;
    std::vector<double> validation_rmse; ///< per delay; inf if unfittable
};

/// Fits on k < split and scores one-step predictions on k >= split. The
/// split defaults to the first 75% of the series; train_length overrides it.
inline DelayScan delay_scan(std::span<const double> tau, std::span<const double> rho, int na, int nb,
                            int max_delay, std::optional<int> train_length = std::nullopt) {
    detail::require(max_delay >= 0, "max delay must be nonnegative");
    detail::check_arx_input(tau, rho, na, nb, max_delay);
    const int len = static_cast<int>(tau.size());
    const int split = train_length ? *train_length : (3 * len) / 4;
    detail::require(split > 0 && split < len, "training length must leave a validation segment");

    DelayScan out;
    double best = std::numeric_limits<double>::infinity();
    for (int delay = 0; delay <= max_delay; ++delay) {
        double score = std::numeric_limits<double>::infinity();
        try {
            const ArxModel m = detail::solve_arx(arx_regression(tau, rho, na, nb, delay, 0, split), na, nb, delay);
            std::vector<double> pred, actual;
            for (int k = std::max(split, m.first_index()); k < len; ++k) {
                pred.push_back(m.predict_at(tau, rho, k));
                actual.push_back(tau[k]);
            }
            if (!pred.empty()) score = rmse(pred, actual);
        } catch (const InvalidArgument&) {
        } catch (const RankDeficient&) {
        }
        out.validation_rmse.push_back(score);
        if (score < best) {
            best = score;
            out.best_delay = delay;
        }
    }
    return out;
}

} // namespace socsense
