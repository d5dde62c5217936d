// socsense command-line front end.
//
// Exit status: 0 success, 1 domain error, 2 usage or input-format error.
// Errors are reported on stderr as a single JSON object.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "io.hpp"
#include "socsense/diffusion.hpp"
#include "socsense/incest.hpp"
#include "socsense/network.hpp"
#include "socsense/revealed_prefs.hpp"
#include "socsense/sampling.hpp"
#include "socsense/social_learning.hpp"
#include "socsense/timeseries.hpp"

namespace {

using namespace socsense;
using io::json;

/// Bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 1;
    std::string seeds;
    std::string format;
    std::string output;
    bool quiet = false;
};

std::string num(double v) { return fmt::format("{:.12g}", v); }

// JSON numbers rounded to 12 significant digits so dumps are stable.
double r12(double v) { return std::isfinite(v) ? std::stod(num(v)) : v; }

json r12(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(r12(x));
    return a;
}

json r12(const std::vector<std::vector<double>>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(r12(x));
    return a;
}

std::vector<std::uint64_t> seed_list(const Common& c) {
    if (c.seeds.empty()) return {c.seed};
    const auto dots = c.seeds.find("..");
    if (dots == std::string::npos) throw UsageError("--seeds expects a..b");
    std::uint64_t a = 0, b = 0;
    try {
        a = std::stoull(c.seeds.substr(0, dots));
        b = std::stoull(c.seeds.substr(dots + 2));
    } catch (const std::exception&) {
        throw UsageError("--seeds expects a..b with nonnegative integers");
    }
    if (b < a) throw UsageError("--seeds range is empty");
    std::vector<std::uint64_t> out;
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
}

std::string format_of(const Common& c, const char* fallback) { return c.format.empty() ? fallback : c.format; }

void emit(const Common& c, const std::string& text) {
    if (c.output.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(c.output, std::ios::binary);
    if (!out) throw UsageError("cannot write " + c.output);
    out << text;
}

void note(const Common& c, const std::string& msg) {
    if (!c.quiet) std::cerr << msg << '\n';
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Flattens nested JSON into `key,value` rows for --format csv.
void flatten(const json& j, const std::string& prefix, std::string& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
    } else if (j.is_number_float()) {
        out += prefix + "," + num(j.get<double>()) + "\n";
    } else if (j.is_string()) {
        out += prefix + "," + j.get<std::string>() + "\n";
    } else {
        out += prefix + "," + j.dump() + "\n";
    }
}

std::string as_format(const json& j, const std::string& format) {
    if (format == "json") return dump(j);
    std::string out = "key,value\n";
    flatten(j, "", out);
    return out;
}

// --- diffuse -------------------------------------------------------------------

struct DiffuseOpts {
    std::string preset;
    std::string graph = "powerlaw";
    std::string graph_file;
    int n = 100;
    double exponent = 2.0;
    int min_degree = 2;
    int max_degree = 17;
    double edge_prob = 0.05;
    std::string kernel = "adoption";
    std::vector<double> thresholds{1.0, 10.0};
    double failure_prob = 0.3;
    double p01 = 0.1;
    double p10 = 0.1;
    int steps = 700;
    double initial_fraction = 0.05;
    std::vector<std::string> switches{"200:1", "500:0"};
};

Graph diffuse_graph(const DiffuseOpts& o, std::uint64_t seed) {
    if (!o.graph_file.empty()) {
        std::istringstream in(io::read_file(o.graph_file));
        return read_edge_list(in);
    }
    if (o.graph == "powerlaw") return generate_graph(PowerLaw{o.n, o.exponent, o.max_degree, o.min_degree}, seed);
    if (o.graph == "er") return generate_graph(ErdosRenyi{o.n, o.edge_prob, o.max_degree}, seed);
    throw UsageError("--graph must be powerlaw or er");
}

int run_diffuse(const Common& c, DiffuseOpts o) {
    if (!o.preset.empty()) {
        if (o.preset != "paper-example") throw UsageError("unknown preset '" + o.preset + "'");
        o = DiffuseOpts{};
        o.preset = "paper-example";
    }
    std::vector<std::pair<int, int>> sw;
    for (const auto& s : o.switches) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw UsageError("--switch expects k:state");
        try {
            sw.emplace_back(std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1)));
        } catch (const std::exception&) {
            throw UsageError("--switch expects k:state with integers");
        }
    }
    const auto path = piecewise_schedule(o.steps, 0, sw);
    const auto seeds = seed_list(c);
    const auto format = format_of(c, "csv");

    json summaries = json::array();
    std::string table = "seed,mean_abs_alpha_gap,sup_deviation,clamp_count\n";
    for (auto seed : seeds) {
        const Graph g = diffuse_graph(o, seed);
        const int dmax = g.max_degree();
        TransitionKernel kernel = o.kernel == "adoption" ? adoption_kernel(dmax, o.thresholds, o.failure_prob)
                                  : o.kernel == "constant"
                                      ? constant_kernel(dmax, 1, o.p01, o.p10)
                                      : throw UsageError("--kernel must be adoption or constant");
        for (int s : path)
            if (s < 0 || s >= kernel.state_count())
                throw InvalidArgument("target state " + std::to_string(s) + " has no kernel entry");
        const auto run = track_mean_field(g, kernel, path, o.initial_fraction, o.steps, seed);
        summaries.push_back({{"seed", seed},
                             {"mean_abs_alpha_gap", r12(run.mean_abs_alpha_gap)},
                             {"sup_deviation", r12(run.sup_deviation)},
                             {"clamp_count", run.mf.clamp_count}});
        table += fmt::format("{},{},{},{}\n", seed, num(run.mean_abs_alpha_gap), num(run.sup_deviation),
                             run.mf.clamp_count);
        note(c, fmt::format("seed {}: mean |alpha_sim - alpha_mf| = {}", seed, num(run.mean_abs_alpha_gap)));
        if (seeds.size() > 1) continue;

        if (format == "json") {
            json j = summaries[0];
            j["target"] = run.sim.target;
            j["alpha_sim"] = r12(run.sim.alpha);
            j["alpha_mf"] = r12(run.mf.alpha);
            emit(c, dump(j));
        } else {
            std::string out = "k,s,alpha_sim,alpha_mf";
            for (int d = 1; d <= dmax; ++d) out += fmt::format(",rho_sim_{}", d);
            for (int d = 1; d <= dmax; ++d) out += fmt::format(",rho_mf_{}", d);
            out += '\n';
            for (int k = 0; k <= o.steps; ++k) {
                out += fmt::format("{},{},{},{}", k, run.sim.target[k], num(run.sim.alpha[k]), num(run.mf.alpha[k]));
                for (int d = 1; d <= dmax; ++d) out += "," + num(run.sim.rho[k][d]);
                for (int d = 1; d <= dmax; ++d) out += "," + num(run.mf.rho[k][d]);
                out += '\n';
            }
            emit(c, out);
        }
        return 0;
    }
    emit(c, format == "json" ? dump(summaries) : table);
    return 0;
}

// --- sample --------------------------------------------------------------------

struct SampleOpts {
    std::string graph_file;
    std::string values_file;
    std::string weights_file;
    std::string method = "uniform";
    std::optional<int> degree;
    int samples = 1000;
    int walk_length = 10000;
    std::optional<int> burn_in;
    std::optional<int> start;
};

int run_sample(const Common& c, const SampleOpts& o) {
    std::istringstream gin(io::read_file(o.graph_file));
    const Graph g = read_edge_list(gin);
    const auto vt = io::parse_csv(io::read_file(o.values_file));
    if (vt.header != std::vector<std::string>{"node", "value"}) throw ParseError("values header must be node,value", 1);
    std::vector<int> values(static_cast<std::size_t>(g.node_count()), 0);
    for (std::size_t r = 0; r < vt.rows.size(); ++r) {
        const int m = io::as_int(vt.rows[r][0], vt.lines[r], "node");
        if (m < 0 || m >= g.node_count()) throw ParseError("node id out of range", vt.lines[r]);
        if (values[m] != 0) throw ParseError("duplicate node", vt.lines[r]);
        values[m] = io::as_int(vt.rows[r][1], vt.lines[r], "value");
        if (values[m] < 1) throw ParseError("values must be integers >= 1", vt.lines[r]);
    }
    for (int m = 0; m < g.node_count(); ++m)
        if (values[m] == 0) throw ParseError("no value for node " + std::to_string(m));

    SentimentEstimate est;
    const uint64_t seed = c.seed;
    if (o.method == "uniform") {
        if (!o.degree) throw UsageError("uniform sampling needs --degree");
        est = uniform_sample(g, values, *o.degree, o.samples, seed);
    } else if (o.method == "social") {
        if (o.degree) throw UsageError("social sampling is graph-wide; drop --degree");
        est = social_sample(g, values, o.samples, seed);
    } else if (o.method == "rds") {
        WalkConfig cfg;
        cfg.walk_length = o.walk_length;
        cfg.burn_in = o.burn_in;
        cfg.start_node = o.start;
        if (!o.weights_file.empty()) {
            const auto wt = io::parse_csv(io::read_file(o.weights_file));
            if (wt.header != std::vector<std::string>{"u", "v", "w"}) throw ParseError("weights header must be u,v,w", 1);
            for (std::size_t r = 0; r < wt.rows.size(); ++r)
                cfg.edge_weights.emplace_back(io::as_int(wt.rows[r][0], wt.lines[r], "u"),
                                              io::as_int(wt.rows[r][1], wt.lines[r], "v"), wt.rows[r][2]);
        }
        est = rds_pmf(g, values, o.degree, cfg, seed);
    } else {
        throw UsageError("--method must be uniform, social or rds");
    }
    const auto pool = o.degree ? nodes_with_degree(g, *o.degree) : all_nodes(g);
    const auto census = census_pmf(values, pool, static_cast<int>(est.pmf.size()));
    const double tv = total_variation(est.pmf, census);
    note(c, fmt::format("{} estimate: total variation to census {}", o.method, num(tv)));

    if (format_of(c, "csv") == "json") {
        emit(c, dump({{"method", o.method},
                      {"sample_count", est.sample_count},
                      {"estimate", r12(est.pmf)},
                      {"census", r12(census)},
                      {"total_variation", r12(tv)}}));
    } else {
        std::string out = "y,estimate,census\n";
        for (std::size_t y = 0; y < est.pmf.size(); ++y)
            out += fmt::format("{},{},{}\n", y + 1, num(est.pmf[y]), num(census[y]));
        emit(c, out);
    }
    return 0;
}

// --- learn ---------------------------------------------------------------------

struct LearnOpts {
    std::string config;
    std::string preset;
    std::optional<int> true_state;
    std::optional<int> horizon;
};

io::LearningConfig learning_config(const std::string& config, const std::string& preset) {
    if (!config.empty() && !preset.empty()) throw UsageError("give either --config or --preset");
    if (!preset.empty()) {
        if (preset != "fitted") throw UsageError("unknown preset '" + preset + "'");
        return io::fitted_learning_config();
    }
    if (config.empty()) throw UsageError("--config or --preset is required");
    return io::parse_learning_config(io::parse_json(io::read_file(config)));
}

int run_learn(const Common& c, const LearnOpts& o) {
    auto cfg = learning_config(o.config, o.preset);
    if (o.true_state) cfg.true_state = *o.true_state;
    if (o.horizon) cfg.horizon = *o.horizon;
    const auto seeds = seed_list(c);
    const auto format = format_of(c, "csv");

    if (seeds.size() > 1) {
        json all = json::array();
        std::string table = "seed,cascade_time,final_action\n";
        for (auto seed : seeds) {
            const auto run = run_protocol(cfg.true_state, cfg.model, cfg.costs, cfg.prior, cfg.horizon, seed);
            json ct = run.cascade_time ? json(*run.cascade_time) : json(nullptr);
            all.push_back({{"seed", seed}, {"cascade_time", ct}, {"final_action", run.actions.back()}});
            table += fmt::format("{},{},{}\n", seed, run.cascade_time ? std::to_string(*run.cascade_time) : "",
                                 run.actions.back());
        }
        emit(c, format == "json" ? dump(all) : table);
        return 0;
    }

    const auto run = run_protocol(cfg.true_state, cfg.model, cfg.costs, cfg.prior, cfg.horizon, c.seed);
    note(c, run.cascade_time ? fmt::format("cascade at k = {}", *run.cascade_time) : "no cascade within the horizon");
    if (format == "json") {
        emit(c, dump({{"cascade_time", run.cascade_time ? json(*run.cascade_time) : json(nullptr)},
                      {"observations", run.observations},
                      {"actions", run.actions},
                      {"public_beliefs", r12(run.public_beliefs)}}));
        return 0;
    }
    std::string out = "k,y,a";
    for (std::size_t i = 0; i < cfg.prior.size(); ++i) out += fmt::format(",pi_{}", i);
    out += ",cascaded\n";
    for (int k = 0; k <= cfg.horizon; ++k) {
        out += k == 0 ? "0,," : fmt::format("{},{},{}", k, run.observations[k - 1], run.actions[k - 1]);
        for (double p : run.public_beliefs[k]) out += "," + num(p);
        out += fmt::format(",{}\n", run.cascade_time && k >= *run.cascade_time ? 1 : 0);
    }
    emit(c, out);
    return 0;
}

// --- incest --------------------------------------------------------------------

struct IncestOpts {
    std::string mode;
    std::string dag;
    std::optional<int> node;
    std::string config;
    std::string preset;
    std::string fusion = "fair";
    std::optional<int> true_state;
};

std::string join(const std::vector<int>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return s;
}

int run_incest(const Common& c, const IncestOpts& o) {
    const FlowDag dag = io::parse_dag(io::parse_json(io::read_file(o.dag)));
    const int n_nodes = dag.node_count();
    if (n_nodes == 0) throw ParseError("DAG has no nodes");
    const auto format = format_of(c, "json");

    if (o.mode == "weights") {
        const int n = o.node.value_or(n_nodes - 1);
        if (n < 1 || n >= n_nodes) throw InvalidArgument("node must be in 1.." + std::to_string(n_nodes - 1));
        const auto t = closure(dag);
        const auto sets = neighbor_sets(dag, t, n);
        const auto w = incest_weights(t, n);
        const auto a = achievable(dag, w, n);
        if (format == "json") {
            emit(c, dump({{"node", n},
                          {"history", sets.history},
                          {"full", sets.full},
                          {"weights", r12(w.w)},
                          {"exact", w.is_exact},
                          {"achievable", a.achievable},
                          {"violators", a.violators}}));
        } else {
            std::string out = "m,w,in_history,in_full\n";
            for (int m = 0; m < n; ++m)
                out += fmt::format("{},{},{},{}\n", m, num(w.w[m]), dag.has_edge(m, n) ? 1 : 0, t(m, n) ? 1 : 0);
            emit(c, out);
        }
        return 0;
    }
    if (o.mode == "achievable") {
        json all = json::array();
        std::string out = "node,achievable,violators\n";
        for (int n = 1; n < n_nodes; ++n) {
            const auto a = achievable(dag, n);
            all.push_back({{"node", n}, {"achievable", a.achievable}, {"violators", a.violators}});
            out += fmt::format("{},{},{}\n", n, a.achievable ? 1 : 0, join(a.violators, ';'));
        }
        emit(c, format == "json" ? dump(all) : out);
        return 0;
    }
    if (o.mode == "simulate") {
        auto cfg = learning_config(o.config, o.preset);
        if (o.true_state) cfg.true_state = *o.true_state;
        if (o.fusion != "fair" && o.fusion != "naive") throw UsageError("--fusion must be fair or naive");
        const auto mode = o.fusion == "fair" ? FusionMode::fair : FusionMode::naive;
        const auto run = simulate_reputation(dag, cfg.model, cfg.costs, cfg.prior, cfg.true_state, mode, c.seed);
        if (format == "json") {
            emit(c, dump({{"fusion", o.fusion},
                          {"observations", run.observations},
                          {"actions", run.actions},
                          {"prior_beliefs", r12(run.prior_beliefs)},
                          {"public_beliefs", r12(run.public_beliefs)}}));
            return 0;
        }
        std::string out = "n,agent,epoch,y,a";
        for (std::size_t i = 0; i < cfg.prior.size(); ++i) out += fmt::format(",prior_{}", i);
        for (std::size_t i = 0; i < cfg.prior.size(); ++i) out += fmt::format(",public_{}", i);
        out += '\n';
        for (int n = 0; n < n_nodes; ++n) {
            out += fmt::format("{},{},{},{},{}", n, dag.agent(n), dag.epoch(n), run.observations[n], run.actions[n]);
            for (double p : run.prior_beliefs[n]) out += "," + num(p);
            for (double p : run.public_beliefs[n]) out += "," + num(p);
            out += '\n';
        }
        emit(c, out);
        return 0;
    }
    throw UsageError("incest mode must be weights, achievable or simulate");
}

// --- rp ------------------------------------------------------------------------

struct RpOpts {
    std::string verb;
    std::string input;
    double epsilon = 1e-6;
    int agent = 0;
    std::vector<double> at;
    std::vector<double> price;
    std::vector<double> budgets;
    std::vector<int> goods{1, 2};
};

json certificate_json(const Certificate& cert, const Dataset& data) {
    json j = {{"verdict", cert.feasible ? "feasible" : "infeasible"}, {"epsilon", cert.epsilon}};
    if (cert.feasible) {
        j["u"] = r12(cert.u);
        j["lambda"] = r12(cert.lambda);
        j["max_violation"] = r12(max_certificate_violation(cert, data));
    }
    if (cert.witness) j["witness"] = {{"agent", cert.witness->agent}, {"cycle", cert.witness->cycle}};
    return j;
}

int run_rp(const Common& c, RpOpts o) {
    const Dataset data = io::parse_rp_csv(io::read_file(o.input));
    data.validate();
    const int n = data.agent_count(), m = data.good_count();
    if (o.agent < 0 || o.agent >= n) throw UsageError("--agent must be in 0.." + std::to_string(n - 1));
    json out;

    if (o.verb == "garp") {
        const auto r = garp_check(data, o.agent);
        out = {{"verdict", r.pass ? "pass" : "fail"}, {"agent", o.agent}, {"cycle", r.cycle}};
    } else if (o.verb == "afriat") {
        const Dataset d = n == 1 ? data : data.slice(o.agent);
        out = certificate_json(afriat_feasible(d, o.epsilon), d);
        out["agent"] = o.agent;
    } else if (o.verb == "nash") {
        out = certificate_json(nash_rationality_test(data, o.epsilon), data);
    } else if (o.verb == "utility") {
        const auto cert = nash_rationality_test(data, o.epsilon);
        out = certificate_json(cert, data);
        if (cert.feasible && !o.at.empty()) {
            if (static_cast<int>(o.at.size()) != n * m) throw UsageError(fmt::format("--at needs {} values", n * m));
            out["value"] = r12(build_potential(cert, data)(o.at));
        }
    } else if (o.verb == "predict") {
        if (static_cast<int>(o.price.size()) != m) throw UsageError(fmt::format("--price needs {} values", m));
        if (static_cast<int>(o.budgets.size()) != n) throw UsageError(fmt::format("--budgets needs {} values", n));
        const auto cert = nash_rationality_test(data, o.epsilon);
        if (!cert.feasible) throw InvalidArgument("data are not rationalizable; nothing to predict from");
        const auto p = predict_response(cert, data, o.price, o.budgets);
        out = {{"responses", r12(p.responses)}, {"value", r12(p.value)}};
    } else if (o.verb == "mrs") {
        if (static_cast<int>(o.at.size()) != n * m) throw UsageError(fmt::format("--at needs {} values", n * m));
        if (o.goods.size() != 2) throw UsageError("--goods needs two 1-based indices");
        const auto cert = nash_rationality_test(data, o.epsilon);
        if (!cert.feasible) throw InvalidArgument("data are not rationalizable; no utility to differentiate");
        const auto r = marginal_rate_substitution(build_potential(cert, data), o.at, o.agent, o.goods[0] - 1,
                                                  o.goods[1] - 1, m);
        out = {{"ratio", r12(r.ratio)}, {"smooth", r.smooth}, {"active", r.active}};
    } else {
        throw UsageError("rp verb must be garp, afriat, nash, utility, predict or mrs");
    }
    emit(c, as_format(out, format_of(c, "json")));
    return 0;
}

// --- arx -----------------------------------------------------------------------

struct ArxOpts {
    std::string input;
    std::string preset;
    int na = 1;
    int nb = 1;
    int delay = 0;
    std::optional<int> scan;
    std::optional<int> train;
};

int run_arx(const Common& c, ArxOpts o) {
    const auto tab = io::parse_csv(io::read_file(o.input));
    if (tab.header != std::vector<std::string>{"k", "tau", "rho"}) throw ParseError("header must be k,tau,rho", 1);
    std::vector<double> tau, rho;
    for (const auto& row : tab.rows) {
        tau.push_back(row[1]);
        rho.push_back(row[2]);
    }
    if (!o.preset.empty()) {
        if (o.preset != "two-input") throw UsageError("unknown preset '" + o.preset + "'");
        const auto p = two_input_orders(o.delay);
        o.na = p.na;
        o.nb = p.nb;
    }
    json j;
    if (o.scan) {
        const auto s = delay_scan(tau, rho, o.na, o.nb, *o.scan, o.train);
        o.delay = s.best_delay;
        j["scan"] = {{"best_delay", s.best_delay}, {"validation_rmse", r12(s.validation_rmse)}};
    }
    const int len = static_cast<int>(tau.size());
    const int train = o.train.value_or(len);
    if (train <= 0 || train > len) throw UsageError("--train must be in 1.." + std::to_string(len));
    const std::span<const double> tau_fit(tau.data(), static_cast<std::size_t>(train));
    const std::span<const double> rho_fit(rho.data(), static_cast<std::size_t>(train));
    const ArxModel model = arx_fit(tau_fit, rho_fit, o.na, o.nb, o.delay);
    j["model"] = {{"na", model.na},       {"nb", model.nb},
                  {"delay", model.delay}, {"a", r12(model.a)},
                  {"b", r12(model.b)},    {"intercept", r12(model.intercept)},
                  {"rmse", r12(model.rmse)}, {"residual_variance", r12(model.residual_variance)}};
    note(c, fmt::format("ARX({},{}) delay {}: in-sample RMSE {}", model.na, model.nb, model.delay, num(model.rmse)));

    if (format_of(c, "json") == "json") {
        emit(c, dump(j));
        return 0;
    }
    // free run starts after the training prefix, or after the first full lag window
    const int start = o.train ? train : model.first_index();
    const auto one = arx_predict_one_step(model, tau, rho);
    const auto free = arx_free_run(model, std::span<const double>(tau.data(), static_cast<std::size_t>(start)), rho,
                                   len - start);
    std::string out = "k,tau,one_step,free_run\n";
    for (int k = 0; k < len; ++k) {
        const std::string os = k >= one.first ? num(one.values[k - one.first]) : "";
        const std::string fr = k >= start ? num(free[k - start]) : "";
        out += fmt::format("{},{},{},{}\n", num(tab.rows[k][0]), num(tau[k]), os, fr);
    }
    emit(c, out);
    return 0;
}

void report(const char* kind, const std::string& msg, int line = 0, int column = 0) {
    json j = {{"error", kind}, {"message", msg}};
    if (line > 0) j["line"] = line;
    if (column > 0) j["column"] = column;
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Social sensing toolkit: diffusion, sampling, social learning, incest removal, revealed preferences, ARX"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
        sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("-o,--output", common.output, "Output file (default stdout)");
        sub->add_flag("--quiet", common.quiet, "Suppress progress notes on stderr");
    };

    DiffuseOpts dopt;
    auto* diffuse = app.add_subcommand("diffuse", "SIS simulation against its mean-field approximation");
    add_common(diffuse);
    diffuse->add_option("--seeds", common.seeds, "Seed range a..b; prints one summary row per seed");
    diffuse->add_option("--preset", dopt.preset, "paper-example: switching adoption threshold scenario");
    diffuse->add_option("--graph", dopt.graph, "powerlaw or er")->capture_default_str();
    diffuse->add_option("--graph-file", dopt.graph_file, "Edge list instead of a generated graph");
    diffuse->add_option("--nodes", dopt.n, "Node count")->capture_default_str();
    diffuse->add_option("--exponent", dopt.exponent, "Power-law exponent")->capture_default_str();
    diffuse->add_option("--min-degree", dopt.min_degree)->capture_default_str();
    diffuse->add_option("--max-degree", dopt.max_degree)->capture_default_str();
    diffuse->add_option("--edge-prob", dopt.edge_prob, "Erdos-Renyi edge probability")->capture_default_str();
    diffuse->add_option("--kernel", dopt.kernel, "adoption or constant")->capture_default_str();
    diffuse->add_option("--thresholds", dopt.thresholds, "Adoption threshold C per target state")->delimiter(',');
    diffuse->add_option("--failure-prob", dopt.failure_prob)->capture_default_str();
    diffuse->add_option("--p01", dopt.p01)->capture_default_str();
    diffuse->add_option("--p10", dopt.p10)->capture_default_str();
    diffuse->add_option("--steps", dopt.steps)->capture_default_str();
    diffuse->add_option("--initial-fraction", dopt.initial_fraction)->capture_default_str();
    diffuse->add_option("--switch", dopt.switches, "Target switch k:state (repeatable)");

    SampleOpts sopt;
    auto* sample = app.add_subcommand("sample", "Estimate a sentiment distribution by sampling");
    add_common(sample);
    sample->add_option("--graph-file", sopt.graph_file, "Edge list")->required();
    sample->add_option("--values", sopt.values_file, "CSV node,value")->required();
    sample->add_option("--method", sopt.method, "uniform, social or rds")->capture_default_str();
    sample->add_option("--degree", sopt.degree, "Restrict to one degree class");
    sample->add_option("--samples", sopt.samples)->capture_default_str();
    sample->add_option("--walk-length", sopt.walk_length)->capture_default_str();
    sample->add_option("--burn-in", sopt.burn_in);
    sample->add_option("--start", sopt.start, "RDS seed respondent");
    sample->add_option("--weights", sopt.weights_file, "CSV u,v,w of referral weights");

    LearnOpts lopt;
    auto* learn = app.add_subcommand("learn", "Sequential social learning protocol");
    add_common(learn);
    learn->add_option("--seeds", common.seeds, "Seed range a..b; prints one row per seed");
    learn->add_option("--config", lopt.config, "JSON with B, c, prior, true_state, horizon");
    learn->add_option("--preset", lopt.preset, "fitted: two-state fitted likelihoods");
    learn->add_option("--true-state", lopt.true_state);
    learn->add_option("--horizon", lopt.horizon);

    IncestOpts iopt;
    auto* incest = app.add_subcommand("incest", "Data-incest removal on an information-flow DAG");
    add_common(incest);
    incest->add_option("mode", iopt.mode, "weights, achievable or simulate")->required();
    incest->add_option("--dag", iopt.dag, "DAG JSON file")->required();
    incest->add_option("--node", iopt.node, "Node for weights (default: last)");
    incest->add_option("--config", iopt.config, "Learning JSON for simulate");
    incest->add_option("--preset", iopt.preset, "fitted learning parameters");
    incest->add_option("--fusion", iopt.fusion, "fair or naive")->capture_default_str();
    incest->add_option("--true-state", iopt.true_state);

    RpOpts ropt;
    auto* rp = app.add_subcommand("rp", "Revealed-preference tests");
    add_common(rp);
    rp->add_option("verb", ropt.verb, "garp, afriat, nash, utility, predict or mrs")->required();
    rp->add_option("--input", ropt.input, "CSV t,p_1..p_m,agent,x_1..x_m")->required();
    rp->add_option("--epsilon", ropt.epsilon, "Lower bound on multipliers")->capture_default_str();
    rp->add_option("--agent", ropt.agent, "Agent index (0-based, order of appearance)")->capture_default_str();
    rp->add_option("--at", ropt.at, "Point (agent-major) for utility or mrs")->delimiter(',');
    rp->add_option("--price", ropt.price, "Probe price for predict")->delimiter(',');
    rp->add_option("--budgets", ropt.budgets, "Per-agent budgets for predict")->delimiter(',');
    rp->add_option("--goods", ropt.goods, "Goods j,k (1-based) for mrs")->delimiter(',');

    ArxOpts aopt;
    auto* arx = app.add_subcommand("arx", "Fit and run an ARX model");
    add_common(arx);
    arx->add_option("--input", aopt.input, "CSV k,tau,rho")->required();
    arx->add_option("--preset", aopt.preset, "two-input: na=0, nb=2");
    arx->add_option("--na", aopt.na)->capture_default_str();
    arx->add_option("--nb", aopt.nb)->capture_default_str();
    arx->add_option("--delay", aopt.delay)->capture_default_str();
    arx->add_option("--scan", aopt.scan, "Pick the delay in 0..MAX by holdout RMSE");
    arx->add_option("--train", aopt.train, "Fit on the first N samples only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report("usage", e.what());
        return 2;
    }

    try {
        if (*diffuse) return run_diffuse(common, dopt);
        if (*sample) return run_sample(common, sopt);
        if (*learn) return run_learn(common, lopt);
        if (*incest) return run_incest(common, iopt);
        if (*rp) return run_rp(common, ropt);
        if (*arx) return run_arx(common, aopt);
    } catch (const UsageError& e) {
        report("usage", e.what());
        return 2;
    } catch (const ParseError& e) {
        report(e.kind(), e.what(), e.line(), e.column());
        return 2;
    } catch (const Error& e) {
        report(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        report("internal", e.what());
        return 1;
    }
    return 2;
}
