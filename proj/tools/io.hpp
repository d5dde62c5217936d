#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socsense/error.hpp"
#include "socsense/incest.hpp"
#include "socsense/revealed_prefs.hpp"
#include "socsense/social_learning.hpp"

namespace socsense::io {

using nlohmann::json;

/// Relative paths that do not exist are looked up under $SOCSENSE_FIXTURES
/// (a leading "fixtures/" is dropped first), then under the source tree's
/// fixture directory.
inline std::filesystem::path resolve_input(const std::string& name) {
    namespace fs = std::filesystem;
    fs::path p(name);
    if (fs::exists(p) || p.is_absolute()) return p;
    fs::path rest = p;
    if (auto it = p.begin(); it != p.end() && *it == "fixtures") {
        rest.clear();
        for (++it; it != p.end(); ++it) rest /= *it;
    }
    if (const char* env = std::getenv("SOCSENSE_FIXTURES"); env && *env)
        if (fs::exists(fs::path(env) / rest)) return fs::path(env) / rest;
#ifdef SOCSENSE_FIXTURE_DIR
    if (fs::exists(fs::path(SOCSENSE_FIXTURE_DIR) / rest)) return fs::path(SOCSENSE_FIXTURE_DIR) / rest;
#endif
    return p;
}

inline std::string read_file(const std::string& name) {
    const auto path = resolve_input(name);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ParseError(path.string() + " is empty");
    return text;
}

// --- CSV --------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> lines;  ///< source line of each row

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Numeric CSV with a header line. Blank lines and lines starting with '#'
/// are skipped.
inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::vector<std::string> cells;
        std::vector<int> cols;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            cols.push_back(static_cast<int>(start) + 1);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             lineno);
        std::vector<double> row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            char* end = nullptr;
            const double v = std::strtod(cells[i].c_str(), &end);
            if (cells[i].empty() || *end != '\0') throw ParseError("not a number: '" + cells[i] + "'", lineno, cols[i]);
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) throw ParseError("CSV has no header");
    if (t.rows.empty()) throw ParseError("CSV has no data rows");
    return t;
}

inline int as_int(double v, int line, const std::string& what) {
    if (v != static_cast<double>(static_cast<long long>(v))) throw ParseError(what + " must be an integer", line);
    return static_cast<int>(v);
}

/// Revealed-preference rows `t, p_1..p_m, agent, x_1..x_m`, one per (t, agent).
/// Agents and observations are renumbered densely in order of appearance.
inline Dataset parse_rp_csv(const std::string& text) {
    const auto tab = parse_csv(text);
    const int ct = tab.column("t"), ca = tab.column("agent");
    if (ct != 0 || ca < 2) throw ParseError("header must be t, p_1..p_m, agent, x_1..x_m", 1);
    const int m = ca - 1;
    if (static_cast<int>(tab.header.size()) != 2 * m + 2) throw ParseError("price and response columns differ in count", 1);
    for (int j = 0; j < m; ++j)
        if (tab.header[1 + j] != "p_" + std::to_string(j + 1) || tab.header[ca + 1 + j] != "x_" + std::to_string(j + 1))
            throw ParseError("header must be t, p_1..p_m, agent, x_1..x_m", 1);

    std::map<int, int> t_index, a_index;
    std::vector<int> t_order, a_order;
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
        const int t = as_int(tab.rows[r][ct], tab.lines[r], "t");
        const int a = as_int(tab.rows[r][ca], tab.lines[r], "agent");
        if (t_index.emplace(t, static_cast<int>(t_index.size())).second) t_order.push_back(t);
        if (a_index.emplace(a, static_cast<int>(a_index.size())).second) a_order.push_back(a);
    }
    const auto T = t_index.size(), n = a_index.size();
    Dataset d;
    d.prices.assign(T, {});
    d.responses.assign(T, std::vector<Vec>(n));
    std::set<std::pair<int, int>> seen;
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
        const auto& row = tab.rows[r];
        const int t = t_index[static_cast<int>(row[ct])], a = a_index[static_cast<int>(row[ca])];
        if (!seen.emplace(t, a).second) throw ParseError("duplicate (t, agent) row", tab.lines[r]);
        Vec p(row.begin() + 1, row.begin() + 1 + m);
        if (d.prices[t].empty()) {
            d.prices[t] = p;
        } else if (d.prices[t] != p) {
            throw ParseError("prices differ between agents at the same t", tab.lines[r]);
        }
        d.responses[t][a].assign(row.begin() + ca + 1, row.end());
    }
    if (seen.size() != T * n) throw ParseError("every agent needs a row at every t");
    return d;
}

inline std::string format_rp_csv(const Dataset& d) {
    std::ostringstream out;
    out.precision(17);
    const int m = d.good_count();
    out << "t";
    for (int j = 1; j <= m; ++j) out << ",p_" << j;
    out << ",agent";
    for (int j = 1; j <= m; ++j) out << ",x_" << j;
    out << '\n';
    for (int t = 0; t < d.observation_count(); ++t)
        for (int i = 0; i < d.agent_count(); ++i) {
            out << t;
            for (double p : d.prices[t]) out << ',' << p;
            out << ',' << i;
            for (double x : d.responses[t][i]) out << ',' << x;
            out << '\n';
        }
    return out.str();
}

// --- JSON -------------------------------------------------------------------

inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line/column
        int line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError("malformed JSON", line, col);
    }
}

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ParseError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError("missing key '" + std::string(key) + "' in " + where);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError("key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

/// {"nodes": [{"id", "agent", "epoch"}...], "edges": [[j, i]...]}; ids must be
/// 0..n-1 in order.
inline FlowDag parse_dag(const json& j) {
    reject_unknown_keys(j, {"nodes", "edges"}, "DAG file");
    FlowDag dag;
    const auto nodes = get<std::vector<json>>(j, "nodes", "DAG file");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        reject_unknown_keys(nodes[k], {"id", "agent", "epoch"}, "DAG node");
        if (get<int>(nodes[k], "id", "DAG node") != static_cast<int>(k))
            throw ParseError("DAG node ids must be 0..n-1 in order (node " + std::to_string(k) + ")");
        dag.add_node(get<int>(nodes[k], "agent", "DAG node"), get<int>(nodes[k], "epoch", "DAG node"));
    }
    for (const auto& e : get<std::vector<std::pair<int, int>>>(j, "edges", "DAG file")) {
        if (e.first >= e.second)
            throw ParseError("DAG edge [" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                             "] must satisfy j < i");
        dag.add_edge(e.first, e.second);
    }
    return dag;
}

inline json dag_to_json(const FlowDag& dag) {
    json nodes = json::array();
    for (int n = 0; n < dag.node_count(); ++n) nodes.push_back({{"id", n}, {"agent", dag.agent(n)}, {"epoch", dag.epoch(n)}});
    json edges = json::array();
    for (auto [j, i] : dag.edges()) edges.push_back({j, i});
    return {{"nodes", nodes}, {"edges", edges}};
}

/// Learning configuration: B, c, prior, and optionally true_state and horizon.
struct LearningConfig {
    ObservationModel model;
    CostMatrix costs;
    Belief prior;
    int true_state = 0;
    int horizon = 200;
};

inline LearningConfig parse_learning_config(const json& j) {
    reject_unknown_keys(j, {"B", "c", "prior", "true_state", "horizon"}, "learning config");
    LearningConfig cfg;
    cfg.model.b = get<Matrix>(j, "B", "learning config");
    cfg.costs.c = get<Matrix>(j, "c", "learning config");
    if (j.contains("prior")) {
        cfg.prior = get<Belief>(j, "prior", "learning config");
    } else {
        cfg.prior.assign(cfg.model.b.size(), 1.0 / static_cast<double>(cfg.model.b.size()));
    }
    if (j.contains("true_state")) cfg.true_state = get<int>(j, "true_state", "learning config");
    if (j.contains("horizon")) cfg.horizon = get<int>(j, "horizon", "learning config");
    return cfg;
}

/// Two states, two actions, fitted likelihoods and symmetric costs.
inline LearningConfig fitted_learning_config() {
    LearningConfig cfg;
    cfg.model.b = {{0.61, 0.39}, {0.41, 0.59}};
    cfg.costs.c = {{0.0, 2.0}, {2.0, 0.0}};
    cfg.prior = {0.5, 0.5};
    return cfg;
}

} // namespace socsense::io
