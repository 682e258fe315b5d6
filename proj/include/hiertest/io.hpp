#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hiertest/ctf.hpp"
#include "hiertest/search.hpp"
#include "hiertest/strategy.hpp"
#include "hiertest/verify.hpp"

namespace hiertest::io {

using json = nlohmann::ordered_json;

// File formats. All emitters use ordered keys and the library's own float
// formatting where text matters, so identical inputs give byte-identical
// outputs.

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Atomic write: temp file in the target directory, then rename.
inline void write_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write file: " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Hierarchy config
// {"patterns": [...], "tree": {"id": ..., "children": [...]}, "unit_post_cost": 1.0}
// Generators: {"dyadic": L} or {"vine": L} in place of patterns/tree.

namespace detail {

inline HierarchySpec tree_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": tree node must be an object");
    if (!j.contains("id") || !j["id"].is_string())
        throw ConfigError(path + ": tree node needs a string 'id'");
    HierarchySpec s;
    s.id = j["id"].get<std::string>();
    if (j.contains("children")) {
        if (!j["children"].is_array())
            throw ConfigError(path + ".children: must be an array");
        if (j["children"].empty())
            throw ConfigError(path + ": empty attribute '" + s.id + "'");
        int i = 0;
        for (const auto& c : j["children"])
            s.children.push_back(tree_from_json(c, path + ".children[" + std::to_string(i++) + "]"));
    }
    return s;
}

}  // namespace detail

inline Hierarchy hierarchy_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("hierarchy: must be an object");
    double cs = j.value("unit_post_cost", 1.0);
    if (j.contains("dyadic")) return dyadic_hierarchy(j["dyadic"].get<int>(), cs);
    if (j.contains("vine")) return vine_hierarchy(j["vine"].get<int>(), cs);
    if (!j.contains("patterns") || !j["patterns"].is_array())
        throw ConfigError("hierarchy.patterns: missing or not an array");
    if (!j.contains("tree")) throw ConfigError("hierarchy.tree: missing");
    HierarchySpec spec = detail::tree_from_json(j["tree"], "hierarchy.tree");
    Hierarchy h = build_hierarchy(spec, cs);
    std::vector<std::string> declared;
    for (const auto& p : j["patterns"]) declared.push_back(p.get<std::string>());
    std::set<std::string> have(h.patterns.begin(), h.patterns.end());
    std::set<std::string> want(declared.begin(), declared.end());
    if (want.size() != declared.size())
        throw ConfigError("hierarchy.patterns: duplicate pattern id");
    for (const auto& p : want)
        if (!have.count(p)) throw ConfigError("hierarchy.patterns: '" + p + "' not a tree leaf");
    for (const auto& p : have)
        if (!want.count(p)) throw ConfigError("hierarchy.tree: leaf '" + p + "' not declared in patterns");
    return h;
}

inline json hierarchy_to_json(const Hierarchy& h) {
    struct Rec {
        const Hierarchy& h;
        json node(int a) const {
            json n;
            n["id"] = h.attrs[a].name;
            if (!h.attrs[a].children.empty()) {
                json kids = json::array();
                for (int c : h.attrs[a].children)
                    if (!h.attrs[c].perfect) kids.push_back(node(c));
                if (!kids.empty()) n["children"] = kids;
            }
            return n;
        }
    } rec{h};
    json j;
    j["patterns"] = h.patterns;
    j["tree"] = rec.node(h.roots.front());
    j["unit_post_cost"] = h.unit_post_cost;
    return j;
}

// ---------------------------------------------------------------------------
// Cost model config
// {"gamma": "identity"|"one"|{"table":[...]}, "psi": {"kind": "...", "lambda":, "mu":},
//  "c": 1.0, "c_star": 1.0}

inline CostModel cost_model_from_json(const json& j) {
    CostModel m;
    if (j.contains("gamma")) {
        const auto& g = j["gamma"];
        if (g.is_string()) {
            std::string s = g.get<std::string>();
            if (s == "identity")
                m.gamma = ComplexityFunction::identity();
            else if (s == "one")
                m.gamma = ComplexityFunction::one();
            else
                throw ConfigError("cost_model.gamma: unknown kind '" + s + "'");
        } else if (g.is_object() && g.contains("table")) {
            m.gamma = ComplexityFunction::table(g["table"].get<std::vector<double>>());
        } else {
            throw ConfigError("cost_model.gamma: expected 'identity', 'one' or {table: [...]}");
        }
    }
    if (j.contains("psi")) {
        const auto& p = j["psi"];
        if (!p.is_object() || !p.contains("kind"))
            throw ConfigError("cost_model.psi: expected {kind: ...}");
        m.psi = PowerFunction::catalog(p["kind"].get<std::string>(), p.value("lambda", 1.0),
                                       p.value("mu", 8.0));
    }
    m.c = j.value("c", 1.0);
    if (j.contains("c_star")) m.c_star = j["c_star"].get<double>();
    if (m.c < 0 || m.effective_c_star() < 0)
        throw ConfigError("cost_model: c and c_star must be nonnegative");
    return m;
}

inline json cost_model_to_json(const CostModel& m) {
    json j;
    if (m.gamma.kind == ComplexityFunction::Kind::table)
        j["gamma"] = json{{"table", m.gamma.values}};
    else
        j["gamma"] = m.gamma.name();
    json p;
    p["kind"] = m.psi.name();
    if (m.psi.kind == PsiKind::psi4) p["lambda"] = m.psi.lambda;
    if (m.psi.kind == PsiKind::psi7) p["mu"] = m.psi.mu;
    j["psi"] = p;
    j["c"] = m.c;
    j["c_star"] = m.effective_c_star();
    return j;
}

// ---------------------------------------------------------------------------
// Test model config: {"A1.1": {"beta": 0.5, "cost": 1.0}, ...}

inline TestModel test_model_from_json(const json& j, const Hierarchy& h) {
    if (!j.is_object()) throw ConfigError("tests: must map attribute names to {beta, cost}");
    std::map<std::string, std::pair<double, double>> entries;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& e = it.value();
        if (!e.is_object() || !e.contains("beta") || !e.contains("cost"))
            throw ConfigError("tests." + it.key() + ": needs beta and cost");
        entries[it.key()] = {e["beta"].get<double>(), e["cost"].get<double>()};
    }
    return TestModel::from_entries(h, entries);
}

// ---------------------------------------------------------------------------
// Strategy files
// node: {"attr": name-or-id, "beta": b, "on0": <node|leaf>, "on1": <node|leaf>}
// leaf: {"filtered": ["y1", ...]}

namespace detail {

inline int strategy_node_from_json(const json& j, const Hierarchy& h, Strategy& s,
                                   const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": strategy node must be an object");
    if (j.contains("filtered")) {
        std::uint64_t mask = 0;
        for (const auto& p : j["filtered"]) {
            std::string name = p.get<std::string>();
            auto it = std::find(h.patterns.begin(), h.patterns.end(), name);
            if (it == h.patterns.end())
                throw ConfigError(path + ".filtered: unknown pattern '" + name + "'");
            mask |= 1ull << (it - h.patterns.begin());
        }
        return s.add_leaf(mask);
    }
    if (!j.contains("attr")) throw ConfigError(path + ": needs 'attr' or 'filtered'");
    int attr;
    if (j["attr"].is_string()) {
        attr = h.find(j["attr"].get<std::string>());
        if (attr < 0)
            throw ConfigError(path + ".attr: unknown attribute '" +
                              j["attr"].get<std::string>() + "'");
    } else {
        attr = j["attr"].get<int>();
    }
    if (!j.contains("on0") || !j.contains("on1"))
        throw ConfigError(path + ": internal node needs on0 and on1");
    double beta = j.value("beta", 0.0);
    int on0 = strategy_node_from_json(j["on0"], h, s, path + ".on0");
    int on1 = strategy_node_from_json(j["on1"], h, s, path + ".on1");
    return s.add_test(attr, beta, on0, on1);
}

inline json strategy_node_to_json(const Strategy& s, const Hierarchy& h, int i) {
    const auto& n = s.nodes[i];
    json j;
    if (n.attr < 0) {
        json f = json::array();
        for (int p = 0; p < h.pattern_count(); ++p)
            if ((n.filtered >> p) & 1ull) f.push_back(h.patterns[p]);
        j["filtered"] = f;
        return j;
    }
    j["attr"] = h.attrs[n.attr].name;
    j["beta"] = n.beta;
    j["on0"] = strategy_node_to_json(s, h, n.on0);
    j["on1"] = strategy_node_to_json(s, h, n.on1);
    return j;
}

}  // namespace detail

inline Strategy strategy_from_json(const json& j, const Hierarchy& h) {
    Strategy s;
    s.root = detail::strategy_node_from_json(j, h, s, "strategy");
    return s;
}

inline json strategy_to_json(const Strategy& s, const Hierarchy& h) {
    return detail::strategy_node_to_json(s, h, s.root);
}

// ---------------------------------------------------------------------------
// Reports

inline json cost_report_to_json(const CostReport& r, const Hierarchy& h) {
    json j;
    j["expected_test_cost"] = r.test_cost;
    j["expected_post_cost"] = r.post_cost;
    j["total"] = r.total;
    json q;
    for (int a = 0; a < h.attr_count(); ++a) q[h.attrs[a].name] = r.q[a];
    j["q"] = q;
    if (r.has_zero_sets) {
        json zs = json::array();
        for (const auto& [cover, p] : r.zero_sets) {
            json names = json::array();
            for (int a : cover) names.push_back(h.attrs[a].name);
            zs.push_back(json{{"covering", names}, {"p", p}});
        }
        j["zero_set_distribution"] = zs;
        j["covering_total"] = r.eq_cover_total;
    }
    return j;
}

inline std::string cost_report_to_csv(const CostReport& r) {
    return "test_cost,post_cost,total\n" + format_full(r.test_cost) + "," +
           format_full(r.post_cost) + "," + format_full(r.total) + "\n";
}

inline json condition_report_to_json(const ConditionReport& r) {
    json j;
    j["condition"] = r.condition;
    j["holds"] = r.holds;
    j["applicable"] = r.applicable;
    j["witness"] = r.witness;
    j["margin"] = r.margin;
    json d = json::array();
    for (const auto& [name, slack] : r.details)
        d.push_back(json{{"attr", name}, {"slack", slack}});
    if (!d.empty()) j["details"] = d;
    return j;
}

inline json ctf_result_to_json(const CtfResult& r, const Hierarchy& h) {
    json j;
    j["total_cost"] = r.total_cost;
    json betas;
    for (int a = 0; a < h.attr_count(); ++a) betas[h.attrs[a].name] = r.beta_star[a];
    j["beta_star"] = betas;
    json costs;
    for (int a = 0; a < h.attr_count(); ++a) costs[h.attrs[a].name] = r.subtree_cost[a];
    j["subtree_cost"] = costs;
    return j;
}

inline std::string ctf_levels_to_csv(const CtfResult& r) {
    std::string out = "level,scope,beta_star,expected_cost,cumulative_cost\n";
    for (const auto& row : r.per_level) {
        out += std::to_string(row.level) + ",";
        out += row.uniform ? std::to_string(row.scope) : std::string("mixed");
        out += ",";
        out += row.uniform ? format_full(row.beta_star) : std::string("mixed");
        out += "," + format_full(row.expected_cost) + "," + format_full(row.cumulative_cost) +
               "\n";
    }
    return out;
}

inline std::string scan_surface_to_csv(const ScanReport& r) {
    std::string out = "a,b,x,y,delta\n";
    for (const auto& p : r.surface)
        out += format_full(p.a) + "," + format_full(p.b) + "," + format_full(p.x) + "," +
               format_full(p.y) + "," + format_full(p.delta) + "\n";
    return out;
}

inline json scan_report_to_json(const ScanReport& r) {
    json j;
    j["max_delta"] = r.max_delta;
    j["argmax"] = json{{"a", r.argmax.a}, {"b", r.argmax.b}, {"x", r.argmax.x},
                       {"y", r.argmax.y}, {"delta", r.argmax.delta}};
    j["evaluated"] = r.evaluated;
    j["violations"] = r.violations;
    j["violations_b_gt_a"] = r.violations_b_gt_a;
    j["psi_deriv_at_0"] = r.psi_deriv0;
    j["psi_deriv_at_1"] = r.psi_deriv1;
    return j;
}

/// Experiment manifest embedded in every output file.
inline json manifest(const std::string& command, const std::string& config_text,
                     std::optional<std::uint64_t> seed) {
    json j;
    j["version"] = std::string("hiertest ") + "0.1.0";
    j["command"] = command;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_text)));
    j["config_hash"] = std::string(hex);
    if (seed) j["seed"] = *seed;
    return j;
}

}  // namespace hiertest::io
