// hiertest command-line driver: config ingestion, experiment execution,
// reproducible outputs. Exit codes: 0 ok, 2 config error, 3 validation error,
// 4 size guard exceeded.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hiertest/hiertest.hpp"
#include "hiertest/io.hpp"

namespace ht = hiertest;
using ht::io::json;

namespace {

struct Ctx {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "json";
    std::string strategy_path;
    std::string vine_tests;
    double vine_cstar = 1.0;
    bool log2 = false;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> gen_dyadic, gen_vine;  // hierarchy generators

    std::string command;
    std::string config_text;
    json cfg;

    void load_config() {
        if (config_path.empty() && (gen_dyadic || gen_vine)) {
            cfg = json::object();  // generator-only invocation
            config_text = "";
            return;
        }
        if (config_path.empty()) throw ht::ConfigError("--config is required for this command");
        config_text = ht::io::read_file(config_path);
        cfg = ht::io::parse_json(config_text, config_path);
    }

    std::uint64_t seed(bool required) const {
        if (seed_override) return *seed_override;
        if (cfg.contains("seed")) return cfg["seed"].get<std::uint64_t>();
        if (required) throw ht::ConfigError("seed: required (config field or --seed)");
        return 0;
    }

    ht::Hierarchy hierarchy(bool auto_augment = false,
                            std::optional<double> c_star = std::nullopt) const {
        ht::Hierarchy h;
        if (gen_dyadic)
            h = ht::dyadic_hierarchy(*gen_dyadic);
        else if (gen_vine)
            h = ht::vine_hierarchy(*gen_vine);
        else if (cfg.contains("hierarchy"))
            h = ht::io::hierarchy_from_json(cfg["hierarchy"]);
        else
            throw ht::ConfigError("hierarchy: block missing (or pass --dyadic/--vine)");
        bool want_aug = cfg.value("augment", false) || auto_augment;
        if (want_aug && !h.augmented)
            h = ht::augment(h, c_star.value_or(h.unit_post_cost));
        return h;
    }

    ht::CostModel cost_model() const {
        if (!cfg.contains("cost_model")) return ht::CostModel{};
        ht::CostModel m = ht::io::cost_model_from_json(cfg["cost_model"]);
        if (!m.psi.normalized())
            std::fprintf(stderr, "warning: %s has Psi(1) = %s != 1 (non-normalized)\n",
                         m.psi.name().c_str(), ht::format_full(m.psi(1.0)).c_str());
        return m;
    }

    ht::TestModel tests(const ht::Hierarchy& h) const {
        if (!cfg.contains("tests")) throw ht::ConfigError("tests: block missing (fixed mode)");
        return ht::io::test_model_from_json(cfg["tests"], h);
    }

    std::string mode() const {
        if (cfg.contains("mode")) return cfg["mode"].get<std::string>();
        return cfg.contains("tests") ? "fixed" : "variable";
    }

    std::optional<int> target(const ht::Hierarchy& h) const {
        if (!cfg.contains("single_target")) return std::nullopt;
        std::string name = cfg["single_target"].get<std::string>();
        for (int p = 0; p < h.pattern_count(); ++p)
            if (h.patterns[p] == name) return p;
        throw ht::ConfigError("single_target: unknown pattern '" + name + "'");
    }

    json with_manifest(json j, std::optional<std::uint64_t> used_seed = std::nullopt) const {
        json out;
        out["manifest"] = ht::io::manifest(command, config_text, used_seed);
        for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
        return out;
    }

    std::string csv_manifest(std::optional<std::uint64_t> used_seed = std::nullopt) const {
        return "# manifest: " + ht::io::manifest(command, config_text, used_seed).dump() + "\n";
    }

    void emit_json(const std::string& name, const json& j) const {
        ht::io::write_atomic(out_dir + "/" + name, j.dump(2) + "\n");
        std::printf("wrote %s/%s\n", out_dir.c_str(), name.c_str());
    }

    void emit_csv(const std::string& name, const std::string& body,
                  std::optional<std::uint64_t> used_seed = std::nullopt) const {
        ht::io::write_atomic(out_dir + "/" + name, csv_manifest(used_seed) + body);
        std::printf("wrote %s/%s\n", out_dir.c_str(), name.c_str());
    }

    /// stdout summary in the requested format (CSV falls back to JSON when a
    /// command has no tabular form).
    void finish(const json& j, const std::string& csv = "") const {
        if (format == "csv" && !csv.empty())
            std::fputs(csv.c_str(), stdout);
        else
            std::printf("%s\n", j.dump(2).c_str());
    }
};

int cmd_evaluate(Ctx& ctx) {
    ctx.load_config();
    ht::Hierarchy h = ctx.hierarchy();
    ht::TestModel t = ctx.tests(h);
    std::string spath = !ctx.strategy_path.empty()
                            ? ctx.strategy_path
                            : ctx.cfg.value("strategy", std::string());
    if (spath.empty()) throw ht::ConfigError("strategy: file path required (--strategy)");
    ht::Strategy s =
        ht::io::strategy_from_json(ht::io::parse_json(ht::io::read_file(spath), spath), h);
    ht::CostReport rep;
    if (h.augmented && ctx.cfg.value("zero_sets", false))
        rep = ht::covering_decomposition(s, h, t);
    else
        rep = ht::expected_cost(s, h, t, ctx.target(h));
    json j = ht::io::cost_report_to_json(rep, h);
    if (ctx.cfg.contains("R")) {
        bool base2 = ctx.log2 || ctx.cfg.value("log2", false);
        j["usage_cost"] = ht::usage_cost(s, h, t, ctx.cfg["R"].get<double>(), base2);
    }
    ctx.emit_json("evaluate_report.json", ctx.with_manifest(j));
    ctx.emit_csv("evaluate_report.csv", ht::io::cost_report_to_csv(rep));
    ctx.finish(ctx.with_manifest(j), ht::io::cost_report_to_csv(rep));
    return 0;
}

int cmd_ctf(Ctx& ctx) {
    ctx.load_config();
    if (ctx.mode() == "fixed") {
        ht::Hierarchy h = ctx.hierarchy();
        ht::TestModel t = ctx.tests(h);
        double total = ht::ctf_cost_fixed(h, t);
        json j;
        j["mode"] = "fixed";
        j["total_cost"] = total;
        if (!h.augmented) j["false_alarm_prob"] = ht::false_alarm_prob(h, t);
        if (ht::ctf_leaf_estimate(h) <= 200000) {
            ht::Strategy s = ht::ctf_strategy(h, t);
            ht::CostReport rep = ht::expected_cost(s, h, t);
            j["expected_total"] = rep.total;
            ctx.emit_json("ctf_strategy.json", ht::io::strategy_to_json(s, h));
        }
        ctx.emit_json("ctf_report.json", ctx.with_manifest(j));
        ctx.finish(ctx.with_manifest(j));
        return 0;
    }
    ht::CostModel m = ctx.cost_model();
    ht::Hierarchy h = ctx.hierarchy(true, m.effective_c_star());
    ht::CtfResult res = ht::assign_optimal_powers(h, m);
    json j = ht::io::ctf_result_to_json(res, h);
    j["mode"] = "variable";
    ctx.emit_json("ctf_report.json", ctx.with_manifest(j));
    ctx.emit_csv("ctf_levels.csv", ht::io::ctf_levels_to_csv(res));
    if (res.strategy)
        ctx.emit_json("ctf_strategy.json", ht::io::strategy_to_json(*res.strategy, h));
    ctx.finish(ctx.with_manifest(j), ht::io::ctf_levels_to_csv(res));
    return 0;
}

int cmd_check(Ctx& ctx) {
    ctx.load_config();
    ht::Hierarchy h = ctx.hierarchy(true);
    ht::TestModel t = ctx.tests(h);
    json reports = json::array();
    reports.push_back(ht::io::condition_report_to_json(ht::check_prop1(h, t)));
    reports.push_back(ht::io::condition_report_to_json(ht::check_theorem3(h, t)));
    reports.push_back(ht::io::condition_report_to_json(ht::check_corollary1(h, t)));
    // depth-2 characterization applies to a root with two singleton children
    if (h.pattern_count() == 2 && h.roots.size() == 1) {
        int root = h.roots.front();
        const auto& ch = h.attrs[root].children;
        if (ch.size() == 2 && h.attrs[ch[0]].scope() == 1 && h.attrs[ch[1]].scope() == 1) {
            ht::Depth2Instance inst{t.cost[root],  t.beta[root],  t.cost[ch[0]],
                                    t.beta[ch[0]], t.cost[ch[1]], t.beta[ch[1]],
                                    h.unit_post_cost};
            reports.push_back(ht::io::condition_report_to_json(ht::check_depth2_iff(inst)));
        }
    }
    json j;
    j["reports"] = reports;
    ctx.emit_json("check_report.json", ctx.with_manifest(j));
    ctx.finish(ctx.with_manifest(j));
    return 0;
}

int cmd_scan(Ctx& ctx) {
    ctx.load_config();
    ht::PowerFunction psi = ctx.cost_model().psi;
    ht::ScanGrid grid;
    std::size_t random_points = 0;
    if (ctx.cfg.contains("scan")) {
        const auto& sc = ctx.cfg["scan"];
        if (sc.contains("psi"))
            psi = ht::PowerFunction::catalog(sc["psi"].value("kind", "harmonic"),
                                             sc["psi"].value("lambda", 1.0),
                                             sc["psi"].value("mu", 8.0));
        if (sc.contains("b_values")) grid.b_values = sc["b_values"].get<std::vector<double>>();
        grid.a = sc.value("a", 1.0);
        grid.x_max = sc.value("x_max", 10.0);
        grid.y_max = sc.value("y_max", 10.0);
        grid.points = sc.value("points", 200);
        random_points = sc.value("random_points", 0);
    }
    ht::ScanReport rep = ht::switching_scan(psi, grid, true);
    json j = ht::io::scan_report_to_json(rep);
    j["psi"] = psi.name();
    if (random_points > 0) {
        std::uint64_t seed = ctx.seed(true);
        ht::ScanReport rnd = ht::switching_scan_random(psi, random_points, seed);
        j["random"] = ht::io::scan_report_to_json(rnd);
        ctx.emit_json("scan_report.json", ctx.with_manifest(j, seed));
    } else {
        ctx.emit_json("scan_report.json", ctx.with_manifest(j));
    }
    ctx.emit_csv("scan_surface.csv", ht::io::scan_surface_to_csv(rep));
    ctx.finish(ctx.with_manifest(j), ht::io::scan_surface_to_csv(rep));
    return 0;
}

int cmd_sample(Ctx& ctx) {
    ctx.load_config();
    std::uint64_t seed = ctx.seed(true);
    int n = ctx.cfg.value("n", 10000);
    ht::SampleReport rep;
    ht::Hierarchy h;
    if (ctx.mode() == "fixed") {
        h = ctx.hierarchy();
        ht::TestModel t = ctx.tests(h);
        rep = ht::random_sample(h, t, n, seed, ctx.cfg.value("stop_prob", 0.5));
    } else {
        ht::CostModel m = ctx.cost_model();
        h = ctx.hierarchy(true, m.effective_c_star());
        rep = ht::random_sample(h, m, n, seed);
    }
    json j;
    j["n"] = rep.n;
    j["min_cost"] = rep.min_cost;
    j["mean_cost"] = rep.mean_cost;
    j["best_index"] = rep.best_index;
    j["ctf_cost"] = rep.ctf_cost;
    j["min_minus_ctf"] = rep.min_cost - rep.ctf_cost;
    ctx.emit_json("sample_report.json", ctx.with_manifest(j, seed));
    ctx.emit_json("sample_best_strategy.json", ht::io::strategy_to_json(rep.best, h));
    std::string csv = "sample,cost\n";
    for (int i = 0; i < rep.n; ++i)
        csv += std::to_string(i) + "," + ht::format_full(rep.costs[i]) + "\n";
    ctx.emit_csv("sample_costs.csv", csv, seed);
    ctx.finish(ctx.with_manifest(j, seed), csv);
    return 0;
}

int cmd_markov(Ctx& ctx) {
    ctx.load_config();
    if (!ctx.cfg.contains("markov")) throw ht::ConfigError("markov: block missing");
    const auto& mk = ctx.cfg["markov"];
    ht::MarkovField f{mk.value("beta1", 0.5), mk.value("gamma", 0.5), mk.value("lambda", 0.5)};
    std::uint64_t seed = ctx.seed(true);
    std::uint64_t n = ctx.cfg.value("n", 100000);
    int n_strategies = mk.value("n_strategies", 5000);
    double stop_prob = ctx.cfg.value("stop_prob", 0.5);
    ht::CostModel m = ctx.cost_model();
    ht::Hierarchy h = ctx.hierarchy();
    auto marginals = ht::markov_marginals(h, f);
    ht::TestModel tm = ht::TestModel::from_powers(h, m, marginals);
    std::vector<ht::Strategy> strategies;
    strategies.push_back(ht::ctf_strategy(h, tm));
    for (int i = 0; i < n_strategies; ++i) {
        ht::Rng rng(seed ^ 0xa5a5a5a5ull, i + 1);
        strategies.push_back(ht::sample_skeleton(h, rng, stop_prob, &tm.beta));
    }
    ht::MarkovReport rep = ht::markov_simulate(h, f, m, strategies, n, seed);

    std::vector<std::size_t> order(rep.stats.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rep.stats[a].mean < rep.stats[b].mean; });
    std::string csv = "strategy,mean,stderr,rank\n";
    std::vector<int> rank(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r) + 1;
    for (std::size_t i = 0; i < rep.stats.size(); ++i) {
        std::string id = i == 0 ? "ctf" : ("s" + std::to_string(i));
        csv += id + "," + ht::format_full(rep.stats[i].mean) + "," +
               ht::format_full(rep.stats[i].se) + "," + std::to_string(rank[i]) + "\n";
    }
    ctx.emit_csv("markov_report.csv", csv, seed);

    std::size_t best = order.front() == 0 && order.size() > 1 ? order[1] : order.front();
    ht::MarkovStat diff = rep.paired_diff(0, best);
    json j;
    j["n"] = n;
    j["n_strategies"] = n_strategies;
    j["beta1"] = f.beta1;
    j["gamma"] = f.gamma;
    j["lambda"] = f.lambda;
    j["stationary_beta"] = f.stationary();
    j["ctf_mean"] = rep.stats[0].mean;
    j["ctf_se"] = rep.stats[0].se;
    j["best_sampled_index"] = best;
    j["best_sampled_mean"] = rep.stats[best].mean;
    j["best_sampled_se"] = rep.stats[best].se;
    j["ctf_minus_best_mean"] = diff.mean;
    j["ctf_minus_best_se"] = diff.se;
    ctx.emit_json("markov_report.json", ctx.with_manifest(j, seed));
    ctx.finish(ctx.with_manifest(j, seed), csv);
    return 0;
}

int cmd_dp(Ctx& ctx) {
    ctx.load_config();
    ht::DpResult res;
    ht::Hierarchy h;
    if (ctx.mode() == "fixed") {
        h = ctx.hierarchy();
        ht::TestModel t = ctx.tests(h);
        res = ht::exact_optimum_dp(h, t, ctx.target(h));
    } else {
        ht::CostModel m = ctx.cost_model();
        h = ctx.hierarchy(true, m.effective_c_star());
        res = ht::exact_optimum_dp(h, m, ctx.target(h));
    }
    json j;
    j["cost"] = res.cost;
    j["states"] = res.states;
    j["strategy"] = ht::io::strategy_to_json(res.strategy, h);
    ctx.emit_json("dp_report.json", ctx.with_manifest(j));
    ctx.finish(ctx.with_manifest(j));
    return 0;
}

int cmd_vine(Ctx& ctx) {
    if (ctx.vine_tests.empty()) throw ht::ConfigError("--tests is required for vine");
    ht::VineInstance v;
    v.c_star = ctx.vine_cstar;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        auto colon = cur.find(':');
        if (colon == std::string::npos)
            throw ht::ConfigError("--tests: expected c:b pairs, got '" + cur + "'");
        v.tests.push_back(
            {std::stod(cur.substr(0, colon)), std::stod(cur.substr(colon + 1))});
        cur.clear();
    };
    for (char c : ctx.vine_tests) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    ht::VineOrder best = ht::optimal_order(v);
    json j;
    json order = json::array();
    for (int i : best.order)
        order.push_back(i == v.perfect_index() ? json("perfect") : json(i));
    j["order"] = order;
    j["cost"] = best.cost;
    j["zero_weights"] = best.zero_weights;
    if (v.imperfect() <= 8) {
        ht::VineOrder brute = ht::brute_force_order(v);
        j["brute_force_cost"] = brute.cost;
    }
    ctx.config_text = ctx.vine_tests;  // manifest hash covers the inputs
    ctx.emit_json("vine_report.json", ctx.with_manifest(j));
    ctx.finish(ctx.with_manifest(j));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical sequential testing toolkit"};
    app.require_subcommand(1);
    Ctx ctx;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) {
            sub->add_option("--config", ctx.config_path, "JSON experiment config");
            sub->add_option("--dyadic", ctx.gen_dyadic, "use a complete dyadic hierarchy of depth L");
            sub->add_option("--vine", ctx.gen_vine, "use a single-pattern vine of length L");
        }
        sub->add_option("--seed", ctx.seed_override, "seed override");
        sub->add_option("--out", ctx.out_dir, "output directory");
        sub->add_option("--format", ctx.format, "json|csv")
            ->check(CLI::IsMember({"json", "csv"}));
    };

    auto* evaluate = app.add_subcommand("evaluate", "expected cost of a strategy file");
    add_common(evaluate, true);
    evaluate->add_option("--strategy", ctx.strategy_path, "strategy JSON file");
    evaluate->add_flag("--log2", ctx.log2, "usage cost in bits");

    auto* ctf = app.add_subcommand("ctf", "coarse-to-fine strategy and cost");
    add_common(ctf, true);
    auto* check = app.add_subcommand("check", "optimality condition checkers");
    add_common(check, true);
    auto* scan = app.add_subcommand("scan", "switching-property surface scan");
    add_common(scan, true);
    auto* sample = app.add_subcommand("sample", "random strategy sampling");
    add_common(sample, true);
    auto* markov = app.add_subcommand("markov", "Markov-dependency Monte Carlo");
    add_common(markov, true);
    auto* dp = app.add_subcommand("dp", "exact optimum by dynamic programming");
    add_common(dp, true);
    auto* vine = app.add_subcommand("vine", "optimal single-target test ordering");
    add_common(vine, false);
    vine->add_option("--tests", ctx.vine_tests, "comma-separated c:b pairs")->required();
    vine->add_option("--cstar", ctx.vine_cstar, "perfect-test cost");

    try {
        app.parse(argc, argv);
        if (evaluate->parsed()) { ctx.command = "evaluate"; return cmd_evaluate(ctx); }
        if (ctf->parsed()) { ctx.command = "ctf"; return cmd_ctf(ctx); }
        if (check->parsed()) { ctx.command = "check"; return cmd_check(ctx); }
        if (scan->parsed()) { ctx.command = "scan"; return cmd_scan(ctx); }
        if (sample->parsed()) { ctx.command = "sample"; return cmd_sample(ctx); }
        if (markov->parsed()) { ctx.command = "markov"; return cmd_markov(ctx); }
        if (dp->parsed()) { ctx.command = "dp"; return cmd_dp(ctx); }
        if (vine->parsed()) { ctx.command = "vine"; return cmd_vine(ctx); }
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ht::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ht::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 3;
    } catch (const ht::GuardError& e) {
        std::fprintf(stderr, "guard exceeded: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
