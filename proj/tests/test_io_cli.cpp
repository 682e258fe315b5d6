#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hiertest/io.hpp"
#include "support.hpp"

using namespace hiertest;
namespace io = hiertest::io;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("hiertest_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void put(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(HIERTEST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

const char* kConfig22 = R"({
  "hierarchy": {
    "patterns": ["y1", "y2"],
    "tree": {"id": "A1.1", "children": [{"id": "y1"}, {"id": "y2"}]},
    "unit_post_cost": 1.0
  },
  "tests": {
    "A1.1": {"beta": 0.5, "cost": 1.0},
    "y1": {"beta": 0.8, "cost": 1.0},
    "y2": {"beta": 0.8, "cost": 1.0}
  }
})";

}  // namespace

TEST_CASE("hierarchy config round trip") {
    io::json j = io::parse_json(R"({
        "patterns": ["y1","y2","y3"],
        "tree": {"id":"root","children":[
            {"id":"mid","children":[{"id":"y1"},{"id":"y2"}]},
            {"id":"y3"}]},
        "unit_post_cost": 0.5})",
                                "test");
    Hierarchy h = io::hierarchy_from_json(j);
    CHECK(h.attr_count() == 5);
    CHECK(h.unit_post_cost == 0.5);
    io::json back = io::hierarchy_to_json(h);
    Hierarchy h2 = io::hierarchy_from_json(back);
    CHECK(h2.attr_count() == h.attr_count());
    for (int a = 0; a < h.attr_count(); ++a) CHECK(h2.attrs[a].name == h.attrs[a].name);
}

TEST_CASE("hierarchy config errors name the offending field") {
    CHECK_THROWS_WITH(io::hierarchy_from_json(io::parse_json(
                          R"({"patterns":["y1"],"tree":{"id":"r","children":[]}})", "t")),
                      Catch::Matchers::ContainsSubstring("empty attribute"));
    CHECK_THROWS_WITH(io::hierarchy_from_json(io::parse_json(
                          R"({"patterns":["y1","y1"],
                              "tree":{"id":"r","children":[{"id":"y1"},{"id":"y2"}]}})",
                          "t")),
                      Catch::Matchers::ContainsSubstring("duplicate"));
    CHECK_THROWS_WITH(io::hierarchy_from_json(io::parse_json(
                          R"({"patterns":["y1","y2"],
                              "tree":{"id":"r","children":[{"id":"y1"},{"id":"y3"}]}})",
                          "t")),
                      Catch::Matchers::ContainsSubstring("y2"));
    CHECK_THROWS_WITH(io::hierarchy_from_json(io::parse_json(
                          R"({"patterns":["y1","y2","y3"],
                              "tree":{"id":"r","children":[{"id":"y1"},{"id":"y2"}]}})",
                          "t")),
                      Catch::Matchers::ContainsSubstring("y3"));
    CHECK_THROWS_AS(io::parse_json("{not json", "cfg"), ConfigError);
}

TEST_CASE("generator configs") {
    Hierarchy d = io::hierarchy_from_json(io::parse_json(R"({"dyadic": 3})", "t"));
    CHECK(d.attr_count() == 7);
    Hierarchy v = io::hierarchy_from_json(io::parse_json(R"({"vine": 4})", "t"));
    CHECK(v.attr_count() == 4);
    CHECK(v.pattern_count() == 1);
}

TEST_CASE("cost model config round trip") {
    io::json j = io::parse_json(
        R"({"gamma":"identity","psi":{"kind":"psi4","lambda":2.0},"c":1.5,"c_star":0.5})", "t");
    CostModel m = io::cost_model_from_json(j);
    CHECK(m.psi.kind == PsiKind::psi4);
    CHECK(m.psi.lambda == 2.0);
    CHECK(m.c == 1.5);
    io::json back = io::cost_model_to_json(m);
    CostModel m2 = io::cost_model_from_json(back);
    CHECK(m2.psi.lambda == 2.0);
    CHECK(m2.c_star == 0.5);

    CHECK_THROWS_AS(io::cost_model_from_json(io::parse_json(R"({"gamma":"nope"})", "t")),
                    ConfigError);
    CostModel tab = io::cost_model_from_json(
        io::parse_json(R"({"gamma":{"table":[1.0,1.8,2.2]}})", "t"));
    CHECK(tab.gamma(3) == 2.2);
}

TEST_CASE("strategy file round trip preserves evaluation") {
    Rng rng(71, 0);
    Hierarchy h = augment(oracle::random_hierarchy(rng, 4), 1.0);
    TestModel t = oracle::random_test_model(rng, h);
    Strategy s = sample_skeleton(h, rng, 0.3, &t.beta);
    io::json j = io::strategy_to_json(s, h);
    Strategy s2 = io::strategy_from_json(j, h);
    CHECK(validate(s2, h).ok());
    CHECK(expected_cost(s2, h, t).total ==
          Catch::Approx(expected_cost(s, h, t).total).margin(1e-15));
    // serialization is deterministic
    CHECK(io::strategy_to_json(s2, h).dump() == j.dump());
}

TEST_CASE("cost report serialization") {
    Hierarchy h = dyadic_hierarchy(2);
    TestModel t = TestModel::from_entries(
        h, {{"A1.1", {0.5, 1.0}}, {"y1", {0.8, 1.0}}, {"y2", {0.8, 1.0}}});
    CostReport r = expected_cost(ctf_strategy(h, t), h, t);
    io::json j = io::cost_report_to_json(r, h);
    CHECK(j["total"].get<double>() == Catch::Approx(2.2));
    std::string csv = io::cost_report_to_csv(r);
    CHECK(csv.find("test_cost,post_cost,total") == 0);
    CHECK(csv.find("2.2") != std::string::npos);
}

TEST_CASE("cli: evaluate end to end") {
    fs::path dir = temp_dir("evaluate");
    put(dir / "config.json", kConfig22);
    // breadth-first CTF strategy written by hand
    put(dir / "strategy.json", R"({
      "attr": "A1.1", "beta": 0.5,
      "on0": {"filtered": []},
      "on1": {"attr": "y1", "beta": 0.8,
              "on0": {"attr": "y2", "beta": 0.8,
                      "on0": {"filtered": []}, "on1": {"filtered": ["y2"]}},
              "on1": {"attr": "y2", "beta": 0.8,
                      "on0": {"filtered": ["y1"]}, "on1": {"filtered": ["y1","y2"]}}}})");
    int rc = run_cli("evaluate --config " + (dir / "config.json").string() + " --strategy " +
                     (dir / "strategy.json").string() + " --out " + dir.string());
    CHECK(rc == 0);
    io::json rep = io::parse_json(slurp(dir / "evaluate_report.json"), "report");
    CHECK(rep["total"].get<double>() == Catch::Approx(2.2).margin(1e-12));
    CHECK(rep["manifest"]["version"].get<std::string>().find("hiertest") == 0);
    std::string csv = slurp(dir / "evaluate_report.csv");
    CHECK(csv.find("test_cost,post_cost,total") != std::string::npos);
}

TEST_CASE("cli: config and validation exit codes") {
    fs::path dir = temp_dir("exitcodes");
    // missing beta for one attribute -> config error (2), message names it
    put(dir / "bad.json", R"({
      "hierarchy": {"patterns":["y1","y2"],
                    "tree":{"id":"A1.1","children":[{"id":"y1"},{"id":"y2"}]}},
      "tests": {"A1.1": {"beta":0.5,"cost":1.0}, "y1": {"beta":0.8,"cost":1.0}}})");
    put(dir / "s.json", R"({"filtered": ["y1","y2"]})");
    CHECK(run_cli("evaluate --config " + (dir / "bad.json").string() + " --strategy " +
                  (dir / "s.json").string() + " --out " + dir.string()) == 2);

    // inconsistent leaf label -> validation error (3)
    put(dir / "config.json", kConfig22);
    put(dir / "wrong.json", R"({
      "attr": "A1.1", "beta": 0.5,
      "on0": {"filtered": ["y1","y2"]},
      "on1": {"filtered": ["y1","y2"]}})");
    CHECK(run_cli("evaluate --config " + (dir / "config.json").string() + " --strategy " +
                  (dir / "wrong.json").string() + " --out " + dir.string()) == 3);

    // dp guard on 16 patterns -> guard error (4)
    put(dir / "big.json", R"({"hierarchy": {"dyadic": 5}, "mode": "variable"})");
    CHECK(run_cli("dp --config " + (dir / "big.json").string() + " --out " + dir.string()) == 4);
}

TEST_CASE("cli: variable ctf on the depth-3 dyadic hierarchy") {
    fs::path dir = temp_dir("ctf");
    put(dir / "config.json", R"({
      "hierarchy": {"dyadic": 3},
      "mode": "variable",
      "cost_model": {"gamma": "identity", "psi": {"kind": "harmonic"}}})");
    CHECK(run_cli("ctf --config " + (dir / "config.json").string() + " --out " + dir.string()) ==
          0);
    io::json rep = io::parse_json(slurp(dir / "ctf_report.json"), "report");
    CHECK(rep["total_cost"].get<double>() == Catch::Approx(1.0).margin(1e-12));
    CHECK(rep["beta_star"]["A1.1"].get<double>() == Catch::Approx(0.4375).margin(1e-12));
    std::string csv = slurp(dir / "ctf_levels.csv");
    CHECK(csv.find("level,scope,beta_star") != std::string::npos);
    CHECK(csv.find("0.4375") != std::string::npos);
}

TEST_CASE("cli: determinism of seeded outputs") {
    fs::path dir = temp_dir("determinism");
    put(dir / "config.json", R"({
      "hierarchy": {"dyadic": 2},
      "augment": true,
      "mode": "variable",
      "cost_model": {"psi": {"kind": "harmonic"}},
      "n": 200, "seed": 12})");
    fs::path out1 = dir / "run1", out2 = dir / "run2";
    CHECK(run_cli("sample --config " + (dir / "config.json").string() + " --out " +
                  out1.string()) == 0);
    CHECK(run_cli("sample --config " + (dir / "config.json").string() + " --out " +
                  out2.string()) == 0);
    CHECK(slurp(out1 / "sample_report.json") == slurp(out2 / "sample_report.json"));
    CHECK(slurp(out1 / "sample_costs.csv") == slurp(out2 / "sample_costs.csv"));
    CHECK(slurp(out1 / "sample_best_strategy.json") == slurp(out2 / "sample_best_strategy.json"));
}

TEST_CASE("cli: vine, check, scan, markov, dp smoke") {
    fs::path dir = temp_dir("smoke");
    CHECK(run_cli("vine --tests 0.2:0.5,0.3:0.9 --cstar 1.0 --out " + dir.string()) == 0);
    io::json vr = io::parse_json(slurp(dir / "vine_report.json"), "vine");
    CHECK(vr["cost"].get<double>() == Catch::Approx(0.37).margin(1e-12));
    CHECK(vr["brute_force_cost"].get<double>() == Catch::Approx(0.37).margin(1e-12));

    put(dir / "check.json", R"({
      "hierarchy": {"dyadic": 2},
      "tests": {"A1.1": {"beta":0.7,"cost":0.5},
                 "y1": {"beta":0.6,"cost":0.5},
                 "y2": {"beta":0.6,"cost":0.5}}})");
    CHECK(run_cli("check --config " + (dir / "check.json").string() + " --out " + dir.string()) ==
          0);
    io::json cr = io::parse_json(slurp(dir / "check_report.json"), "check");
    REQUIRE(cr["reports"].size() == 4);  // prop1, theorem3, corollary1, depth2_iff
    for (const auto& r : cr["reports"]) CHECK(r["holds"].get<bool>());

    put(dir / "scan.json", R"({
      "cost_model": {"psi": {"kind": "psi2"}},
      "scan": {"b_values": [2.0], "points": 50}})");
    CHECK(run_cli("scan --config " + (dir / "scan.json").string() + " --out " + dir.string()) ==
          0);
    io::json sr = io::parse_json(slurp(dir / "scan_report.json"), "scan");
    CHECK(sr["max_delta"].get<double>() > 1e-9);
    std::string surface = slurp(dir / "scan_surface.csv");
    CHECK(surface.find("a,b,x,y,delta") != std::string::npos);

    put(dir / "markov.json", R"({
      "hierarchy": {"dyadic": 3},
      "cost_model": {"psi": {"kind": "harmonic"}},
      "markov": {"beta1": 0.3, "gamma": 0.8, "lambda": 0.3, "n_strategies": 50},
      "n": 5000, "seed": 5})");
    CHECK(run_cli("markov --config " + (dir / "markov.json").string() + " --out " +
                  dir.string()) == 0);
    io::json mr = io::parse_json(slurp(dir / "markov_report.json"), "markov");
    CHECK(mr["ctf_mean"].get<double>() > 0.0);

    put(dir / "dp.json", R"({
      "hierarchy": {"dyadic": 3},
      "mode": "variable",
      "cost_model": {"psi": {"kind": "harmonic"}}})");
    CHECK(run_cli("dp --config " + (dir / "dp.json").string() + " --out " + dir.string()) == 0);
    io::json dr = io::parse_json(slurp(dir / "dp_report.json"), "dp");
    CHECK(dr["cost"].get<double>() == Catch::Approx(1.0).margin(1e-9));

    // harmonic scan stays below tolerance on a reduced default grid
    put(dir / "scan5.json", R"({
      "cost_model": {"psi": {"kind": "harmonic"}},
      "scan": {"points": 50}})");
    CHECK(run_cli("scan --config " + (dir / "scan5.json").string() + " --out " + dir.string()) ==
          0);
    io::json s5 = io::parse_json(slurp(dir / "scan_report.json"), "scan");
    CHECK(s5["max_delta"].get<double>() <= 1e-12);

    // on an instance passing the checkers, dp and ctf totals agree
    CHECK(run_cli("dp --config " + (dir / "check.json").string() + " --out " + dir.string()) ==
          0);
    io::json dfix = io::parse_json(slurp(dir / "dp_report.json"), "dp");
    CHECK(run_cli("ctf --config " + (dir / "check.json").string() + " --out " + dir.string()) ==
          0);
    io::json cfix = io::parse_json(slurp(dir / "ctf_report.json"), "ctf");
    CHECK(dfix["cost"].get<double>() ==
          Catch::Approx(cfix["total_cost"].get<double>()).margin(1e-9));
}

TEST_CASE("atomic write leaves no temp file") {
    fs::path dir = temp_dir("atomic");
    io::write_atomic((dir / "x.json").string(), "{}\n");
    CHECK(fs::exists(dir / "x.json"));
    CHECK_FALSE(fs::exists(dir / "x.json.tmp"));
}
