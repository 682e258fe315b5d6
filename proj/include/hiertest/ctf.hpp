#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "hiertest/rng.hpp"
#include "hiertest/strategy.hpp"

namespace hiertest {

// Coarse-to-fine machinery. A CTF strategy tests an attribute iff every
// ancestor has been tested and answered 1; all CTF orders perform the same
// test set, so the closed-form cost below matches the tree evaluation.

enum class CtfOrder { breadth_first, depth_first, shuffled };

/// Number of leaves the materialized CTF tree would have (saturating).
inline double ctf_leaf_estimate(const Hierarchy& h) {
    struct Rec {
        const Hierarchy& h;
        double count(int a) const {
            double prod = 1.0;
            for (int c : h.attrs[a].children) prod *= count(c);
            if (h.attrs[a].children.empty()) prod = 1.0;
            double n = 1.0 + prod;
            return n > 1e18 ? 1e18 : n;
        }
    } rec{h};
    double total = 1.0;
    for (int r : h.roots) total *= rec.count(r);
    return total > 1e18 ? 1e18 : total;
}

/// Builds the CTF strategy tree for a fixed test model. The agenda policy
/// only changes the order in which pending tests are expanded.
inline Strategy ctf_strategy(const Hierarchy& h, const TestModel& t,
                             CtfOrder order = CtfOrder::breadth_first, Rng* rng = nullptr,
                             std::size_t max_nodes = 5'000'000) {
    if (order == CtfOrder::shuffled && rng == nullptr)
        throw std::invalid_argument("shuffled CTF order needs an rng");
    Strategy out;
    struct Rec {
        const Hierarchy& h;
        const TestModel& t;
        Strategy& out;
        CtfOrder order;
        Rng* rng;
        std::size_t max_nodes;
        int build(std::vector<int> agenda, std::uint64_t dead) {
            if (out.nodes.size() > max_nodes)
                throw GuardError("ctf_strategy: tree exceeds node limit");
            if (agenda.empty()) return out.add_leaf(h.all_mask() & ~dead);
            std::size_t pick = 0;
            if (order == CtfOrder::shuffled) pick = rng->below(agenda.size());
            int a = agenda[pick];
            agenda.erase(agenda.begin() + pick);
            int on0 = build(agenda, dead | h.attr_mask(a));
            std::vector<int> grown = agenda;
            if (order == CtfOrder::depth_first)
                grown.insert(grown.begin(), h.attrs[a].children.begin(),
                             h.attrs[a].children.end());
            else
                grown.insert(grown.end(), h.attrs[a].children.begin(), h.attrs[a].children.end());
            int on1 = build(std::move(grown), dead);
            return out.add_test(a, t.beta[a], on0, on1);
        }
    } rec{h, t, out, order, rng, max_nodes};
    out.root = rec.build(std::vector<int>(h.roots.begin(), h.roots.end()), 0);
    return out;
}

/// Closed-form mean CTF cost for a fixed hierarchy:
/// sum_A c(A) prod_{B strictly above A} (1 - beta(B)) + c* E|surviving patterns|.
inline double ctf_cost_fixed(const Hierarchy& h, const TestModel& t) {
    double tests = 0.0, post = 0.0;
    struct Rec {
        const Hierarchy& h;
        const TestModel& t;
        double& tests;
        double& post;
        void walk(int a, double reach) {
            tests += reach * t.cost[a];
            double below = reach * (1.0 - t.beta[a]);
            if (h.attrs[a].children.empty()) {
                post += below;  // leaves are singletons
                return;
            }
            for (int c : h.attrs[a].children) walk(c, below);
        }
    } rec{h, t, tests, post};
    for (int r : h.roots) rec.walk(r, 1.0);
    return tests + h.unit_post_cost * post;
}

/// P0(some pattern survives every test covering it) via the branching-process
/// recursion g(A) = (1-beta(A)) (1 - prod_children (1 - g(child))).
inline double false_alarm_prob(const Hierarchy& h, const TestModel& t) {
    if (h.augmented)
        throw ValidationError("false_alarm_prob expects an unaugmented hierarchy");
    struct Rec {
        const Hierarchy& h;
        const TestModel& t;
        double g(int a) const {
            double miss = 1.0 - t.beta[a];
            if (h.attrs[a].children.empty()) return miss;
            double none = 1.0;
            for (int c : h.attrs[a].children) none *= 1.0 - g(c);
            return miss * (1.0 - none);
        }
    } rec{h, t};
    double none = 1.0;
    for (int r : h.roots) none *= 1.0 - rec.g(r);
    return 1.0 - none;
}

struct CtfLevelRow {
    int level = 0;        // 1-based depth
    bool uniform = true;  // scope and power shared by all attributes at the level
    int scope = 0;
    double beta_star = 0.0;
    double expected_cost = 0.0;  // mean cost of all tests at this level
    double cumulative_cost = 0.0;
};

struct CtfResult {
    std::vector<double> beta_star;     // per attribute (perfect tests: 1)
    std::vector<double> subtree_cost;  // optimized CTF cost below each attribute
    double total_cost = 0.0;
    std::vector<CtfLevelRow> per_level;
    std::optional<Strategy> strategy;  // materialized when small enough
};

/// Optimal power assignment for the CTF strategy on an augmented hierarchy:
/// bottom-up dynamic programming where each attribute's optimized subtree
/// cost feeds its parent through Phi. The resulting power for an attribute
/// depends only on the subhierarchy below it.
inline CtfResult assign_optimal_powers(const Hierarchy& h, const CostModel& m,
                                       std::size_t materialize_limit = 200'000) {
    if (!h.augmented)
        throw ValidationError("assign_optimal_powers requires an augmented hierarchy");
    CtfResult res;
    res.beta_star.assign(h.attr_count(), 1.0);
    res.subtree_cost.assign(h.attr_count(), 0.0);
    struct Rec {
        const Hierarchy& h;
        const CostModel& m;
        CtfResult& res;
        double f(int a) const {
            if (h.attrs[a].perfect) {
                res.subtree_cost[a] = m.effective_c_star();
                return m.effective_c_star();
            }
            double y = 0.0;
            for (int c : h.attrs[a].children) y += f(c);
            double weight = m.a(h.attrs[a].scope());
            PowerChoice pc = optimal_power(m.psi, weight, 0.0, y);
            res.beta_star[a] = pc.beta;
            res.subtree_cost[a] = pc.cost;
            return pc.cost;
        }
    } rec{h, m, res};
    for (int r : h.roots) res.total_cost += rec.f(r);

    // Per-level table with the mean cost of all tests at each depth.
    int depth = h.depth();
    std::vector<double> level_cost(depth, 0.0);
    std::vector<int> level_scope(depth, -1);
    std::vector<double> level_beta(depth, -1.0);
    std::vector<bool> level_uniform(depth, true);
    struct Walk {
        const Hierarchy& h;
        const CostModel& m;
        const CtfResult& res;
        std::vector<double>& cost;
        std::vector<int>& scope;
        std::vector<double>& beta;
        std::vector<bool>& uniform;
        void go(int a, double reach) const {
            int d = h.attrs[a].depth;
            double c = h.attrs[a].perfect
                           ? m.effective_c_star()
                           : test_cost(m, h.attrs[a].scope(), res.beta_star[a]);
            cost[d] += reach * c;
            if (scope[d] < 0) {
                scope[d] = h.attrs[a].scope();
                beta[d] = res.beta_star[a];
            } else if (scope[d] != h.attrs[a].scope() ||
                       std::fabs(beta[d] - res.beta_star[a]) > tol().exact) {
                uniform[d] = false;
            }
            for (int ch : h.attrs[a].children) go(ch, reach * (1.0 - res.beta_star[a]));
        }
    } walk{h, m, res, level_cost, level_scope, level_beta, level_uniform};
    for (int r : h.roots) walk.go(r, 1.0);
    double cum = 0.0;
    for (int d = 0; d < depth; ++d) {
        cum += level_cost[d];
        res.per_level.push_back({d + 1, level_uniform[d], level_uniform[d] ? level_scope[d] : 0,
                                 level_uniform[d] ? level_beta[d] : 0.0, level_cost[d], cum});
    }

    if (ctf_leaf_estimate(h) <= static_cast<double>(materialize_limit)) {
        TestModel tm = TestModel::from_powers(h, m, res.beta_star);
        res.strategy = ctf_strategy(h, tm);
    }
    return res;
}

struct DyadicRow {
    int level = 0;     // hierarchy depth L
    double cost = 0.0; // C_L
    double unit = 0.0; // U_L = C_L / 2^(L-1)
    double beta1 = 0.0;  // optimal root power at depth L
};

/// Depth recursion for complete dyadic hierarchies with identity complexity:
/// C_L = Phi_{2^(L-1)}(2 C_{L-1}) seeded by C_0 = Psi(1)/2; the root power at
/// depth L is (Psi')^{-1}(U_{L-1}).
inline std::vector<DyadicRow> dyadic_recursion(const PowerFunction& psi, int L) {
    if (L < 1) throw std::invalid_argument("dyadic_recursion: L must be >= 1");
    std::vector<DyadicRow> rows;
    double c_prev = psi(1.0) / 2.0;
    double u_prev = psi(1.0);
    for (int l = 1; l <= L; ++l) {
        double a = std::ldexp(1.0, l - 1);  // 2^(l-1)
        double c = phi(psi, a, 2.0 * c_prev);
        double u = c / a;
        rows.push_back({l, c, u, psi.deriv_inverse(u_prev)});
        c_prev = c;
        u_prev = u;
    }
    return rows;
}

/// Conductance of the tree-structured resistor network associated with an
/// augmented hierarchy: each attribute contributes a series resistor of
/// conductance c*Gamma(scope); the bottom row holds the perfect-test
/// resistors of conductance c*. Equals the harmonic-psi CTF cost.
inline double resistor_oracle(const Hierarchy& h, const ComplexityFunction& gamma,
                              double c = 1.0, std::optional<double> c_star = std::nullopt) {
    if (!h.augmented) throw ValidationError("resistor_oracle requires an augmented hierarchy");
    double cs = c_star.value_or(h.unit_post_cost);
    struct Rec {
        const Hierarchy& h;
        const ComplexityFunction& gamma;
        double c, cs;
        double conductance(int a) const {
            if (h.attrs[a].perfect) return cs;
            double parallel = 0.0;  // children in parallel: conductances add
            for (int ch : h.attrs[a].children) parallel += conductance(ch);
            if (parallel <= 0.0) return 0.0;
            double own = c * gamma(h.attrs[a].scope());
            return 1.0 / (1.0 / own + 1.0 / parallel);  // series combination
        }
    } rec{h, gamma, c, cs};
    double total = 0.0;
    for (int r : h.roots) total += rec.conductance(r);
    return total;
}

}  // namespace hiertest
