#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hiertest/hierarchy.hpp"
#include "hiertest/test_model.hpp"

namespace hiertest {

// A strategy is a labeled binary decision tree. Internal nodes carry
// (attribute, power); by convention the left child is taken on answer 0 and
// the right child on answer 1. Leaves store the filtered pattern set as a
// bitmask over pattern indices. No attribute may repeat along a branch, which
// is what makes the product-form evaluation below exact.

struct Strategy {
    struct Node {
        int attr = -1;  // -1 marks a leaf
        double beta = 0.0;
        int on0 = -1, on1 = -1;
        std::uint64_t filtered = 0;  // leaves only
    };

    std::vector<Node> nodes;
    int root = -1;

    bool is_leaf(int i) const { return nodes[i].attr < 0; }
    int size() const { return static_cast<int>(nodes.size()); }

    int add_leaf(std::uint64_t mask) {
        Node n;
        n.filtered = mask;
        nodes.push_back(n);
        return size() - 1;
    }

    int add_test(int attr, double beta, int on0, int on1) {
        Node n;
        n.attr = attr;
        n.beta = beta;
        n.on0 = on0;
        n.on1 = on1;
        nodes.push_back(n);
        return size() - 1;
    }

    static Strategy single_leaf(const Hierarchy& h) {
        Strategy s;
        s.root = s.add_leaf(h.all_mask());
        return s;
    }
};

struct StrategyCheck {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

inline StrategyCheck validate(const Strategy& s, const Hierarchy& h) {
    StrategyCheck out;
    if (s.root < 0 || s.root >= s.size()) {
        out.errors.push_back("missing root node");
        return out;
    }
    std::vector<char> seen(s.nodes.size(), 0);
    struct Rec {
        const Strategy& s;
        const Hierarchy& h;
        StrategyCheck& out;
        std::vector<char>& seen;
        void walk(int i, std::uint64_t branch_attrs_lo, std::uint64_t zero_mask,
                  std::vector<int>& branch) {
            if (i < 0 || i >= s.size()) {
                out.errors.push_back("child index out of range");
                return;
            }
            if (seen[i]) {
                out.errors.push_back("node " + std::to_string(i) + " reached twice (not a tree)");
                return;
            }
            seen[i] = 1;
            const auto& n = s.nodes[i];
            if (n.attr < 0) {
                std::uint64_t expect = h.all_mask() & ~zero_mask;
                if (n.filtered != expect)
                    out.errors.push_back("inconsistent leaf label at node " + std::to_string(i));
                return;
            }
            if (n.attr >= h.attr_count()) {
                out.errors.push_back("unknown attribute id " + std::to_string(n.attr));
                return;
            }
            for (int b : branch)
                if (b == n.attr) {
                    out.errors.push_back("repeated attribute '" + h.attrs[n.attr].name +
                                         "' on a branch");
                    return;
                }
            if (!(n.beta >= 0.0 && n.beta <= 1.0))
                out.errors.push_back("beta outside [0,1] at node " + std::to_string(i));
            else if (h.attrs[n.attr].perfect && n.beta != 1.0)
                out.errors.push_back("perfect test '" + h.attrs[n.attr].name +
                                     "' must have power 1");
            else if (n.beta == 0.0)
                out.warnings.push_back("beta = 0 at node " + std::to_string(i) +
                                       " (0-child unreachable)");
            branch.push_back(n.attr);
            walk(n.on0, branch_attrs_lo, zero_mask | h.attr_mask(n.attr), branch);
            walk(n.on1, branch_attrs_lo, zero_mask, branch);
            branch.pop_back();
        }
    } rec{s, h, out, seen};
    std::vector<int> branch;
    rec.walk(s.root, 0, 0, branch);
    return rec.out;
}

struct CostReport {
    double test_cost = 0.0;
    double post_cost = 0.0;
    double total = 0.0;
    std::vector<double> q;  // performance probability per attribute id
    std::map<std::vector<int>, double> zero_sets;  // covering -> probability
    bool has_zero_sets = false;
    double eq_cover_total = 0.0;  // ratio-weighted covering total (cross-check)
};

namespace detail {

// Shared exact evaluator. beta_of/cost_of map an internal node to the power
// and cost actually charged; leaf_charge maps a leaf mask to its cost.
template <class BetaFn, class CostFn, class LeafFn>
CostReport evaluate_strategy(const Strategy& s, const Hierarchy& h, BetaFn beta_of,
                             CostFn cost_of, LeafFn leaf_charge) {
    CostReport r;
    r.q.assign(h.attr_count(), 0.0);
    struct Item {
        int node;
        double p;
    };
    std::vector<Item> stack{{s.root, 1.0}};
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        const auto& n = s.nodes[it.node];
        if (n.attr < 0) {
            r.post_cost += it.p * leaf_charge(n.filtered);
            continue;
        }
        double b = beta_of(it.node);
        r.test_cost += it.p * cost_of(it.node);
        r.q[n.attr] += it.p;
        if (it.p * b > 0.0) stack.push_back({n.on0, it.p * b});
        if (it.p * (1.0 - b) > 0.0) stack.push_back({n.on1, it.p * (1.0 - b)});
    }
    r.total = r.test_cost + r.post_cost;
    return r;
}

inline void require_valid(const Strategy& s, const Hierarchy& h) {
    StrategyCheck c = validate(s, h);
    if (!c.ok()) throw ValidationError("invalid strategy: " + c.errors.front());
}

}  // namespace detail

/// Exact expected cost under the background distribution, fixed test model.
/// Powers and costs come from the test model; node powers are ignored.
/// With `target` set, the leaf charge is c* per surviving target instead of
/// c* per surviving pattern.
inline CostReport expected_cost(const Strategy& s, const Hierarchy& h, const TestModel& t,
                                std::optional<int> target = std::nullopt) {
    detail::require_valid(s, h);
    double cs = h.unit_post_cost;
    auto leaf = [&](std::uint64_t mask) {
        if (target) return cs * static_cast<double>((mask >> *target) & 1ull);
        return cs * static_cast<double>(std::popcount(mask));
    };
    return detail::evaluate_strategy(
        s, h, [&](int i) { return t.beta[s.nodes[i].attr]; },
        [&](int i) { return t.cost[s.nodes[i].attr]; }, leaf);
}

/// Exact expected cost using the powers stored in the nodes, with test costs
/// derived from the cost model (variable mode).
inline CostReport expected_cost_variable(const Strategy& s, const Hierarchy& h,
                                         const CostModel& m,
                                         std::optional<int> target = std::nullopt) {
    detail::require_valid(s, h);
    double cs = m.effective_c_star();
    auto leaf = [&](std::uint64_t mask) {
        if (target) return cs * static_cast<double>((mask >> *target) & 1ull);
        return cs * static_cast<double>(std::popcount(mask));
    };
    return detail::evaluate_strategy(
        s, h, [&](int i) { return h.attrs[s.nodes[i].attr].perfect ? 1.0 : s.nodes[i].beta; },
        [&](int i) {
            const auto& a = h.attrs[s.nodes[i].attr];
            return a.perfect ? m.effective_c_star()
                             : test_cost(m, a.scope(), s.nodes[i].beta);
        },
        leaf);
}

/// Rewrites a strategy on an augmented hierarchy into no-error form: every
/// leaf with survivors gets a chain of the matching perfect tests appended
/// (skipping any already on the branch).
inline Strategy append_perfect_tests(const Strategy& s, const Hierarchy& h) {
    if (!h.augmented) throw ValidationError("append_perfect_tests requires an augmented hierarchy");
    std::vector<int> perfect_of(h.pattern_count(), -1);
    for (int i = 0; i < h.attr_count(); ++i)
        if (h.attrs[i].perfect) perfect_of[h.attrs[i].lo] = i;

    Strategy out;
    struct Rec {
        const Strategy& s;
        const Hierarchy& h;
        const std::vector<int>& perfect_of;
        Strategy& out;
        int chain(std::uint64_t mask, std::vector<int>& branch) {
            int p = -1;
            std::uint64_t m = mask;
            while (m) {
                int pat = std::countr_zero(m);
                m &= m - 1;
                int pa = perfect_of[pat];
                bool used = false;
                for (int b : branch)
                    if (b == pa) used = true;
                if (!used) {
                    p = pat;
                    break;
                }
            }
            if (p < 0) return out.add_leaf(mask);
            int pa = perfect_of[p];
            branch.push_back(pa);
            int on0 = chain(mask & ~(1ull << p), branch);
            branch.pop_back();
            int on1 = out.add_leaf(mask);  // unreachable: perfect tests answer 0 a.s.
            return out.add_test(pa, 1.0, on0, on1);
        }
        int walk(int i, std::vector<int>& branch) {
            const auto& n = s.nodes[i];
            if (n.attr < 0) return chain(n.filtered, branch);
            branch.push_back(n.attr);
            int on0 = walk(n.on0, branch);
            int on1 = walk(n.on1, branch);
            branch.pop_back();
            return out.add_test(n.attr, n.beta, on0, on1);
        }
    } rec{s, h, perfect_of, out};
    std::vector<int> branch;
    out.root = rec.walk(s.root, branch);
    return out;
}

/// Covering-form evaluation: rewrites to no-error form, computes the zero-set
/// distribution over coverings, and cross-checks the ratio-weighted covering
/// total against the direct recursion.
inline CostReport covering_decomposition(const Strategy& s, const Hierarchy& h,
                                         const TestModel& t) {
    if (!h.augmented)
        throw ValidationError("covering_decomposition requires an augmented hierarchy");
    detail::require_valid(s, h);
    Strategy ne = append_perfect_tests(s, h);

    CostReport r = expected_cost(s, h, t);
    r.has_zero_sets = true;

    struct Rec {
        const Strategy& s;
        const Hierarchy& h;
        const TestModel& t;
        CostReport& r;
        void walk(int i, double p, std::vector<int>& zeros) {
            if (p <= 0.0) return;
            const auto& n = s.nodes[i];
            if (n.attr < 0) {
                std::uint64_t u = 0;
                for (int a : zeros) u |= h.attr_mask(a);
                if (u != h.all_mask())
                    throw ValidationError("covering_decomposition: reachable leaf not covered");
                std::vector<int> key = zeros;
                std::sort(key.begin(), key.end());
                r.zero_sets[key] += p;
                return;
            }
            double b = t.beta[n.attr];
            zeros.push_back(n.attr);
            walk(n.on0, p * b, zeros);
            zeros.pop_back();
            walk(n.on1, p * (1.0 - b), zeros);
        }
    } rec{ne, h, t, r};
    std::vector<int> zeros;
    rec.walk(ne.root, 1.0, zeros);

    double cover_total = 0.0;
    for (const auto& [zs, p] : r.zero_sets) {
        double ratios = 0.0;
        for (int a : zs) ratios += t.cost[a] / t.beta[a];
        cover_total += p * ratios;
    }
    r.eq_cover_total = cover_total;
    if (std::fabs(cover_total - r.total) > tol().identity_check)
        throw ValidationError("covering decomposition mismatch: " + format_full(cover_total) +
                              " vs " + format_full(r.total));
    return r;
}

/// True iff for every positive-probability outcome vector the reached leaf's
/// filtered set equals the all-tests filtered set. Perfect tests answer 0
/// almost surely, so their outcome is pinned; all other attributes range over
/// both answers.
inline bool is_complete(const Strategy& s, const Hierarchy& h, int guard = 20) {
    int n = h.attr_count();
    if (n > guard)
        throw GuardError("is_complete: " + std::to_string(n) + " attributes exceeds guard " +
                         std::to_string(guard));
    detail::require_valid(s, h);
    std::uint64_t all = h.all_mask();
    std::vector<int> free_attrs;
    for (int a = 0; a < n; ++a)
        if (!h.attrs[a].perfect) free_attrs.push_back(a);
    int k = static_cast<int>(free_attrs.size());
    for (std::uint64_t bits = 0; bits < (1ull << k); ++bits) {
        std::uint64_t v = 0;
        for (int i = 0; i < k; ++i)
            if ((bits >> i) & 1ull) v |= 1ull << free_attrs[i];
        std::uint64_t full = all;
        for (int a = 0; a < n; ++a)
            if (!((v >> a) & 1ull)) full &= ~h.attr_mask(a);
        int i = s.root;
        while (!s.is_leaf(i)) {
            const auto& node = s.nodes[i];
            i = ((v >> node.attr) & 1ull) ? node.on1 : node.on0;
        }
        if (s.nodes[i].filtered != full) return false;
    }
    return true;
}

/// Usage-based testing cost: -sum q log q + Q log(Q/R) with Q = sum q.
/// Natural log by default, base 2 behind the flag. Requires a complete
/// strategy (verified when the hierarchy is small enough to enumerate).
inline double usage_cost(const Strategy& s, const Hierarchy& h, const TestModel& t, double R,
                         bool log_base2 = false) {
    if (!(R > 0.0 && R <= 1.0)) throw ValidationError("usage_cost: R must lie in (0,1]");
    detail::require_valid(s, h);
    if (h.attr_count() <= 20 && !is_complete(s, h))
        throw ValidationError("usage_cost: strategy is not complete");
    CostReport r = detail::evaluate_strategy(
        s, h, [&](int i) { return t.beta[s.nodes[i].attr]; }, [](int) { return 0.0; },
        [](std::uint64_t) { return 0.0; });
    double Q = 0.0, ent = 0.0;
    for (double q : r.q) {
        Q += q;
        if (q > 0.0) ent -= q * std::log(q);
    }
    double cost = ent + (Q > 0.0 ? Q * std::log(Q / R) : 0.0);
    if (log_base2) cost /= std::log(2.0);
    return cost;
}

}  // namespace hiertest
