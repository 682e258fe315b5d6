#pragma once

// Test-side oracles and instance generators. Everything here recomputes
// quantities by brute force (outcome enumeration, grid minimization, subset
// scans) independently of the library's recursions.

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <vector>

#include "hiertest/hiertest.hpp"

namespace oracle {

using namespace hiertest;

/// Expected cost by enumerating all outcome vectors over the hierarchy's
/// attributes: weight = product of beta / (1-beta), cost = walk the tree.
inline double enumerate_expected_cost(const Strategy& s, const Hierarchy& h,
                                      const TestModel& t, std::optional<int> target = {}) {
    int n = h.attr_count();
    double total = 0.0;
    for (std::uint64_t v = 0; v < (1ull << n); ++v) {
        double p = 1.0;
        for (int a = 0; a < n; ++a) p *= ((v >> a) & 1ull) ? (1.0 - t.beta[a]) : t.beta[a];
        if (p == 0.0) continue;
        double cost = 0.0;
        int i = s.root;
        while (!s.is_leaf(i)) {
            const auto& node = s.nodes[i];
            cost += t.cost[node.attr];
            i = ((v >> node.attr) & 1ull) ? node.on1 : node.on0;
        }
        std::uint64_t f = s.nodes[i].filtered;
        if (target)
            cost += h.unit_post_cost * static_cast<double>((f >> *target) & 1ull);
        else
            cost += h.unit_post_cost * static_cast<double>(std::popcount(f));
        total += p * cost;
    }
    return total;
}

/// P0(some pattern survives all its tests) by outcome enumeration.
inline double enumerate_false_alarm(const Hierarchy& h, const TestModel& t) {
    int n = h.attr_count();
    double total = 0.0;
    for (std::uint64_t v = 0; v < (1ull << n); ++v) {
        double p = 1.0;
        for (int a = 0; a < n; ++a) p *= ((v >> a) & 1ull) ? (1.0 - t.beta[a]) : t.beta[a];
        if (p == 0.0) continue;
        std::uint64_t surviving = h.all_mask();
        for (int a = 0; a < n; ++a)
            if (!((v >> a) & 1ull)) surviving &= ~h.attr_mask(a);
        if (surviving != 0) total += p;
    }
    return total;
}

/// Grid minimizer of a*Psi(b) + b*x + (1-b)*y over b in [0,1].
inline PowerChoice grid_optimal_power(const PowerFunction& psi, double a, double x, double y,
                                      int points = 200001) {
    double best = std::numeric_limits<double>::infinity();
    double best_b = 0.0;
    for (int i = 0; i < points; ++i) {
        double b = static_cast<double>(i) / (points - 1);
        double c = a * psi(b) + b * x + (1.0 - b) * y;
        if (c < best) {
            best = c;
            best_b = b;
        }
    }
    return {best_b, best};
}

/// Grid maximizer of x*b - Psi(b) over b in [0,1].
inline double grid_psi_star(const PowerFunction& psi, double x, int points = 200001) {
    double best = 0.0;
    for (int i = 0; i < points; ++i) {
        double b = static_cast<double>(i) / (points - 1);
        best = std::max(best, x * b - psi(b));
    }
    return best;
}

/// All antichain coverings by scanning every attribute subset (union equals
/// the pattern set, members pairwise disjoint).
inline std::vector<Covering> subset_scan_coverings(const Hierarchy& h) {
    int n = h.attr_count();
    std::vector<Covering> out;
    for (std::uint64_t sub = 1; sub < (1ull << n); ++sub) {
        std::uint64_t u = 0;
        bool disjoint = true;
        std::vector<int> members;
        for (int a = 0; a < n && disjoint; ++a)
            if ((sub >> a) & 1ull) {
                if (u & h.attr_mask(a)) disjoint = false;
                u |= h.attr_mask(a);
                members.push_back(a);
            }
        if (disjoint && u == h.all_mask()) out.push_back(Covering{members});
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Minimum cost over every strategy on a tiny hierarchy (exhaustive recursion
/// over states and action choices; stopping allowed anywhere).
inline double enumerate_min_cost(const Hierarchy& h, const TestModel& t) {
    struct Rec {
        const Hierarchy& h;
        const TestModel& t;
        double best(std::uint64_t alive, std::uint64_t used) const {
            double b = h.unit_post_cost * static_cast<double>(std::popcount(alive));
            for (int a = 0; a < h.attr_count(); ++a) {
                if ((used >> a) & 1ull) continue;
                if (!(h.attr_mask(a) & alive)) continue;
                double f0 = best(alive & ~h.attr_mask(a), used | (1ull << a));
                double f1 = best(alive, used | (1ull << a));
                b = std::min(b, t.cost[a] + t.beta[a] * f0 + (1.0 - t.beta[a]) * f1);
            }
            return b;
        }
    } rec{h, t};
    return rec.best(h.all_mask(), 0);
}

/// Random nested hierarchy over [lo, hi) patterns (2- or 3-way splits).
inline HierarchySpec random_spec(Rng& rng, int lo, int hi, int& next_id) {
    HierarchySpec s;
    if (hi - lo == 1) {
        s.id = "y" + std::to_string(lo + 1);
        return s;
    }
    s.id = "n" + std::to_string(next_id++);
    int parts = 2 + (hi - lo > 2 ? static_cast<int>(rng.below(2)) : 0);
    parts = std::min(parts, hi - lo);
    std::vector<int> cuts{lo, hi};
    while (static_cast<int>(cuts.size()) < parts + 1) {
        int c = lo + 1 + static_cast<int>(rng.below(hi - lo - 1));
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        s.children.push_back(random_spec(rng, cuts[i], cuts[i + 1], next_id));
    return s;
}

inline Hierarchy random_hierarchy(Rng& rng, int patterns, double c_star = 1.0) {
    int next = 0;
    return build_hierarchy(random_spec(rng, 0, patterns, next), c_star);
}

/// Random fixed test model: beta in (beta_lo, 1], cost in (0, cost_hi].
inline TestModel random_test_model(Rng& rng, const Hierarchy& h, double beta_lo = 0.05,
                                   double cost_hi = 2.0) {
    TestModel t;
    t.beta.assign(h.attr_count(), 1.0);
    t.cost.assign(h.attr_count(), 0.0);
    for (int a = 0; a < h.attr_count(); ++a) {
        if (h.attrs[a].perfect) {
            t.beta[a] = 1.0;
            t.cost[a] = h.unit_post_cost;
        } else {
            t.beta[a] = rng.uniform(beta_lo, 1.0);
            t.cost[a] = rng.uniform(1e-6, cost_hi);
        }
    }
    return t;
}

}  // namespace oracle
