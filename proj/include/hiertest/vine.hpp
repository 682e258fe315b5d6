#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "hiertest/util.hpp"

namespace hiertest {

// Single-target detection on a vine: the relevant attributes form a chain of
// tests (cost, power), closed by one perfect test of cost c* and power 1.
// Index convention: 0..L-1 are the given tests, index L is the perfect test.

struct VineTest {
    double cost;
    double beta;
};

struct VineInstance {
    std::vector<VineTest> tests;
    double c_star = 1.0;

    int imperfect() const { return static_cast<int>(tests.size()); }
    int perfect_index() const { return imperfect(); }

    double cost_of(int i) const { return i == perfect_index() ? c_star : tests[i].cost; }
    double beta_of(int i) const { return i == perfect_index() ? 1.0 : tests[i].beta; }
    double ratio(int i) const { return cost_of(i) / beta_of(i); }

    void check() const {
        for (const auto& t : tests) {
            if (!(t.beta > 0.0 && t.beta <= 1.0))
                throw ValidationError("vine test powers must lie in (0,1]");
            if (t.cost < 0.0) throw ValidationError("vine test costs must be nonnegative");
        }
        if (c_star < 0.0) throw ValidationError("c_star must be nonnegative");
    }
};

struct VineOrder {
    std::vector<int> order;  // performed tests in order; ends with the perfect one
    double cost = 0.0;
    std::vector<double> zero_weights;  // P(test k is the first to answer 0)
};

/// Expected cost of performing the given ordering, which must end with the
/// perfect test and contain no repeats.
inline VineOrder vine_cost(const VineInstance& v, const std::vector<int>& ordering) {
    v.check();
    if (ordering.empty() || ordering.back() != v.perfect_index())
        throw ValidationError("ordering must end with the perfect test");
    std::vector<char> used(v.imperfect() + 1, 0);
    VineOrder out;
    out.order = ordering;
    double survive = 1.0;
    for (int idx : ordering) {
        if (idx < 0 || idx > v.perfect_index() || used[idx])
            throw ValidationError("malformed ordering");
        used[idx] = 1;
        out.cost += survive * v.cost_of(idx);
        out.zero_weights.push_back(survive * v.beta_of(idx));
        survive *= 1.0 - v.beta_of(idx);
    }
    return out;
}

/// Optimal single-target ordering: stable sort by cost/power ratio, truncated
/// at the perfect test. Ties keep the original index order, which also places
/// ratio-ties with the perfect test ahead of it.
inline VineOrder optimal_order(const VineInstance& v) {
    v.check();
    std::vector<int> idx(v.imperfect() + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return v.ratio(a) < v.ratio(b); });
    std::vector<int> order;
    for (int i : idx) {
        order.push_back(i);
        if (i == v.perfect_index()) break;
    }
    return vine_cost(v, order);
}

/// Exhaustive oracle: every subset of the imperfect tests, every permutation,
/// perfect test last.
inline VineOrder brute_force_order(const VineInstance& v, int guard = 8) {
    v.check();
    int L = v.imperfect();
    if (L > guard)
        throw GuardError("brute_force_order: " + std::to_string(L) + " tests exceeds guard " +
                         std::to_string(guard));
    VineOrder best;
    best.cost = std::numeric_limits<double>::infinity();
    for (unsigned subset = 0; subset < (1u << L); ++subset) {
        std::vector<int> members;
        for (int i = 0; i < L; ++i)
            if ((subset >> i) & 1u) members.push_back(i);
        std::sort(members.begin(), members.end());
        do {
            std::vector<int> order = members;
            order.push_back(v.perfect_index());
            VineOrder cand = vine_cost(v, order);
            if (cand.cost < best.cost) best = cand;
        } while (std::next_permutation(members.begin(), members.end()));
    }
    return best;
}

}  // namespace hiertest
