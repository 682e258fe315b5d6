#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hiertest/cost_model.hpp"
#include "hiertest/rng.hpp"
#include "hiertest/test_model.hpp"
#include "hiertest/util.hpp"

namespace hiertest {

// Checkers for the optimality conditions. Margins are reported as raw
// distances: slack when the condition holds, violation size when it fails.

struct ConditionReport {
    std::string condition;
    bool holds = false;
    bool applicable = true;
    std::string witness;  // attribute / point where the condition binds or fails
    double margin = 0.0;
    std::vector<std::pair<std::string, double>> details;  // per-attribute slack
};

namespace detail {

inline double ratio_of(const Hierarchy& h, const TestModel& t, int a) {
    if (!(t.beta[a] > 0.0))
        throw ValidationError("ratio undefined: beta = 0 at attribute '" + h.attrs[a].name + "'");
    return t.cost[a] / t.beta[a];
}

}  // namespace detail

/// Every attribute's cost/power ratio at most c* (optimal strategies are then
/// complete). c* = infinity is accepted as an always-holds sentinel.
inline ConditionReport check_prop1(const Hierarchy& h, const TestModel& t) {
    ConditionReport r;
    r.condition = "prop1";
    double cs = h.unit_post_cost;
    double worst = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < h.attr_count(); ++a) {
        if (h.attrs[a].perfect) continue;
        double ratio = detail::ratio_of(h, t, a);
        r.details.emplace_back(h.attrs[a].name, cs - ratio);
        if (ratio > worst) {
            worst = ratio;
            r.witness = h.attrs[a].name;
        }
    }
    r.holds = worst <= cs;
    r.margin = std::isinf(cs) && cs > 0 ? cs : std::fabs(cs - worst);
    return r;
}

/// Ratio of each original attribute at most the summed ratios of its direct
/// children in the augmented hierarchy (sufficient for CTF optimality).
inline ConditionReport check_corollary1(const Hierarchy& h, const TestModel& t) {
    if (!h.augmented) throw ValidationError("check_corollary1 requires an augmented hierarchy");
    ConditionReport r;
    r.condition = "corollary1";
    double worst = std::numeric_limits<double>::infinity();
    for (int a = 0; a < h.attr_count(); ++a) {
        if (h.attrs[a].perfect) continue;
        double ratio = detail::ratio_of(h, t, a);
        double child_sum = 0.0;
        for (int c : h.attrs[a].children) child_sum += detail::ratio_of(h, t, c);
        double slack = child_sum - ratio;
        r.details.emplace_back(h.attrs[a].name, slack);
        if (slack < worst) {
            worst = slack;
            r.witness = h.attrs[a].name;
        }
    }
    r.holds = worst >= 0.0;
    r.margin = std::fabs(worst);
    return r;
}

/// Coarsest-first sufficient condition applied to every subhierarchy: the
/// root ratio of each subhierarchy must not exceed the cheapest covering of
/// its children's spans.
inline ConditionReport check_theorem3(const Hierarchy& h, const TestModel& t) {
    if (!h.augmented) throw ValidationError("check_theorem3 requires an augmented hierarchy");
    ConditionReport r;
    r.condition = "theorem3";
    std::vector<double> best(h.attr_count(), 0.0);
    struct Rec {
        const Hierarchy& h;
        const TestModel& t;
        std::vector<double>& best;
        double go(int a) const {
            double ratio = detail::ratio_of(h, t, a);
            if (h.attrs[a].children.empty()) return best[a] = ratio;
            double sum = 0.0;
            for (int c : h.attrs[a].children) sum += go(c);
            return best[a] = std::min(ratio, sum);
        }
    } rec{h, t, best};
    for (int root : h.roots) rec.go(root);
    double worst = std::numeric_limits<double>::infinity();
    for (int a = 0; a < h.attr_count(); ++a) {
        if (h.attrs[a].perfect) continue;
        double child_best = 0.0;
        for (int c : h.attrs[a].children) child_best += best[c];
        double slack = child_best - detail::ratio_of(h, t, a);
        r.details.emplace_back(h.attrs[a].name, slack);
        if (slack < worst) {
            worst = slack;
            r.witness = h.attrs[a].name;
        }
    }
    r.holds = worst >= 0.0;
    r.margin = std::fabs(worst);
    return r;
}

struct Depth2Instance {
    double c1, b1;    // coarsest attribute
    double cB1, bB1;  // first child
    double cB2, bB2;  // second child
    double c_star = 1.0;
};

/// Exact CTF-optimality characterization for a depth-2 hierarchy, valid when
/// every ratio is at most c* (otherwise reported inapplicable).
inline ConditionReport check_depth2_iff(const Depth2Instance& in) {
    ConditionReport r;
    r.condition = "depth2_iff";
    double r1 = in.c1 / in.b1, rB1 = in.cB1 / in.bB1, rB2 = in.cB2 / in.bB2;
    if (r1 > in.c_star || rB1 > in.c_star || rB2 > in.c_star) {
        r.applicable = false;
        r.witness = "inapplicable: a cost/power ratio exceeds c*";
        return r;
    }
    double lhs = r1;
    double alt1 = in.cB1 / (in.bB1 * in.bB2) + rB2;
    double alt2 = rB1 + in.cB2 / (in.bB1 * in.bB2);
    double rhs = std::min(alt1, alt2);
    r.holds = lhs <= rhs;
    r.margin = std::fabs(rhs - lhs);
    r.witness = alt1 <= alt2 ? "swap B1 first" : "swap B2 first";
    return r;
}

/// Switching inequality gap: Phi_a(x + Phi_b(y-x)) - [Phi_a(x) + Phi_b(Phi_a(y) - Phi_a(x))].
/// Nonpositive means hoisting the coarse test is never worse.
inline double switching_delta(const PowerFunction& psi, double a, double b, double x, double y) {
    if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("switching_delta: a,b must be > 0");
    if (!(y >= x && x >= 0.0)) throw std::invalid_argument("switching_delta: need y >= x >= 0");
    double lhs = phi(psi, a, x + phi(psi, b, y - x));
    double pax = phi(psi, a, x);
    // Phi_a is nondecreasing, so the gap is nonnegative up to rounding.
    double gap = std::max(0.0, phi(psi, a, y) - pax);
    double rhs = pax + phi(psi, b, gap);
    return lhs - rhs;
}

struct ScanPoint {
    double a = 0, b = 0, x = 0, y = 0, delta = 0;
};

struct ScanReport {
    double max_delta = -std::numeric_limits<double>::infinity();
    ScanPoint argmax;
    std::size_t evaluated = 0;
    std::size_t violations = 0;           // delta > 1e-12
    std::size_t violations_b_gt_a = 0;    // violations in the b > a regime
    double psi_deriv0 = 0, psi_deriv1 = 0;  // diagnostics
    std::vector<ScanPoint> surface;       // full grid when requested
};

struct ScanGrid {
    double a = 1.0;
    std::vector<double> b_values = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
    double x_max = 10.0;
    double y_max = 10.0;
    int points = 200;  // per axis
};

/// Grid scan of the switching gap over both regimes (b <= a and b > a);
/// reduction runs in deterministic index order.
inline ScanReport switching_scan(const PowerFunction& psi, const ScanGrid& grid,
                                 bool keep_surface = false) {
    ScanReport rep;
    rep.psi_deriv0 = psi.deriv0();
    rep.psi_deriv1 = psi.deriv1();
    std::size_t nb = grid.b_values.size();
    std::size_t rows = nb * static_cast<std::size_t>(grid.points);
    std::vector<std::vector<ScanPoint>> row_points(rows);
    parallel_for(rows, [&](std::size_t row) {
        std::size_t bi = row / grid.points;
        int xi = static_cast<int>(row % grid.points);
        double b = grid.b_values[bi];
        double x = grid.x_max * xi / (grid.points - 1);
        auto& out = row_points[row];
        for (int yi = 0; yi < grid.points; ++yi) {
            double y = grid.y_max * yi / (grid.points - 1);
            if (y < x) continue;
            out.push_back({grid.a, b, x, y, switching_delta(psi, grid.a, b, x, y)});
        }
    });
    for (const auto& row : row_points)
        for (const auto& p : row) {
            ++rep.evaluated;
            if (p.delta > rep.max_delta) {
                rep.max_delta = p.delta;
                rep.argmax = p;
            }
            if (p.delta > tol().exact) {
                ++rep.violations;
                if (p.b > p.a) ++rep.violations_b_gt_a;
            }
            if (keep_surface) rep.surface.push_back(p);
        }
    return rep;
}

/// Random-point scan; restrict_b_le_a draws b in (0, a] (the coarse-over-fine
/// regime), otherwise b ranges freely.
inline ScanReport switching_scan_random(const PowerFunction& psi, std::size_t n,
                                        std::uint64_t seed, bool restrict_b_le_a = true,
                                        double range = 10.0) {
    ScanReport rep;
    rep.psi_deriv0 = psi.deriv0();
    rep.psi_deriv1 = psi.deriv1();
    std::vector<ScanPoint> pts(n);
    parallel_for(n, [&](std::size_t i) {
        Rng rng(seed, i);
        double a = rng.uniform(1e-6, range);
        double b = restrict_b_le_a ? rng.uniform(1e-6, a) : rng.uniform(1e-6, range);
        double x = rng.uniform(0.0, range);
        double y = x + rng.uniform(0.0, range - x);
        pts[i] = {a, b, x, y, switching_delta(psi, a, b, x, y)};
    });
    for (const auto& p : pts) {
        ++rep.evaluated;
        if (p.delta > rep.max_delta) {
            rep.max_delta = p.delta;
            rep.argmax = p;
        }
        if (p.delta > tol().exact) {
            ++rep.violations;
            if (p.b > p.a) ++rep.violations_b_gt_a;
        }
    }
    return rep;
}

}  // namespace hiertest
