#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hiertest/ctf.hpp"
#include "hiertest/rng.hpp"
#include "hiertest/strategy.hpp"

namespace hiertest {

// Ground-truth optimizers and simulators. The DP below minimizes over the
// full strategy family by memoizing on outcome states; it is the oracle the
// CTF results are checked against on small instances.

/// Bottom-up optimal power assignment for a fixed strategy skeleton:
/// children first, then each node's power from its subtree costs. Returns the
/// skeleton with powers filled in plus its optimized mean cost.
struct OptimizedStrategy {
    Strategy strategy;
    double cost = 0.0;
};

inline OptimizedStrategy optimize_powers(const Strategy& skeleton, const Hierarchy& h,
                                         const CostModel& m) {
    OptimizedStrategy out;
    out.strategy = skeleton;
    struct Rec {
        const Hierarchy& h;
        const CostModel& m;
        Strategy& s;
        double walk(int i) {
            auto& n = s.nodes[i];
            if (n.attr < 0)
                return m.effective_c_star() * static_cast<double>(std::popcount(n.filtered));
            double x = walk(n.on0);
            double y = walk(n.on1);
            if (h.attrs[n.attr].perfect) {
                n.beta = 1.0;
                return m.effective_c_star() + x;
            }
            PowerChoice pc = optimal_power_clamped(m.psi, m.a(h.attrs[n.attr].scope()), x, y);
            n.beta = pc.beta;
            return pc.cost;
        }
    } rec{h, m, out.strategy};
    out.cost = rec.walk(out.strategy.root);
    return out;
}

struct DpResult {
    double cost = 0.0;
    Strategy strategy;
    std::size_t states = 0;
};

namespace detail {

struct DpKey {
    std::uint64_t alive, used;
    bool operator==(const DpKey& o) const { return alive == o.alive && used == o.used; }
};

struct DpKeyHash {
    std::size_t operator()(const DpKey& k) const {
        return static_cast<std::size_t>(
            splitmix64(k.alive * 0x9e3779b97f4a7c15ull ^ splitmix64(k.used)));
    }
};

struct DpEntry {
    double cost = 0.0;
    int action = -1;  // -1 = stop, else attribute id
    double beta = 0.0;
};

// Memoized minimization over outcome states. The state is the surviving
// pattern set plus the already-tested attributes still intersecting it
// (others cannot influence future costs). CandidateFn(attr, f0, f1) returns
// the cost and power of testing attr given the two subtree costs.
template <class CandidateFn>
struct DpSolver {
    const Hierarchy& h;
    CandidateFn candidate;
    double stop_unit;  // postprocessing charge per survivor when stopping
    std::unordered_map<DpKey, DpEntry, DpKeyHash> memo;

    std::uint64_t relevant(std::uint64_t alive) const {
        std::uint64_t r = 0;
        for (int a = 0; a < h.attr_count(); ++a)
            if (h.attr_mask(a) & alive) r |= 1ull << a;
        return r;
    }

    double stop_cost(std::uint64_t alive, std::optional<int> target) const {
        if (target) return stop_unit * static_cast<double>((alive >> *target) & 1ull);
        return stop_unit * static_cast<double>(std::popcount(alive));
    }

    double solve(std::uint64_t alive, std::uint64_t used, std::optional<int> target) {
        used &= relevant(alive);
        DpKey key{alive, used};
        auto it = memo.find(key);
        if (it != memo.end()) return it->second.cost;
        DpEntry best;
        best.cost = stop_cost(alive, target);
        best.action = -1;
        for (int a = 0; a < h.attr_count(); ++a) {
            if ((used >> a) & 1ull) continue;
            std::uint64_t am = h.attr_mask(a);
            if (!(am & alive)) continue;  // useless test
            if (target && !((am >> *target) & 1ull)) continue;  // irrelevant to the target
            double f0 = solve(alive & ~am, used | (1ull << a), target);
            double f1 = solve(alive, used | (1ull << a), target);
            PowerChoice pc = candidate(a, f0, f1);
            if (pc.cost < best.cost) {
                best.cost = pc.cost;
                best.action = a;
                best.beta = pc.beta;
            }
        }
        memo[key] = best;
        return best.cost;
    }

    int extract(std::uint64_t alive, std::uint64_t used, std::optional<int> target,
                Strategy& out) {
        used &= relevant(alive);
        const DpEntry& e = memo.at(DpKey{alive, used});
        if (e.action < 0) return out.add_leaf(alive);
        std::uint64_t am = h.attr_mask(e.action);
        int on0 = extract(alive & ~am, used | (1ull << e.action), target, out);
        int on1 = extract(alive, used | (1ull << e.action), target, out);
        return out.add_test(e.action, e.beta, on0, on1);
    }
};

template <class CandidateFn>
DpResult run_dp(const Hierarchy& h, CandidateFn fn, double stop_unit, std::optional<int> target,
                int guard_patterns) {
    if (h.pattern_count() > guard_patterns)
        throw GuardError("exact_optimum_dp: " + std::to_string(h.pattern_count()) +
                         " patterns exceeds guard " + std::to_string(guard_patterns));
    if (h.attr_count() > 64) throw GuardError("exact_optimum_dp: more than 64 attributes");
    DpSolver<CandidateFn> solver{h, fn, stop_unit, {}};
    DpResult res;
    res.cost = solver.solve(h.all_mask(), 0, target);
    res.strategy.root = solver.extract(h.all_mask(), 0, target, res.strategy);
    res.states = solver.memo.size();
    return res;
}

}  // namespace detail

/// Exact optimal strategy for a fixed test model (stopping allowed anywhere,
/// leaf charge c* per survivor, or per surviving target in single-target
/// mode). Ties break toward stopping, then the lowest attribute id.
inline DpResult exact_optimum_dp(const Hierarchy& h, const TestModel& t,
                                 std::optional<int> target = std::nullopt,
                                 int guard_patterns = 8) {
    return detail::run_dp(
        h,
        [&](int a, double f0, double f1) {
            return PowerChoice{t.beta[a], t.cost[a] + t.beta[a] * f0 + (1.0 - t.beta[a]) * f1};
        },
        h.unit_post_cost, target, guard_patterns);
}

/// Exact optimal strategy in variable-power mode: each candidate test picks
/// its power optimally given the two subtree costs.
inline DpResult exact_optimum_dp(const Hierarchy& h, const CostModel& m,
                                 std::optional<int> target = std::nullopt,
                                 int guard_patterns = 8) {
    return detail::run_dp(
        h,
        [&](int a, double f0, double f1) {
            if (h.attrs[a].perfect) return PowerChoice{1.0, m.effective_c_star() + f0};
            return optimal_power_clamped(m.psi, m.a(h.attrs[a].scope()), f0, f1);
        },
        m.effective_c_star(), target, guard_patterns);
}

/// Samples one strategy skeleton: at each node an admissible attribute
/// (not yet tested on the branch, not useless) is chosen uniformly; a branch
/// ends when none remains. stop_prob > 0 additionally stops at each node with
/// that probability (fixed-mode sampling). Perfect tests get a bare leaf as
/// 1-child since that branch has probability zero.
inline Strategy sample_skeleton(const Hierarchy& h, Rng& rng, double stop_prob = 0.0,
                                const std::vector<double>* betas = nullptr) {
    Strategy out;
    struct Rec {
        const Hierarchy& h;
        Rng& rng;
        double stop_prob;
        const std::vector<double>* betas;
        Strategy& out;
        int build(std::uint64_t alive, std::uint64_t used) {
            std::vector<int> admissible;
            for (int a = 0; a < h.attr_count(); ++a)
                if (!((used >> a) & 1ull) && (h.attr_mask(a) & alive)) admissible.push_back(a);
            if (admissible.empty()) return out.add_leaf(alive);
            if (stop_prob > 0.0 && rng.bernoulli(stop_prob)) return out.add_leaf(alive);
            int a = admissible[rng.below(admissible.size())];
            double beta = betas ? (*betas)[a] : 0.0;
            if (h.attrs[a].perfect) {
                int on0 = build(alive & ~h.attr_mask(a), used | (1ull << a));
                int on1 = out.add_leaf(alive);
                return out.add_test(a, 1.0, on0, on1);
            }
            int on0 = build(alive & ~h.attr_mask(a), used | (1ull << a));
            int on1 = build(alive, used | (1ull << a));
            return out.add_test(a, beta, on0, on1);
        }
    } rec{h, rng, stop_prob, betas, out};
    out.root = rec.build(h.all_mask(), 0);
    return out;
}

struct SampleReport {
    int n = 0;
    std::uint64_t seed = 0;
    double min_cost = 0.0;
    double mean_cost = 0.0;
    int best_index = 0;
    Strategy best;
    double ctf_cost = 0.0;
    std::vector<double> costs;
};

/// Variable-power strategy sampling: n skeletons, powers optimized per tree,
/// compared against the optimized CTF cost. Deterministic given the seed.
inline SampleReport random_sample(const Hierarchy& h, const CostModel& m, int n,
                                  std::uint64_t seed) {
    if (!h.augmented)
        throw ValidationError("variable-mode sampling requires an augmented hierarchy");
    if (n < 1) throw std::invalid_argument("random_sample: n must be >= 1");
    SampleReport rep;
    rep.n = n;
    rep.seed = seed;
    rep.costs.assign(n, 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Rng rng(seed, i + 1);
        Strategy skel = sample_skeleton(h, rng, 0.0);
        rep.costs[i] = optimize_powers(skel, h, m).cost;
    });
    rep.best_index = static_cast<int>(
        std::min_element(rep.costs.begin(), rep.costs.end()) - rep.costs.begin());
    rep.min_cost = rep.costs[rep.best_index];
    double sum = 0.0;
    for (double c : rep.costs) sum += c;
    rep.mean_cost = sum / n;
    Rng rng(seed, static_cast<std::uint64_t>(rep.best_index) + 1);
    rep.best = optimize_powers(sample_skeleton(h, rng, 0.0), h, m).strategy;
    rep.ctf_cost = assign_optimal_powers(h, m, 0).total_cost;
    return rep;
}

/// Fixed-mode strategy sampling with a per-node stop probability.
inline SampleReport random_sample(const Hierarchy& h, const TestModel& t, int n,
                                  std::uint64_t seed, double stop_prob = 0.5) {
    if (n < 1) throw std::invalid_argument("random_sample: n must be >= 1");
    SampleReport rep;
    rep.n = n;
    rep.seed = seed;
    rep.costs.assign(n, 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Rng rng(seed, i + 1);
        Strategy skel = sample_skeleton(h, rng, stop_prob, &t.beta);
        rep.costs[i] = expected_cost(skel, h, t).total;
    });
    rep.best_index = static_cast<int>(
        std::min_element(rep.costs.begin(), rep.costs.end()) - rep.costs.begin());
    rep.min_cost = rep.costs[rep.best_index];
    double sum = 0.0;
    for (double c : rep.costs) sum += c;
    rep.mean_cost = sum / n;
    Rng rng(seed, static_cast<std::uint64_t>(rep.best_index) + 1);
    rep.best = sample_skeleton(h, rng, stop_prob, &t.beta);
    rep.ctf_cost = ctf_cost_fixed(h, t);
    return rep;
}

/// First-order Markov dependency over the attribute tree: a test answers 0
/// with probability gamma (parent answered 0) or lambda (parent answered 1);
/// the root answers 0 with probability beta1.
struct MarkovField {
    double beta1 = 0.5;
    double gamma = 0.5;
    double lambda = 0.5;

    void check() const {
        if (!(0.0 <= lambda && lambda <= gamma && gamma <= 1.0))
            throw ValidationError("markov field requires 0 <= lambda <= gamma <= 1");
        if (!(0.0 <= beta1 && beta1 <= 1.0))
            throw ValidationError("markov field requires beta1 in [0,1]");
    }

    double stationary() const { return lambda / (1.0 + lambda - gamma); }
};

/// Marginal powers by forward recursion from the root.
inline std::vector<double> markov_marginals(const Hierarchy& h, const MarkovField& f) {
    f.check();
    if (h.augmented) throw ValidationError("markov model runs on the unaugmented hierarchy");
    std::vector<double> out(h.attr_count(), 0.0);
    for (int a = 0; a < h.attr_count(); ++a) {
        int p = h.attrs[a].parent;
        out[a] = p < 0 ? f.beta1 : f.gamma * out[p] + f.lambda * (1.0 - out[p]);
    }
    return out;
}

struct MarkovStat {
    double mean = 0.0;
    double se = 0.0;
};

struct MarkovReport {
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    std::vector<MarkovStat> stats;  // one per strategy, input order
    std::vector<double> marginals;  // per attribute
    // Grouped sample support: sorted distinct outcome vectors with counts and
    // the deterministic cost of each strategy on each vector.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> outcome_counts;
    std::vector<std::vector<double>> cost_by_outcome;  // [strategy][distinct index]

    /// Paired mean difference (j minus k) with its standard error; both
    /// strategies are evaluated on the same sampled outcomes.
    MarkovStat paired_diff(std::size_t j, std::size_t k) const {
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t v = 0; v < outcome_counts.size(); ++v) {
            double d = cost_by_outcome[j][v] - cost_by_outcome[k][v];
            double cnt = static_cast<double>(outcome_counts[v].second);
            sum += cnt * d;
            sumsq += cnt * d * d;
        }
        double nn = static_cast<double>(n);
        double mean = sum / nn;
        double var = std::max(0.0, (sumsq / nn - mean * mean) * nn / (nn - 1.0));
        return {mean, std::sqrt(var / nn)};
    }
};

/// Monte Carlo cost estimates under the Markov field. The joint field is
/// sampled top-down per draw; every strategy is priced deterministically on
/// each draw (test cost Gamma(|A|) Psi(marginal power), plus c* per
/// survivor). Identical seeds give identical reports.
inline MarkovReport markov_simulate(const Hierarchy& h, const MarkovField& f,
                                    const CostModel& m, const std::vector<Strategy>& strategies,
                                    std::uint64_t n_samples, std::uint64_t seed) {
    f.check();
    if (n_samples < 2) throw std::invalid_argument("markov_simulate: need n_samples >= 2");
    if (h.attr_count() > 64) throw GuardError("markov_simulate: more than 64 attributes");
    for (const auto& s : strategies) detail::require_valid(s, h);

    MarkovReport rep;
    rep.n = n_samples;
    rep.seed = seed;
    rep.marginals = markov_marginals(h, f);

    std::vector<double> attr_cost(h.attr_count(), 0.0);
    for (int a = 0; a < h.attr_count(); ++a)
        attr_cost[a] = test_cost(m, h.attrs[a].scope(), rep.marginals[a]);

    // Draw all outcome vectors, then group: strategies are priced per
    // distinct vector (attribute ids are in depth-first order, so parents
    // precede children in the id sweep).
    std::vector<std::uint64_t> draws(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        Rng rng(seed, i + 1);
        std::uint64_t v = 0;
        for (int a = 0; a < h.attr_count(); ++a) {
            int p = h.attrs[a].parent;
            // probability this test answers 0
            double p0 = p < 0 ? f.beta1 : (((v >> p) & 1ull) ? f.lambda : f.gamma);
            if (!rng.bernoulli(p0)) v |= 1ull << a;  // answers 1
        }
        draws[i] = v;
    });
    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    for (std::uint64_t v : draws) ++counts[v];
    rep.outcome_counts.assign(counts.begin(), counts.end());
    std::sort(rep.outcome_counts.begin(), rep.outcome_counts.end());

    rep.cost_by_outcome.assign(strategies.size(),
                               std::vector<double>(rep.outcome_counts.size(), 0.0));
    rep.stats.assign(strategies.size(), {});
    parallel_for(strategies.size(), [&](std::size_t j) {
        const Strategy& s = strategies[j];
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t vi = 0; vi < rep.outcome_counts.size(); ++vi) {
            std::uint64_t v = rep.outcome_counts[vi].first;
            double cost = 0.0;
            int i = s.root;
            while (!s.is_leaf(i)) {
                const auto& node = s.nodes[i];
                cost += attr_cost[node.attr];
                i = ((v >> node.attr) & 1ull) ? node.on1 : node.on0;
            }
            cost += m.effective_c_star() *
                    static_cast<double>(std::popcount(s.nodes[i].filtered));
            rep.cost_by_outcome[j][vi] = cost;
            double cnt = static_cast<double>(rep.outcome_counts[vi].second);
            sum += cnt * cost;
            sumsq += cnt * cost * cost;
        }
        double nn = static_cast<double>(n_samples);
        double mean = sum / nn;
        double var = std::max(0.0, (sumsq / nn - mean * mean) * nn / (nn - 1.0));
        rep.stats[j] = {mean, std::sqrt(var / nn)};
    });
    return rep;
}

}  // namespace hiertest
