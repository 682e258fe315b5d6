#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace hiertest;

TEST_CASE("ctf_strategy shapes") {
    Hierarchy v = augment(vine_hierarchy(1), 1.0);
    TestModel tv = TestModel::uniform(v, 0.3, 0.9);
    Strategy sv = ctf_strategy(v, tv);
    // chain: attribute test, then (on 1) the perfect test
    REQUIRE_FALSE(sv.is_leaf(sv.root));
    CHECK(sv.nodes[sv.root].attr == 0);
    int on1 = sv.nodes[sv.root].on1;
    REQUIRE_FALSE(sv.is_leaf(on1));
    CHECK(v.attrs[sv.nodes[on1].attr].perfect);

    Hierarchy h = dyadic_hierarchy(2);
    TestModel t = TestModel::uniform(h, 1.0, 0.5);
    Strategy s = ctf_strategy(h, t);
    CHECK(validate(s, h).ok());
    CHECK(is_complete(s, h));
    CHECK(s.nodes[s.root].attr == 0);
    // on 1, both leaf tests follow in breadth-first order
    int n1 = s.nodes[s.root].on1;
    CHECK(s.nodes[n1].attr == h.find("y1"));
    CHECK(s.nodes[s.nodes[n1].on0].attr == h.find("y2"));
    CHECK(s.nodes[s.nodes[n1].on1].attr == h.find("y2"));
}

TEST_CASE("ctf strategies are valid and complete on random instances") {
    for (int it = 0; it < 25; ++it) {
        Rng rng(41, it);
        Hierarchy h0 = oracle::random_hierarchy(rng, 2 + static_cast<int>(rng.below(4)));
        Hierarchy h = rng.bernoulli(0.5) ? augment(h0, 1.0) : h0;
        if (h.attr_count() > 16) continue;
        TestModel t = oracle::random_test_model(rng, h);
        Strategy s = ctf_strategy(h, t);
        CHECK(validate(s, h).ok());
        CHECK(is_complete(s, h));
    }
}

TEST_CASE("ctf_cost_fixed: worked values") {
    Hierarchy h = dyadic_hierarchy(2);
    TestModel t = TestModel::from_entries(
        h, {{"A1.1", {0.5, 1.0}}, {"y1", {0.8, 1.0}}, {"y2", {0.8, 1.0}}});
    CHECK(ctf_cost_fixed(h, t) == Catch::Approx(2.2).margin(1e-12));

    TestModel all_one = TestModel::uniform(h, 1.0, 1.0);
    CHECK(ctf_cost_fixed(h, all_one) == Catch::Approx(1.0).margin(1e-12));  // root only

    TestModel all_zero = TestModel::uniform(h, 1.0, 0.0);
    // every test performed plus c* per pattern
    CHECK(ctf_cost_fixed(h, all_zero) == Catch::Approx(3.0 + 2.0).margin(1e-12));
}

TEST_CASE("ctf_cost_fixed equals the tree evaluation on random instances") {
    for (int it = 0; it < 200; ++it) {
        Rng rng(42, it);
        Hierarchy h0 = oracle::random_hierarchy(rng, 2 + static_cast<int>(rng.below(7)));
        Hierarchy h = rng.bernoulli(0.3) ? augment(h0, rng.uniform(0.2, 2.0)) : h0;
        TestModel t = oracle::random_test_model(rng, h);
        double closed = ctf_cost_fixed(h, t);
        double via_tree = expected_cost(ctf_strategy(h, t), h, t).total;
        CHECK(closed == Catch::Approx(via_tree).margin(1e-12 * (1.0 + closed)));
    }
}

TEST_CASE("false_alarm_prob: worked values") {
    // vine: product of (1 - beta)
    Hierarchy v = vine_hierarchy(3);
    TestModel tv = TestModel::from_entries(
        v, {{"A1", {0.5, 1.0}}, {"A2", {0.7, 1.0}}, {"y1", {0.9, 1.0}}});
    CHECK(false_alarm_prob(v, tv) == Catch::Approx(0.5 * 0.3 * 0.1).margin(1e-15));

    Hierarchy h = dyadic_hierarchy(2);
    TestModel t = TestModel::from_entries(
        h, {{"A1.1", {0.5, 1.0}}, {"y1", {0.8, 1.0}}, {"y2", {0.8, 1.0}}});
    CHECK(false_alarm_prob(h, t) == Catch::Approx(0.18).margin(1e-12));
    CHECK(oracle::enumerate_false_alarm(h, t) == Catch::Approx(0.18).margin(1e-12));

    TestModel blocked = t;
    blocked.beta[0] = 1.0;
    CHECK(false_alarm_prob(h, blocked) == 0.0);

    CHECK_THROWS_AS(false_alarm_prob(augment(h, 1.0), TestModel::uniform(augment(h, 1.0), 1, .5)),
                    ValidationError);
}

TEST_CASE("false_alarm_prob equals outcome enumeration on random instances") {
    for (int it = 0; it < 100; ++it) {
        Rng rng(43, it);
        Hierarchy h = oracle::random_hierarchy(rng, 2 + static_cast<int>(rng.below(7)));
        if (h.attr_count() > 16) continue;
        TestModel t = oracle::random_test_model(rng, h, 0.01);
        CHECK(false_alarm_prob(h, t) ==
              Catch::Approx(oracle::enumerate_false_alarm(h, t)).margin(1e-12));
    }
}

TEST_CASE("assign_optimal_powers: dyadic worked values") {
    CostModel m;  // harmonic, identity, c = c* = 1
    Hierarchy h1 = augment(dyadic_hierarchy(1), 1.0);
    CtfResult r1 = assign_optimal_powers(h1, m);
    CHECK(r1.total_cost == Catch::Approx(0.5).margin(1e-12));
    CHECK(r1.beta_star[0] == Catch::Approx(0.75).margin(1e-12));

    Hierarchy h3 = augment(dyadic_hierarchy(3), 1.0);
    CtfResult r3 = assign_optimal_powers(h3, m);
    CHECK(r3.total_cost == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(r3.per_level.size() == 4);
    CHECK(r3.per_level[0].beta_star == Catch::Approx(7.0 / 16.0).margin(1e-12));
    CHECK(r3.per_level[1].beta_star == Catch::Approx(5.0 / 9.0).margin(1e-12));
    CHECK(r3.per_level[2].beta_star == Catch::Approx(0.75).margin(1e-12));
    CHECK(r3.per_level[3].beta_star == 1.0);
    REQUIRE(r3.strategy.has_value());
    CHECK(validate(*r3.strategy, h3).ok());

    CHECK_THROWS_AS(assign_optimal_powers(dyadic_hierarchy(3), m), ValidationError);
}

TEST_CASE("assign_optimal_powers: forest additivity") {
    CostModel m;
    HierarchySpec left = dyadic_spec(2);
    HierarchySpec right;
    right.id = "z1";
    Hierarchy two = augment(build_forest({left, right}), 1.0);
    CtfResult rt = assign_optimal_powers(two, m);
    double lone = assign_optimal_powers(augment(dyadic_hierarchy(2), 1.0), m).total_cost;
    double single = assign_optimal_powers(augment(vine_hierarchy(1), 1.0), m).total_cost;
    CHECK(rt.total_cost == Catch::Approx(lone + single).margin(1e-12));
}

TEST_CASE("dyadic_recursion: harmonic closed values") {
    auto rows = dyadic_recursion(PowerFunction::harmonic(), 10);
    CHECK(rows[0].cost == Catch::Approx(0.5).margin(1e-15));
    CHECK(rows[1].cost == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(rows[2].cost == Catch::Approx(1.0).margin(1e-15));
    for (int l = 1; l <= 10; ++l)
        CHECK(rows[l - 1].unit == Catch::Approx(1.0 / (l + 1)).margin(1e-12));
    CHECK(rows[0].beta1 == Catch::Approx(0.75).margin(1e-15));
    CHECK(rows[1].beta1 == Catch::Approx(5.0 / 9.0).margin(1e-15));
    CHECK(rows[2].beta1 == Catch::Approx(7.0 / 16.0).margin(1e-15));
    CHECK_THROWS_AS(dyadic_recursion(PowerFunction::harmonic(), 0), std::invalid_argument);
}

TEST_CASE("dyadic_recursion agrees with the hierarchy DP") {
    for (const auto& psi : PowerFunction::full_catalog()) {
        CostModel m;
        m.psi = psi;
        auto rows = dyadic_recursion(psi, 5);
        for (int L = 1; L <= 5; ++L) {
            Hierarchy h = augment(dyadic_hierarchy(L), 1.0);
            CtfResult res = assign_optimal_powers(h, m, 0);
            INFO(psi.name() << " L=" << L);
            CHECK(res.total_cost == Catch::Approx(rows[L - 1].cost).margin(1e-9));
            // level powers follow the depth shift
            for (const auto& row : res.per_level) {
                if (row.level > L) continue;  // perfect layer
                CHECK(row.beta_star ==
                      Catch::Approx(rows[L - row.level].beta1).margin(1e-12));
            }
        }
    }
}

TEST_CASE("unit sequence is nonincreasing for the whole catalog") {
    for (const auto& psi : PowerFunction::full_catalog()) {
        auto rows = dyadic_recursion(psi, 30);
        for (std::size_t i = 1; i < rows.size(); ++i)
            CHECK(rows[i].unit <= rows[i - 1].unit + 1e-12);
        CHECK(rows.back().unit >= psi.deriv0() - 1e-9);
    }
    // positive-derivative entry: the sequence settles just above its limit
    auto p4 = dyadic_recursion(PowerFunction::catalog("psi4"), 30);
    CHECK(p4.back().unit > 1.0);
    CHECK(p4.back().unit < 1.1);
}

TEST_CASE("harmonic per-level cumulated cost is nondecreasing with depth") {
    CostModel m;
    for (int L = 2; L <= 5; ++L) {
        CtfResult res = assign_optimal_powers(augment(dyadic_hierarchy(L), 1.0), m, 0);
        for (std::size_t i = 1; i < res.per_level.size(); ++i)
            CHECK(res.per_level[i].expected_cost >=
                  res.per_level[i - 1].expected_cost - 1e-9);
    }
}

TEST_CASE("resistor_oracle: worked values") {
    CostModel m;
    Hierarchy v = augment(vine_hierarchy(1), 1.0);
    CHECK(resistor_oracle(v, m.gamma) == Catch::Approx(0.5).margin(1e-15));
    Hierarchy h3 = augment(dyadic_hierarchy(3), 1.0);
    CHECK(resistor_oracle(h3, m.gamma) == Catch::Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(resistor_oracle(dyadic_hierarchy(3), m.gamma), ValidationError);
}

TEST_CASE("resistor_oracle equals the harmonic DP on random shapes") {
    CostModel m;
    for (int it = 0; it < 100; ++it) {
        Rng rng(44, it);
        Hierarchy h = augment(oracle::random_hierarchy(rng, 2 + static_cast<int>(rng.below(15)),
                                                       rng.uniform(0.3, 2.0)),
                              rng.uniform(0.3, 2.0));
        CostModel mm = m;
        mm.c_star = h.unit_post_cost;
        CHECK(resistor_oracle(h, mm.gamma) ==
              Catch::Approx(assign_optimal_powers(h, mm, 0).total_cost).margin(1e-9));
    }
}

TEST_CASE("right-vine order invariance (harmonic)") {
    // chaining Phi over any permutation of weights gives the harmonic sum
    auto harm = PowerFunction::harmonic();
    Rng rng(45, 0);
    for (int it = 0; it < 50; ++it) {
        int k = 2 + static_cast<int>(rng.below(4));
        std::vector<double> weights;
        for (int i = 0; i < k; ++i) weights.push_back(rng.uniform(0.1, 5.0));
        double y = rng.uniform(0.1, 5.0);
        double inv = 1.0 / y;
        for (double w : weights) inv += 1.0 / w;
        double hsum = 1.0 / inv;
        for (int perm = 0; perm < 5; ++perm) {
            std::vector<double> order = weights;
            for (int i = k - 1; i > 0; --i)
                std::swap(order[i], order[rng.below(i + 1)]);
            double cost = y;
            for (auto it2 = order.rbegin(); it2 != order.rend(); ++it2)
                cost = phi(harm, *it2, cost);
            CHECK(cost == Catch::Approx(hsum).margin(1e-12));
        }
    }
}

TEST_CASE("optimized CTF order irrelevance on one instance") {
    CostModel m;
    m.psi = PowerFunction::catalog("psi3");
    Hierarchy h = augment(dyadic_hierarchy(3), 1.0);
    TestModel shape = TestModel::uniform(h, 0.0, 0.0);
    Rng rng(46, 0);
    double ref = -1.0;
    std::vector<double> ref_beta;
    for (int it = 0; it < 6; ++it) {
        CtfOrder order = it == 0   ? CtfOrder::breadth_first
                         : it == 1 ? CtfOrder::depth_first
                                   : CtfOrder::shuffled;
        Strategy skel = ctf_strategy(h, shape, order, &rng);
        OptimizedStrategy opt = optimize_powers(skel, h, m);
        std::vector<double> beta(h.attr_count(), -1.0);
        for (const auto& node : opt.strategy.nodes) {
            if (node.attr < 0) continue;
            if (beta[node.attr] < 0)
                beta[node.attr] = node.beta;
            else  // same attribute must get the same power at every node
                CHECK(beta[node.attr] == Catch::Approx(node.beta).margin(1e-9));
        }
        if (ref < 0) {
            ref = opt.cost;
            ref_beta = beta;
        } else {
            CHECK(opt.cost == Catch::Approx(ref).margin(1e-9));
            for (int a = 0; a < h.attr_count(); ++a)
                if (ref_beta[a] >= 0 && beta[a] >= 0)
                    CHECK(beta[a] == Catch::Approx(ref_beta[a]).margin(1e-9));
        }
    }
}
