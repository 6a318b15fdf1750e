#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "igaa/bisim.hpp"
#include "igaa/rng.hpp"

using namespace igaa;

namespace {

// Deterministic one-action chain: state 0 <-> state 1, per-state rewards.
FiniteSystem chain(double r0, double r1) {
    FiniteSystem s;
    s.n_states = 2;
    s.n_actions = 1;
    s.reward = {{r0}, {r1}};
    s.next.assign(2, std::vector<TransitionDist>(1));
    s.next[0][0] = {{1}, {1.0}};
    s.next[1][0] = {{0}, {1.0}};
    return s;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) {
        v = 0.05 + rng.uniform01();
        total += v;
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

TEST_CASE("identical distributions over identical supports cost nothing") {
    const std::vector<double> w = {0.25, 0.5, 0.25};
    std::vector<std::vector<double>> cost(3, std::vector<double>(3, 1.0));
    for (int i = 0; i < 3; ++i) cost[i][i] = 0.0;
    CHECK(kantorovich_dual(w, w, cost) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("Dirac versus Dirac pays the ground distance, capped at the box") {
    CHECK(kantorovich_dual({1.0}, {1.0}, {{0.5}}) == doctest::Approx(0.5));
    CHECK(kantorovich_dual({1.0}, {1.0}, {{10.0}}) == doctest::Approx(2.0));
    CHECK(kantorovich_dual({1.0}, {1.0}, {{0.0}}) == doctest::Approx(0.0));
}

TEST_CASE("far-apart multi-point supports saturate the potential box at 2") {
    // Every ground cost is far above 2: the boxed dual can at best set p = 1,
    // q = -1, which is feasible and yields exactly 2.
    const std::vector<double> w_a = {0.3, 0.7}, w_b = {0.6, 0.4};
    const std::vector<std::vector<double>> cost = {{7.0, 9.0}, {8.5, 11.0}};
    CHECK(kantorovich_dual(w_a, w_b, cost) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("dual solver equals the primal transportation oracle on random instances") {
    Rng rng(515);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = 1 + rng.index(6);
        const std::size_t n = 1 + rng.index(6);
        const std::vector<double> w_a = random_simplex(rng, m);
        const std::vector<double> w_b = random_simplex(rng, n);
        std::vector<std::vector<double>> cost(m, std::vector<double>(n));
        if (trial % 2 == 0) {
            // Line-metric costs with diameter <= 1.8: optimal potentials are
            // 1-Lipschitz along the line, so the box never binds.
            std::vector<double> xa(m), xb(n);
            for (double& x : xa) x = rng.uniform(0.0, 1.8);
            for (double& x : xb) x = rng.uniform(0.0, 1.8);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::fabs(xa[i] - xb[j]);
        } else {
            // Small arbitrary costs: potential spread along any basis tree is
            // below the box half-width.
            for (auto& row : cost)
                for (double& v : row) v = rng.uniform(0.0, 0.15);
        }
        const double dual = kantorovich_dual(w_a, w_b, cost);
        const double primal = testutil::TransportOracle::solve(w_a, w_b, cost);
        CAPTURE(trial);
        CHECK(std::fabs(dual - primal) <= 1e-6);
    }
}

TEST_CASE("kantorovich rejects malformed inputs") {
    CHECK_THROWS_AS(kantorovich_dual({0.5, 0.6}, {1.0}, {{0.1}, {0.1}}),
                    std::invalid_argument);  // off-simplex
    CHECK_THROWS_AS(kantorovich_dual({1.0}, {1.0}, {{-0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(kantorovich_dual({}, {1.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(kantorovich_dual({1.0}, {0.5, 0.5}, {{0.1}}), std::invalid_argument);
}

TEST_CASE("action-set distance: hand-enumerated 2x2 fixture gives 3") {
    // max(max of row minima, min of row maxima) = max(max(1,2), min(3,4)) = 3.
    CHECK(hausdorff_action_distance({{1.0, 3.0}, {2.0, 4.0}}) == doctest::Approx(3.0));
    // Singletons reduce to the lone entry.
    CHECK(hausdorff_action_distance({{0.7}}) == doctest::Approx(0.7));
    // Zero table stays zero.
    CHECK(hausdorff_action_distance({{0.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(hausdorff_action_distance({}), std::invalid_argument);
    CHECK_THROWS_AS(hausdorff_action_distance({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("single-action systems are at distance zero from themselves") {
    // With one action per state the action-set distance is reflexive, so the
    // diagonal is an exact fixed point at zero.
    Rng rng(99);
    const FiniteSystem sys = testutil::random_mdp(rng, 6, 1);
    BisimConfig cfg;
    cfg.iterations = 10;
    const BisimResult res = lax_bisimulation(sys, sys, cfg);
    for (std::size_t s = 0; s < sys.n_states; ++s) {
        CHECK(res.state_pair[s][s] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(res.action_pair[s][s] == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("multi-action self-comparison stays non-negative and bounded") {
    // The action-set distance deliberately keeps a min-of-row-maxima term, so
    // a state's distance to itself may be positive when its actions differ —
    // extra slack, never negative.
    Rng rng(98);
    const FiniteSystem sys = testutil::random_mdp(rng, 5, 3);
    BisimConfig cfg;
    cfg.iterations = 10;
    const BisimResult res = lax_bisimulation(sys, sys, cfg);
    for (const auto& row : res.action_pair) {
        for (const double v : row) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("eta_kd = 0 truncates the recursion to pure reward differences") {
    const FiniteSystem a = chain(1.0, 0.0);
    const FiniteSystem b = chain(0.25, 0.0);
    BisimConfig cfg;
    cfg.eta_r = 0.5;
    cfg.eta_kd = 0.0;
    cfg.iterations = 4;
    const BisimResult res = lax_bisimulation(a, b, cfg);
    CHECK(res.action_pair[0][0] == doctest::Approx(0.5 * 0.75));
    CHECK(res.action_pair[0][1] == doctest::Approx(0.5 * 1.0));
    CHECK(res.action_pair[1][0] == doctest::Approx(0.5 * 0.25));
    CHECK(res.action_pair[1][1] == doctest::Approx(0.0));
    for (const double c : res.max_change_per_iter) CHECK(c == doctest::Approx(0.0));
}

TEST_CASE("two-state chain matches the hand-unrolled recursion") {
    // A: r = (1, 0); B: r = (0, 0); both alternate 0 <-> 1 deterministically.
    const FiniteSystem a = chain(1.0, 0.0);
    const FiniteSystem b = chain(0.0, 0.0);
    BisimConfig cfg;
    cfg.eta_r = 0.5;
    cfg.eta_kd = 0.5;

    // Hand unroll. D0 = eta_r|dr|: [(0,0)]=.5 [(0,1)]=.5 [(1,0)]=0 [(1,1)]=0.
    // D1 adds eta_kd * S0(successors): D1 = [.5, .5, .25, .25].
    cfg.iterations = 1;
    const BisimResult one = lax_bisimulation(a, b, cfg);
    CHECK(one.action_pair[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(one.action_pair[0][1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(one.action_pair[1][0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(one.action_pair[1][1] == doctest::Approx(0.25).epsilon(1e-12));

    // D2: [(0,0)] = .5 + .5*D1[(1,1)] = .625; [(0,1)] = .5 + .5*D1[(1,0)] = .625;
    //     [(1,0)] = .5*D1[(0,1)] = .25;      [(1,1)] = .5*D1[(0,0)] = .25.
    cfg.iterations = 2;
    const BisimResult two = lax_bisimulation(a, b, cfg);
    CHECK(two.action_pair[0][0] == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(two.action_pair[0][1] == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(two.action_pair[1][0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(two.action_pair[1][1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(two.iterations_run == 2);

    // Fixed point: D[(0,0)] solves d = 1/2 + 1/4 d => 2/3.
    cfg.iterations = 80;
    cfg.tolerance = 1e-12;
    const BisimResult fp = lax_bisimulation(a, b, cfg);
    CHECK(fp.action_pair[0][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(!fp.diverged);
}

TEST_CASE("iteration is a contraction: max change never increases") {
    Rng rng(123);
    for (int trial = 0; trial < 8; ++trial) {
        const FiniteSystem a = testutil::random_mdp(rng, 5, 3);
        const FiniteSystem b = testutil::random_mdp(rng, 5, 3);
        BisimConfig cfg;
        cfg.eta_r = 0.7;
        cfg.eta_kd = 0.9;
        cfg.iterations = 12;
        const BisimResult res = lax_bisimulation(a, b, cfg);
        CHECK(!res.diverged);
        for (std::size_t k = 1; k < res.max_change_per_iter.size(); ++k) {
            CHECK(res.max_change_per_iter[k] <=
                  res.max_change_per_iter[k - 1] + 1e-12);
        }
        // Distances are bounded by eta_r * max|dr| + eta_kd * 2.
        for (const auto& row : res.action_pair) {
            for (const double v : row) {
                CHECK(v >= 0.0);
                CHECK(v <= cfg.eta_r * 1.0 + cfg.eta_kd * 2.0 + 1e-9);
            }
        }
    }
}

TEST_CASE("tolerance stops the iteration early") {
    const FiniteSystem a = chain(1.0, 0.0);
    const FiniteSystem b = chain(0.0, 0.0);
    BisimConfig cfg;
    cfg.iterations = 500;
    cfg.tolerance = 1e-10;
    const BisimResult res = lax_bisimulation(a, b, cfg);
    CHECK(res.iterations_run < 500);
    CHECK(res.max_change_per_iter.back() <= 1e-10);
}

TEST_CASE("system validation rejects malformed tables") {
    FiniteSystem s = chain(1.0, 0.0);
    CHECK_NOTHROW(s.validate());

    FiniteSystem bad = s;
    bad.next[0][0].probs = {0.5};  // does not sum to 1
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    FiniteSystem bad2 = s;
    bad2.next[0][0].states = {7};  // out of range
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);

    FiniteSystem bad3 = s;
    bad3.reward.pop_back();
    CHECK_THROWS_AS(bad3.validate(), std::invalid_argument);

    FiniteSystem empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    BisimConfig neg;
    neg.eta_r = -0.1;
    CHECK_THROWS_AS(lax_bisimulation(s, s, neg), std::invalid_argument);
}
