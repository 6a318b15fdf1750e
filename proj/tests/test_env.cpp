#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <vector>

#include "igaa/env.hpp"
#include "igaa/nsi.hpp"

using namespace igaa;

namespace {

// Two resources (cpu: compute, dpu: offload), two nodes:
//   alpha: cap {4, 2}, distance 0.5, insecure
//   beta:  cap {8, 0}, distance 0.25, secure
struct Fixture {
    ResourceCatalog resources;
    ServiceCatalog services;
    NetworkSpec net;
    EnvConfig config;

    Fixture() {
        ResourceEntry cpu{"cpu", "cores", 0.0, 10.0, -1, ResourceRole::Compute};
        ResourceEntry dpu{"dpu", "units", 0.0, 4.0, -1, ResourceRole::Offload};
        resources.entries = {cpu, dpu};
        resources.version = 1;

        ServiceEntry svc;
        svc.name = "svc";
        svc.template_lo = {0.0, 0.0};
        svc.template_hi = {1.0, 1.0};
        svc.base_time = 1.0;
        svc.base_throughput = 10.0;
        svc.base_accuracy = 0.95;
        svc.data_fraction = 0.5;
        services.entries = {svc};
        services.version = 1;

        net.nodes = {{"alpha", {4.0, 2.0}, 0.5, false}, {"beta", {8.0, 0.0}, 0.25, true}};
        net.resource_catalog_version = 1;

        config.kappa = 0.5;
        config.weights = {1.0, 0.5, 0.2};
        config.multipliers = {1.0, 1.5};
    }

    EdgeEnv make() const { return EdgeEnv(net, services, resources, config); }

    static Request request(double cpu_d, double dpu_d, double deadline = 1.0,
                           double sec = 0.0) {
        Request r;
        r.service_type = 0;
        r.requirement.values = {cpu_d, dpu_d};
        r.requirement.catalog_version = 1;
        r.deadline = deadline;
        r.security_flag = sec;
        r.throughput_target = 10.0;
        r.accuracy_target = 0.9;
        r.duration_steps = 1;
        return r;
    }
};

}  // namespace

TEST_CASE("hand-checked outcome on the offload node") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(2.0, 1.0)});
    const StepOutcome out = env.step({0, 1.0});

    // Offload absorbs min(dpu alloc 1.0, data_fraction 0.5 * cpu demand 2.0) = 1.0,
    // so the compute reservation shrinks from 2.0 to 1.0.
    CHECK(out.feasible);
    CHECK(out.cpu_offloaded == doctest::Approx(1.0).epsilon(1e-15));
    REQUIRE(out.allocation.size() == 2);
    CHECK(out.allocation[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.allocation[1] == doctest::Approx(1.0).epsilon(1e-15));

    // latency = base_time / multiplier + kappa * distance = 1.0 + 0.25 = 1.25.
    CHECK(out.latency == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(!out.success);  // 1.25 > deadline 1.0
    CHECK(!out.met[0]);
    CHECK(out.met[1]);  // no security flag
    CHECK(out.measured[1] == 0.0);
    CHECK(out.met[2]);  // throughput 10 >= 10 (closed inequality)
    CHECK(out.measured[2] == doctest::Approx(10.0));
    CHECK(out.met[3]);  // accuracy 0.95 >= 0.9
    CHECK(out.satisfied_count == 3);
    CHECK(!out.fully_satisfied);

    // reward = 1.0*(3/4) - 0.5*min(1.25/1.0, 2) - 0.2*((1/4 + 1/2)/2) = 0.05.
    CHECK(out.reward == doctest::Approx(0.05).epsilon(1e-12));

    // Availability shrank by the reservation; bookkeeping conserves exactly.
    CHECK(env.available()[0][0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(env.available()[0][1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(env.conservation_error() == 0.0);
}

TEST_CASE("hand-checked outcome on the plain compute node") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(2.0, 1.0)});
    const StepOutcome out = env.step({1, 1.5});

    // beta has no offload capacity: the dpu allocation clamps to 0, nothing
    // offloads, and the full scaled compute demand is reserved.
    CHECK(out.feasible);
    CHECK(out.cpu_offloaded == 0.0);
    CHECK(out.allocation[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(out.allocation[1] == 0.0);

    const double latency = 1.0 / 1.5 + 0.5 * 0.25;
    CHECK(out.latency == doctest::Approx(latency).epsilon(1e-15));
    CHECK(out.success);
    CHECK(out.fully_satisfied);
    CHECK(out.satisfied_count == 4);

    // Cost averages only over resources the node actually has (cpu only).
    const double want = 1.0 - 0.5 * latency - 0.2 * (3.0 / 8.0);
    CHECK(out.reward == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("infeasible placement returns the configured penalty and mutates nothing") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(5.0, 0.0)});
    const std::vector<double> before = env.available()[0];
    const StepOutcome out = env.step({0, 1.0});  // 5 > cap 4
    CHECK(!out.feasible);
    CHECK(out.reward == doctest::Approx(-1.0));
    CHECK(!out.success);
    CHECK(out.satisfied_count == 0);
    for (bool b : out.met) CHECK(!b);
    CHECK(env.available()[0] == before);
    CHECK(env.conservation_error() == 0.0);
}

TEST_CASE("security flag fails on insecure nodes and passes on cleared ones") {
    Fixture f;
    EdgeEnv env = f.make();
    const Request req = Fixture::request(1.0, 0.0, 1.0, 1.0);
    env.reset({req, req});
    const StepOutcome on_insecure = env.step({0, 1.0});
    CHECK(!on_insecure.met[1]);
    const StepOutcome on_secure = env.step({1, 1.0});
    CHECK(on_secure.met[1]);
    CHECK(on_secure.measured[1] == 1.0);
}

TEST_CASE("deadline inequality is closed: latency exactly at deadline is met") {
    Fixture f;
    f.config.kappa = 0.0;  // latency = base_time / multiplier exactly
    EdgeEnv env(f.net, f.services, f.resources, f.config);
    env.reset({Fixture::request(1.0, 0.0, /*deadline=*/1.0)});
    const StepOutcome out = env.step({1, 1.0});
    CHECK(out.latency == 1.0);
    CHECK(out.met[0]);
    CHECK(out.success);
}

TEST_CASE("higher multiplier strictly reduces latency and raises cost") {
    Fixture f;
    f.config.multipliers = {1.0, 1.25, 1.5};
    EdgeEnv env(f.net, f.services, f.resources, f.config);
    const Request req = Fixture::request(2.0, 0.0, 10.0);
    env.reset({req});
    double prev_latency = 1e18;
    double prev_alloc = -1.0;
    for (const double m : f.config.multipliers) {
        const StepOutcome out = env.evaluate(req, {1, m});
        REQUIRE(out.feasible);
        CHECK(out.latency < prev_latency);
        CHECK(out.allocation[0] > prev_alloc);
        prev_latency = out.latency;
        prev_alloc = out.allocation[0];
    }
}

TEST_CASE("action space enumerates node-major and matches the declared count") {
    Fixture f;
    f.net.nodes.push_back({"gamma", {2.0, 0.0}, 0.1, false});
    f.config.multipliers = {1.0, 1.25, 1.5};
    EdgeEnv env(f.net, f.services, f.resources, f.config);
    const std::vector<Action> acts = env.action_space();
    REQUIRE(acts.size() == 9);  // 3 nodes x 3 multipliers
    CHECK(env.action_count() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(acts[i].node == i / 3);
        CHECK(acts[i].multiplier == f.config.multipliers[i % 3]);
    }
}

TEST_CASE("state encoding is normalized availability plus normalized demand") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(2.0, 1.0)});
    const std::vector<double> s = env.encode_state();
    REQUIRE(s.size() == env.state_dim());
    REQUIRE(s.size() == 2 * (2 + 1) + 2);
    // alpha: avail/cap = {1, 1}, distance 0.5.
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == doctest::Approx(1.0));
    CHECK(s[2] == doctest::Approx(0.5));
    // beta: cpu 1, dpu cap 0 encodes as 0, distance 0.25.
    CHECK(s[3] == doctest::Approx(1.0));
    CHECK(s[4] == doctest::Approx(0.0));
    CHECK(s[5] == doctest::Approx(0.25));
    // Demand over catalog uppers: 2/10, 1/4.
    CHECK(s[6] == doctest::Approx(0.2));
    CHECK(s[7] == doctest::Approx(0.25));

    env.step({0, 1.0});
    CHECK(env.done());
    // After the episode the demand block encodes zeros.
    const std::vector<double> s2 = env.encode_state();
    CHECK(s2[6] == 0.0);
    CHECK(s2[7] == 0.0);
    // alpha's availability reflects the live reservation {1, 1}.
    CHECK(s2[0] == doctest::Approx(3.0 / 4.0));
    CHECK(s2[1] == doctest::Approx(1.0 / 2.0));
}

TEST_CASE("reservations release after their duration") {
    Fixture f;
    EdgeEnv env = f.make();
    Request first = Fixture::request(3.0, 0.0);
    first.duration_steps = 1;
    Request second = Fixture::request(3.0, 0.0);
    env.reset({first, second});
    env.step({0, 1.0});
    CHECK(env.available()[0][0] == doctest::Approx(1.0));
    // The first reservation expires at the start of the second step, so the
    // same placement is feasible again.
    const StepOutcome out = env.step({0, 1.0});
    CHECK(out.feasible);
    CHECK(env.available()[0][0] == doctest::Approx(1.0));
    CHECK(env.conservation_error() == 0.0);
}

TEST_CASE("multi-step reservations persist and make later placements interact") {
    Fixture f;
    EdgeEnv env = f.make();
    Request first = Fixture::request(3.0, 0.0);
    first.duration_steps = 3;
    Request second = Fixture::request(3.0, 0.0);
    env.reset({first, second});
    env.step({0, 1.0});
    const StepOutcome out = env.step({0, 1.0});  // 3 > remaining 1
    CHECK(!out.feasible);
    CHECK(env.conservation_error() == 0.0);
}

TEST_CASE("evaluate and peek agree with step and leave state untouched") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(2.0, 1.0), Fixture::request(1.0, 0.0)});
    const Action a{0, 1.0};
    const StepOutcome ev = env.evaluate(env.current_request(), a);
    std::vector<double> succ;
    const StepOutcome pk = env.peek(a, &succ);
    CHECK(env.available()[0][0] == doctest::Approx(4.0));  // untouched
    const StepOutcome st = env.step(a);
    CHECK(ev.reward == doctest::Approx(st.reward).epsilon(1e-15));
    CHECK(pk.reward == doctest::Approx(st.reward).epsilon(1e-15));
    CHECK(ev.latency == doctest::Approx(st.latency).epsilon(1e-15));
    CHECK(ev.cpu_offloaded == doctest::Approx(st.cpu_offloaded).epsilon(1e-15));
    // The peeked successor matches the live encoding after the step.
    const std::vector<double> live = env.encode_state();
    REQUIRE(succ.size() == live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
        CHECK(succ[i] == doctest::Approx(live[i]).epsilon(1e-12));
    }
}

TEST_CASE("mean utilization tracks per-step usage and marks absent resources") {
    Fixture f;
    EdgeEnv env = f.make();
    env.reset({Fixture::request(2.0, 1.0)});
    env.step({0, 1.0});
    const std::vector<std::vector<double>> util = env.mean_utilization();
    REQUIRE(util.size() == 2);      // resources
    REQUIRE(util[0].size() == 2);   // nodes
    CHECK(util[0][0] == doctest::Approx(0.25));  // cpu on alpha: (4-3)/4
    CHECK(util[1][0] == doctest::Approx(0.5));   // dpu on alpha: (2-1)/2
    CHECK(util[0][1] == doctest::Approx(0.0));   // beta untouched
    CHECK(util[1][1] == doctest::Approx(-1.0));  // beta has no dpu
}

TEST_CASE("fault bonus rewards exactly the nodes without offload capacity") {
    Fixture f;
    f.config.no_offload_node_bonus = 0.7;
    EdgeEnv env(f.net, f.services, f.resources, f.config);
    const Request req = Fixture::request(2.0, 1.0);
    env.reset({req});
    Fixture plain;
    EdgeEnv base = plain.make();
    base.reset({req});
    // alpha has offload capacity: rewards match the unbiased environment.
    CHECK(env.evaluate(req, {0, 1.0}).reward ==
          doctest::Approx(base.evaluate(req, {0, 1.0}).reward).epsilon(1e-15));
    // beta has none: reward is shifted by exactly the bonus.
    CHECK(env.evaluate(req, {1, 1.0}).reward ==
          doctest::Approx(base.evaluate(req, {1, 1.0}).reward + 0.7).epsilon(1e-12));
}

TEST_CASE("constructor and reset validate their inputs") {
    Fixture f;
    SUBCASE("multiplier below one is rejected") {
        f.config.multipliers = {0.5};
        CHECK_THROWS_AS(f.make(), std::invalid_argument);
    }
    SUBCASE("empty multiplier set is rejected") {
        f.config.multipliers = {};
        CHECK_THROWS_AS(f.make(), std::invalid_argument);
    }
    SUBCASE("network catalog version mismatch is rejected") {
        f.net.resource_catalog_version = 7;
        CHECK_THROWS_AS(f.make(), std::invalid_argument);
    }
    SUBCASE("capacity vector size mismatch is rejected") {
        f.net.nodes[0].capacity = {1.0};
        CHECK_THROWS_AS(f.make(), std::invalid_argument);
    }
    SUBCASE("distance outside the unit interval is rejected") {
        f.net.nodes[0].distance = 1.5;
        CHECK_THROWS_AS(f.make(), std::invalid_argument);
    }
    SUBCASE("requests are validated on reset") {
        EdgeEnv env = f.make();
        Request bad_type = Fixture::request(1.0, 0.0);
        bad_type.service_type = 5;
        CHECK_THROWS_AS(env.reset({bad_type}), std::invalid_argument);
        Request bad_dim = Fixture::request(1.0, 0.0);
        bad_dim.requirement.values = {1.0};
        CHECK_THROWS_AS(env.reset({bad_dim}), std::invalid_argument);
        Request bad_duration = Fixture::request(1.0, 0.0);
        bad_duration.duration_steps = 0;
        CHECK_THROWS_AS(env.reset({bad_duration}), std::invalid_argument);
    }
    SUBCASE("acting on a finished episode or unknown action throws") {
        EdgeEnv env = f.make();
        env.reset({Fixture::request(1.0, 0.0)});
        CHECK_THROWS_AS(env.step({5, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(env.step({0, 1.1}), std::invalid_argument);
        env.step({0, 1.0});
        CHECK_THROWS_AS(env.step({0, 1.0}), std::logic_error);
        CHECK_THROWS_AS(env.current_request(), std::logic_error);
    }
}

TEST_CASE("network JSON round trip preserves nodes") {
    Fixture f;
    const NetworkSpec back = network_from_json(to_json(f.net));
    CHECK(back.resource_catalog_version == f.net.resource_catalog_version);
    REQUIRE(back.size() == f.net.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back.nodes[i].name == f.net.nodes[i].name);
        CHECK(back.nodes[i].capacity == f.net.nodes[i].capacity);
        CHECK(back.nodes[i].distance == f.net.nodes[i].distance);
        CHECK(back.nodes[i].secure == f.net.nodes[i].secure);
    }
}
