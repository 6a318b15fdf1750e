#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "igaa/net.hpp"
#include "igaa/rng.hpp"

using namespace igaa;

namespace {

SchedNet small_net(std::uint64_t seed = 31, std::size_t nodes = 2, std::size_t actions = 4) {
    Rng rng(seed);
    return SchedNet(nodes, {"r0", "r1"}, {"s0", "s1"}, actions, rng,
                    /*encoder_dim=*/3, /*net_feature_dim=*/5, /*trunk_width=*/6);
}

std::vector<double> fixed_state(const SchedNet& net, std::uint64_t seed = 5) {
    Rng rng(seed);
    std::vector<double> s(net.state_dim());
    for (double& v : s) v = rng.uniform(0.05, 0.95);
    return s;
}

// Loss used by the finite-difference check: a fixed linear functional of the
// Q vector, so dL/dq is a constant vector.
double probe_loss(const SchedNet& net, const std::vector<double>& state, std::size_t service,
                  const std::vector<double>& w) {
    const std::vector<double> q = net.forward(state, service);
    double l = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) l += w[a] * q[a];
    return l;
}

// Evaluate the loss with one serialized parameter nudged by delta.
double perturbed_loss(const nlohmann::json& base, const std::string& part, int part_index,
                      const char* field, std::size_t flat, double delta,
                      const std::vector<double>& state, std::size_t service,
                      const std::vector<double>& w) {
    nlohmann::json j = base;
    if (part_index >= 0) {
        j[part][part_index][field][flat] = j[part][part_index][field][flat].get<double>() + delta;
    } else {
        j[part][field][flat] = j[part][field][flat].get<double>() + delta;
    }
    return probe_loss(SchedNet::from_json(j), state, service, w);
}

struct FdSpec {
    std::string part;   // JSON key
    int index;          // array index or -1 for scalar parts
    const Affine* ana;  // analytic grads for this part
};

}  // namespace

TEST_CASE("zero-parameter network emits exactly zero Q-values") {
    SchedNet net = small_net();
    nlohmann::json j = net.to_json();
    for (const char* part : {"net_block", "trunk1", "trunk2"}) {
        for (auto& v : j[part]["W"]) v = 0.0;
        for (auto& v : j[part]["b"]) v = 0.0;
    }
    for (const char* part : {"encoders", "heads"}) {
        for (auto& a : j[part]) {
            for (auto& v : a["W"]) v = 0.0;
            for (auto& v : a["b"]) v = 0.0;
        }
    }
    const SchedNet zero = SchedNet::from_json(j);
    const std::vector<double> q = zero.forward(fixed_state(zero), 0);
    for (const double v : q) CHECK(v == 0.0);
}

TEST_CASE("backward gradients match central finite differences in every group") {
    SchedNet net = small_net();
    const std::size_t service = 0;

    // Pick a state whose trunk preactivations are clear of the ReLU kinks so
    // the central difference sees a smooth function.
    std::vector<double> state;
    {
        bool found = false;
        for (std::uint64_t s = 5; s < 25 && !found; ++s) {
            state = fixed_state(net, s);
            ForwardCache cache;
            net.forward_cached(state, service, cache);
            double margin = 1e9;
            for (const double z : cache.z1) margin = std::min(margin, std::fabs(z));
            for (const double z : cache.z2) margin = std::min(margin, std::fabs(z));
            found = margin > 1e-3;
        }
        REQUIRE(found);
    }

    std::vector<double> w(net.actions());
    Rng wr(17);
    for (double& v : w) v = wr.uniform(-1.0, 1.0);

    ForwardCache cache;
    net.forward_cached(state, service, cache);
    SchedNet::Grads g = net.zero_grads();
    net.backward(cache, w, g);

    const nlohmann::json base = net.to_json();
    const double h = 1e-5;

    std::vector<FdSpec> specs;
    specs.push_back({"net_block", -1, &g.net_block});
    specs.push_back({"trunk1", -1, &g.trunk1});
    specs.push_back({"trunk2", -1, &g.trunk2});
    for (std::size_t r = 0; r < net.resources(); ++r)
        specs.push_back({"encoders", static_cast<int>(r), &g.encoders[r]});
    for (std::size_t s = 0; s < net.services(); ++s)
        specs.push_back({"heads", static_cast<int>(s), &g.heads[s]});

    for (const FdSpec& spec : specs) {
        CAPTURE(spec.part);
        CAPTURE(spec.index);
        for (const char* field : {"W", "b"}) {
            const std::vector<double>& ana = field[0] == 'W' ? spec.ana->W : spec.ana->b;
            for (std::size_t i = 0; i < ana.size(); ++i) {
                const double up = perturbed_loss(base, spec.part, spec.index, field, i, h,
                                                 state, service, w);
                const double dn = perturbed_loss(base, spec.part, spec.index, field, i, -h,
                                                 state, service, w);
                const double fd = (up - dn) / (2.0 * h);
                CAPTURE(field);
                CAPTURE(i);
                // Relative 1e-4 with an absolute floor for structurally zero
                // entries (an unused head's gradient is exactly zero).
                CHECK(testutil::rel_err(ana[i], fd, 1e-6) < 1e-4);
            }
        }
    }

    // The untrained service head receives an exactly-zero gradient.
    for (const double v : g.heads[1].W) CHECK(v == 0.0);
    for (const double v : g.heads[1].b) CHECK(v == 0.0);
}

TEST_CASE("frozen groups stay bit-identical through training steps") {
    SchedNet net = small_net(41);
    SchedNet target = net;
    Rng rng(7);
    std::vector<Transition> batch;
    for (int i = 0; i < 16; ++i) {
        Transition t;
        t.state = fixed_state(net, 100 + i);
        t.next_state = fixed_state(net, 200 + i);
        t.service = i % 2;
        t.next_service = i % 2;
        t.action = rng.index(net.actions());
        t.reward = rng.uniform(-1.0, 1.0);
        t.terminal = (i % 5 == 0);
        batch.push_back(t);
    }
    TrainConfig cfg;
    cfg.lr = 1e-2;

    SUBCASE("freezing everything makes training a no-op on parameters") {
        for (const std::string& gname : net.group_names()) net.freeze(gname);
        const SchedNet before = net;
        net.train_batch(batch, target, cfg);
        CHECK(net.equal_bits(before));
    }

    SUBCASE("freezing one group protects it while others move") {
        net.freeze("enc:r0");
        net.freeze("head:s1");
        const nlohmann::json before = net.to_json();
        net.train_batch(batch, target, cfg);
        const nlohmann::json after = net.to_json();
        CHECK(after["encoders"][0].dump() == before["encoders"][0].dump());
        CHECK(after["heads"][1].dump() == before["heads"][1].dump());
        CHECK(after["opt_encoders"][0].dump() == before["opt_encoders"][0].dump());
        CHECK(after["opt_heads"][1].dump() == before["opt_heads"][1].dump());
        // Unfrozen groups actually changed.
        CHECK(after["trunk1"].dump() != before["trunk1"].dump());
        CHECK(after["encoders"][1].dump() != before["encoders"][1].dump());
        // Frozen-set round trip.
        CHECK(net.is_frozen("enc:r0"));
        net.unfreeze("enc:r0");
        CHECK(!net.is_frozen("enc:r0"));
        CHECK_THROWS_AS(net.freeze("enc:missing"), std::invalid_argument);
        CHECK_NOTHROW(net.unfreeze("head:nope"));  // unfreezing a non-group is a no-op
    }
}

TEST_CASE("fifty training steps reduce the loss on a fixed batch") {
    SchedNet net = small_net(43);
    const SchedNet target = net;
    Rng rng(19);
    std::vector<Transition> batch;
    for (int i = 0; i < 32; ++i) {
        Transition t;
        t.state = fixed_state(net, 300 + i);
        t.next_state = fixed_state(net, 400 + i);
        t.service = i % 2;
        t.next_service = (i + 1) % 2;
        t.action = rng.index(net.actions());
        t.reward = rng.uniform(-1.0, 1.0);
        t.terminal = (i % 4 == 0);
        batch.push_back(t);
    }
    TrainConfig cfg;
    cfg.lr = 3e-3;
    const double first = net.train_batch(batch, target, cfg);
    double last = first;
    for (int step = 0; step < 49; ++step) last = net.train_batch(batch, target, cfg);
    CHECK(last < first);
}

TEST_CASE("soft update interpolates parameters with the declared rate") {
    const SchedNet online = small_net(47);
    SUBCASE("rho = 1 copies the online network") {
        SchedNet target = small_net(53);
        SchedNet::soft_update(target, online, 1.0);
        CHECK(target.equal_bits(online));
    }
    SUBCASE("rho = 0 leaves the target untouched") {
        SchedNet target = small_net(53);
        const SchedNet before = target;
        SchedNet::soft_update(target, online, 0.0);
        CHECK(target.equal_bits(before));
    }
    SUBCASE("rho = 0.5 averages elementwise") {
        SchedNet target = small_net(53);
        const double t0 = target.trunk1().W[3];
        const double o0 = online.trunk1().W[3];
        const double tb = target.head(1).b[2];
        const double ob = online.head(1).b[2];
        SchedNet::soft_update(target, online, 0.5);
        CHECK(target.trunk1().W[3] == doctest::Approx(0.5 * t0 + 0.5 * o0).epsilon(1e-15));
        CHECK(target.head(1).b[2] == doctest::Approx(0.5 * tb + 0.5 * ob).epsilon(1e-15));
    }
}

TEST_CASE("zero-initialized input expansion is exactly conservative") {
    SchedNet net = small_net(59);
    const SchedNet before = net;
    const std::vector<double> state = fixed_state(net, 8);
    const std::vector<double> q_before = net.forward(state, 1);

    Rng rng(61);
    net.expand_input("r2", ExpandInit::Zero, rng);

    CHECK(net.resources() == 3);
    CHECK(net.state_dim() == before.state_dim() + before.nodes() + 1);

    // Expanded state: each node block gains the new availability before its
    // distance entry; the requirement tail gains the new demand at its end.
    const std::size_t m_old = before.resources();
    std::vector<double> grown;
    for (std::size_t node = 0; node < before.nodes(); ++node) {
        for (std::size_t r = 0; r < m_old; ++r) grown.push_back(state[node * (m_old + 1) + r]);
        grown.push_back(0.77);  // arbitrary new availability
        grown.push_back(state[node * (m_old + 1) + m_old]);  // distance
    }
    for (std::size_t r = 0; r < m_old; ++r)
        grown.push_back(state[before.nodes() * (m_old + 1) + r]);
    grown.push_back(0.42);  // arbitrary new demand
    REQUIRE(grown.size() == net.state_dim());

    const std::vector<double> q_after = net.forward(grown, 1);
    REQUIRE(q_after.size() == q_before.size());
    for (std::size_t a = 0; a < q_after.size(); ++a) {
        CHECK(q_after[a] == q_before[a]);  // bitwise: zero weights kill the new inputs
    }
}

TEST_CASE("input expansion grows exactly the declared parameter count") {
    for (const ExpandInit mode : {ExpandInit::Zero, ExpandInit::Seeded}) {
        SchedNet net = small_net(67);
        const std::size_t e = 3, nf = 5, tw = 6;
        std::size_t before_params = 0;
        auto count = [&](const SchedNet& n) {
            std::size_t c = 0;
            for (std::size_t r = 0; r < n.resources(); ++r) c += n.encoder(r).param_count();
            c += n.net_block().param_count() + n.trunk1().param_count() +
                 n.trunk2().param_count();
            for (std::size_t s = 0; s < n.services(); ++s) c += n.head(s).param_count();
            return c;
        };
        before_params = count(net);
        const Affine trunk1_before = net.trunk1();
        const Affine net_block_before = net.net_block();
        Rng rng(71);
        net.expand_input("r2", mode, rng);
        // New encoder (e weights + e biases), one net-block column per node,
        // e trunk columns.
        CHECK(count(net) == before_params + 2 * e + nf * net.nodes() + tw * e);
        CHECK(net.trunk1().in == trunk1_before.in + e);
        CHECK(net.net_block().in == net_block_before.in + net.nodes());
        // Old columns survive bitwise. Net block: node blocks keep old inputs
        // at shifted positions; check the first node's old columns.
        for (std::size_t o = 0; o < nf; ++o) {
            for (std::size_t r = 0; r < 2; ++r) {
                CHECK(net.net_block().W[o * net.net_block().in + r] ==
                      net_block_before.W[o * net_block_before.in + r]);
            }
        }
        for (std::size_t o = 0; o < tw; ++o) {
            for (std::size_t i = 0; i < trunk1_before.in; ++i) {
                CHECK(net.trunk1().W[o * net.trunk1().in + i] ==
                      trunk1_before.W[o * trunk1_before.in + i]);
            }
            CHECK(net.trunk1().b[o] == trunk1_before.b[o]);
        }
    }
}

TEST_CASE("adding a head preserves every existing service's Q-function") {
    SchedNet net = small_net(73);
    const std::vector<double> state = fixed_state(net, 9);
    const std::vector<double> q0 = net.forward(state, 0);
    const std::vector<double> q1 = net.forward(state, 1);
    Rng rng(79);
    net.add_head("s2", ExpandInit::Seeded, rng);
    CHECK(net.services() == 3);
    CHECK(net.service_names().back() == "s2");
    const std::vector<double> q0b = net.forward(state, 0);
    const std::vector<double> q1b = net.forward(state, 1);
    for (std::size_t a = 0; a < q0.size(); ++a) {
        CHECK(q0b[a] == q0[a]);
        CHECK(q1b[a] == q1[a]);
    }
    const std::vector<double> q2 = net.forward(state, 2);
    CHECK(q2.size() == net.actions());
}

TEST_CASE("JSON round trip preserves the network bit-for-bit") {
    SchedNet net = small_net(83);
    net.freeze("trunk");
    // Give the optimizer state some history so the round trip covers it.
    SchedNet target = net;
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) {
        Transition t;
        t.state = fixed_state(net, 500 + i);
        t.next_state = fixed_state(net, 600 + i);
        t.action = i % net.actions();
        t.service = i % 2;
        t.next_service = i % 2;
        t.reward = 0.1 * i;
        batch.push_back(t);
    }
    net.train_batch(batch, target, TrainConfig{});
    const SchedNet back = SchedNet::from_json(net.to_json());
    CHECK(back.equal_bits(net));
    CHECK(back.is_frozen("trunk"));
    CHECK(back.to_json().dump() == net.to_json().dump());
}

TEST_CASE("argmax_action matches the maximal Q entry") {
    SchedNet net = small_net(89);
    const std::vector<double> state = fixed_state(net, 10);
    for (std::size_t svc = 0; svc < net.services(); ++svc) {
        const std::vector<double> q = net.forward(state, svc);
        std::size_t best = 0;
        for (std::size_t a = 1; a < q.size(); ++a)
            if (q[a] > q[best]) best = a;
        CHECK(net.argmax_action(state, svc) == best);
    }
}

TEST_CASE("replay buffer is FIFO-bounded with seeded sampling") {
    ReplayBuffer buf(3, 101);
    auto make = [](double r) {
        Transition t;
        t.state = {r};
        t.next_state = {r + 1.0};
        t.reward = r;
        return t;
    };
    buf.push(make(0.0));
    buf.push(make(1.0));
    CHECK(buf.size() == 2);
    buf.push(make(2.0));
    buf.push(make(3.0));  // evicts the oldest (0.0)
    CHECK(buf.size() == 3);
    CHECK(buf.capacity() == 3);

    double lo = 1e18;
    for (int i = 0; i < 60; ++i) {
        for (const Transition& t : buf.sample(2)) lo = std::min(lo, t.reward);
    }
    CHECK(lo >= 1.0);  // the evicted element never reappears

    // Same seed, same pushes, same sample sequence.
    ReplayBuffer a(8, 7), b(8, 7);
    for (int i = 0; i < 8; ++i) {
        a.push(make(i));
        b.push(make(i));
    }
    for (int i = 0; i < 10; ++i) {
        const auto sa = a.sample(4);
        const auto sb = b.sample(4);
        REQUIRE(sa.size() == 4);
        for (std::size_t k = 0; k < 4; ++k) CHECK(sa[k].reward == sb[k].reward);
    }
}
