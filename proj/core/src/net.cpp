#include "igaa/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace igaa {

void Affine::apply(const double* x, double* y) const {
    for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = W.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
    if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch) {
    if (data_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
    std::vector<Transition> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(data_[rng_.index(data_.size())]);
    return out;
}

SchedNet::SchedNet(std::size_t nodes, std::vector<std::string> resource_names,
                   std::vector<std::string> service_names, std::size_t actions, Rng& init_rng,
                   std::size_t encoder_dim, std::size_t net_feature_dim, std::size_t trunk_width)
    : nodes_(nodes),
      actions_(actions),
      encoder_dim_(encoder_dim),
      net_feature_dim_(net_feature_dim),
      trunk_width_(trunk_width),
      resource_names_(std::move(resource_names)),
      service_names_(std::move(service_names)) {
    if (nodes_ == 0 || actions_ == 0 || resource_names_.empty() || service_names_.empty())
        throw std::invalid_argument("network needs nodes, actions, resources and services");
    const std::size_t m = resource_names_.size();
    for (std::size_t r = 0; r < m; ++r) {
        encoders_.emplace_back(1, encoder_dim_);
        init_affine(encoders_.back(), init_rng);
    }
    net_block_ = Affine(nodes_ * (m + 1), net_feature_dim_);
    init_affine(net_block_, init_rng);
    trunk1_ = Affine(net_feature_dim_ + m * encoder_dim_, trunk_width_);
    init_affine(trunk1_, init_rng);
    trunk2_ = Affine(trunk_width_, trunk_width_);
    init_affine(trunk2_, init_rng);
    for (std::size_t s = 0; s < service_names_.size(); ++s) {
        heads_.emplace_back(trunk_width_, actions_);
        init_affine(heads_.back(), init_rng);
    }
    opt_encoders_.resize(encoders_.size());
    for (std::size_t r = 0; r < encoders_.size(); ++r) opt_encoders_[r].match(encoders_[r]);
    opt_net_block_.match(net_block_);
    opt_trunk1_.match(trunk1_);
    opt_trunk2_.match(trunk2_);
    opt_heads_.resize(heads_.size());
    for (std::size_t s = 0; s < heads_.size(); ++s) opt_heads_[s].match(heads_[s]);
}

void SchedNet::init_affine(Affine& a, Rng& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(a.in));
    for (double& w : a.W) w = rng.normal(0.0, scale);
    std::fill(a.b.begin(), a.b.end(), 0.0);
}

std::vector<double> SchedNet::forward_cached(const std::vector<double>& state,
                                             std::size_t service, ForwardCache& cache) const {
    if (state.size() != state_dim())
        throw std::invalid_argument("state size " + std::to_string(state.size()) +
                                    " does not match expected " + std::to_string(state_dim()));
    if (service >= heads_.size()) throw std::invalid_argument("unknown service head");
    const std::size_t m = resources();
    const std::size_t net_dim = nodes_ * (m + 1);

    cache.service = service;
    cache.net_in.assign(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(net_dim));
    cache.req_in.assign(state.begin() + static_cast<std::ptrdiff_t>(net_dim), state.end());

    cache.concat.assign(net_feature_dim_ + m * encoder_dim_, 0.0);
    net_block_.apply(cache.net_in.data(), cache.concat.data());
    for (std::size_t r = 0; r < m; ++r)
        encoders_[r].apply(&cache.req_in[r], cache.concat.data() + net_feature_dim_ +
                                                 r * encoder_dim_);

    cache.z1.assign(trunk_width_, 0.0);
    trunk1_.apply(cache.concat.data(), cache.z1.data());
    cache.h1 = cache.z1;
    for (double& v : cache.h1) v = std::max(0.0, v);

    cache.z2.assign(trunk_width_, 0.0);
    trunk2_.apply(cache.h1.data(), cache.z2.data());
    cache.h2 = cache.z2;
    for (double& v : cache.h2) v = std::max(0.0, v);

    cache.q.assign(actions_, 0.0);
    heads_[service].apply(cache.h2.data(), cache.q.data());
    return cache.q;
}

std::vector<double> SchedNet::forward(const std::vector<double>& state,
                                      std::size_t service) const {
    ForwardCache cache;
    return forward_cached(state, service, cache);
}

std::size_t SchedNet::argmax_action(const std::vector<double>& state, std::size_t service) const {
    const std::vector<double> q = forward(state, service);
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

std::vector<std::string> SchedNet::group_names() const {
    std::vector<std::string> names;
    for (const auto& r : resource_names_) names.push_back("enc:" + r);
    names.push_back("net_block");
    names.push_back("trunk");
    for (const auto& s : service_names_) names.push_back("head:" + s);
    return names;
}

void SchedNet::freeze(const std::string& group) {
    const auto names = group_names();
    if (std::find(names.begin(), names.end(), group) == names.end())
        throw std::invalid_argument("unknown parameter group: " + group);
    frozen_.insert(group);
}

void SchedNet::unfreeze(const std::string& group) { frozen_.erase(group); }

SchedNet::Grads SchedNet::zero_grads() const {
    Grads g;
    for (const auto& e : encoders_) g.encoders.emplace_back(e.in, e.out);
    g.net_block = Affine(net_block_.in, net_block_.out);
    g.trunk1 = Affine(trunk1_.in, trunk1_.out);
    g.trunk2 = Affine(trunk2_.in, trunk2_.out);
    for (const auto& h : heads_) g.heads.emplace_back(h.in, h.out);
    return g;
}

void SchedNet::backward(const ForwardCache& cache, const std::vector<double>& dq,
                        Grads& g) const {
    if (dq.size() != actions_) throw std::invalid_argument("dq size mismatch");
    const std::size_t m = resources();
    const Affine& head = heads_[cache.service];
    Affine& ghead = g.heads[cache.service];

    std::vector<double> dh2(trunk_width_, 0.0);
    for (std::size_t o = 0; o < head.out; ++o) {
        ghead.b[o] += dq[o];
        for (std::size_t i = 0; i < head.in; ++i) {
            ghead.W[o * head.in + i] += dq[o] * cache.h2[i];
            dh2[i] += head.W[o * head.in + i] * dq[o];
        }
    }

    std::vector<double> dz2(trunk_width_, 0.0);
    for (std::size_t i = 0; i < trunk_width_; ++i) dz2[i] = cache.z2[i] > 0.0 ? dh2[i] : 0.0;

    std::vector<double> dh1(trunk_width_, 0.0);
    for (std::size_t o = 0; o < trunk2_.out; ++o) {
        g.trunk2.b[o] += dz2[o];
        for (std::size_t i = 0; i < trunk2_.in; ++i) {
            g.trunk2.W[o * trunk2_.in + i] += dz2[o] * cache.h1[i];
            dh1[i] += trunk2_.W[o * trunk2_.in + i] * dz2[o];
        }
    }

    std::vector<double> dz1(trunk_width_, 0.0);
    for (std::size_t i = 0; i < trunk_width_; ++i) dz1[i] = cache.z1[i] > 0.0 ? dh1[i] : 0.0;

    std::vector<double> dconcat(trunk1_.in, 0.0);
    for (std::size_t o = 0; o < trunk1_.out; ++o) {
        g.trunk1.b[o] += dz1[o];
        for (std::size_t i = 0; i < trunk1_.in; ++i) {
            g.trunk1.W[o * trunk1_.in + i] += dz1[o] * cache.concat[i];
            dconcat[i] += trunk1_.W[o * trunk1_.in + i] * dz1[o];
        }
    }

    for (std::size_t o = 0; o < net_block_.out; ++o) {
        const double d = dconcat[o];
        g.net_block.b[o] += d;
        for (std::size_t i = 0; i < net_block_.in; ++i)
            g.net_block.W[o * net_block_.in + i] += d * cache.net_in[i];
    }

    for (std::size_t r = 0; r < m; ++r) {
        const double x = cache.req_in[r];
        for (std::size_t o = 0; o < encoder_dim_; ++o) {
            const double d = dconcat[net_feature_dim_ + r * encoder_dim_ + o];
            g.encoders[r].b[o] += d;
            g.encoders[r].W[o] += d * x;
        }
    }
}

void SchedNet::adam_update(Affine& p, const Affine& g, AdamState& s, const TrainConfig& cfg) {
    ++s.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < p.W.size(); ++i) {
        s.mW[i] = cfg.beta1 * s.mW[i] + (1.0 - cfg.beta1) * g.W[i];
        s.vW[i] = cfg.beta2 * s.vW[i] + (1.0 - cfg.beta2) * g.W[i] * g.W[i];
        p.W[i] -= cfg.lr * (s.mW[i] / bc1) / (std::sqrt(s.vW[i] / bc2) + cfg.adam_eps);
    }
    for (std::size_t i = 0; i < p.b.size(); ++i) {
        s.mb[i] = cfg.beta1 * s.mb[i] + (1.0 - cfg.beta1) * g.b[i];
        s.vb[i] = cfg.beta2 * s.vb[i] + (1.0 - cfg.beta2) * g.b[i] * g.b[i];
        p.b[i] -= cfg.lr * (s.mb[i] / bc1) / (std::sqrt(s.vb[i] / bc2) + cfg.adam_eps);
    }
}

void SchedNet::adam_step(const Grads& g, const TrainConfig& cfg) {
    for (std::size_t r = 0; r < encoders_.size(); ++r)
        if (!frozen_.count("enc:" + resource_names_[r]))
            adam_update(encoders_[r], g.encoders[r], opt_encoders_[r], cfg);
    if (!frozen_.count("net_block")) adam_update(net_block_, g.net_block, opt_net_block_, cfg);
    if (!frozen_.count("trunk")) {
        adam_update(trunk1_, g.trunk1, opt_trunk1_, cfg);
        adam_update(trunk2_, g.trunk2, opt_trunk2_, cfg);
    }
    for (std::size_t s = 0; s < heads_.size(); ++s)
        if (!frozen_.count("head:" + service_names_[s]))
            adam_update(heads_[s], g.heads[s], opt_heads_[s], cfg);
}

double SchedNet::train_batch(const std::vector<Transition>& batch, const SchedNet& target,
                             const TrainConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    Grads g = zero_grads();
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    ForwardCache cache;
    for (const Transition& tr : batch) {
        double y = tr.reward;
        if (!tr.terminal) {
            const std::size_t a_star = argmax_action(tr.next_state, tr.next_service);
            const std::vector<double> qt = target.forward(tr.next_state, tr.next_service);
            y += cfg.gamma * qt[a_star];
        }
        const std::vector<double> q = forward_cached(tr.state, tr.service, cache);
        if (tr.action >= q.size()) throw std::invalid_argument("transition action out of range");
        const double diff = q[tr.action] - y;
        loss += diff * diff * inv;
        std::vector<double> dq(actions_, 0.0);
        dq[tr.action] = 2.0 * diff * inv;
        backward(cache, dq, g);
    }
    adam_step(g, cfg);
    return loss;
}

void SchedNet::soft_update(SchedNet& target, const SchedNet& online, double rho) {
    auto blend = [rho](Affine& t, const Affine& o) {
        for (std::size_t i = 0; i < t.W.size(); ++i) t.W[i] = rho * o.W[i] + (1.0 - rho) * t.W[i];
        for (std::size_t i = 0; i < t.b.size(); ++i) t.b[i] = rho * o.b[i] + (1.0 - rho) * t.b[i];
    };
    if (target.encoders_.size() != online.encoders_.size() ||
        target.heads_.size() != online.heads_.size() ||
        target.trunk1_.in != online.trunk1_.in || target.net_block_.in != online.net_block_.in)
        throw std::invalid_argument("target and online network shapes differ");
    for (std::size_t r = 0; r < target.encoders_.size(); ++r)
        blend(target.encoders_[r], online.encoders_[r]);
    blend(target.net_block_, online.net_block_);
    blend(target.trunk1_, online.trunk1_);
    blend(target.trunk2_, online.trunk2_);
    for (std::size_t s = 0; s < target.heads_.size(); ++s)
        blend(target.heads_[s], online.heads_[s]);
}

void SchedNet::expand_input(const std::string& resource_name, ExpandInit mode, Rng& rng) {
    for (const auto& r : resource_names_)
        if (r == resource_name)
            throw std::invalid_argument("resource " + resource_name + " already has an encoder");
    const std::size_t m = resources();

    // Each node block grows from (m+1) to (m+2) columns; the new availability
    // column slots in just before the node's distance column.
    Affine nb(nodes_ * (m + 2), net_block_.out);
    for (std::size_t o = 0; o < net_block_.out; ++o) {
        for (std::size_t node = 0; node < nodes_; ++node) {
            const std::size_t src = o * net_block_.in + node * (m + 1);
            const std::size_t dst = o * nb.in + node * (m + 2);
            for (std::size_t k = 0; k < m; ++k) nb.W[dst + k] = net_block_.W[src + k];
            nb.W[dst + m] = mode == ExpandInit::Zero ? 0.0 : rng.normal(0.0, 0.01);
            nb.W[dst + m + 1] = net_block_.W[src + m];  // distance column
        }
        nb.b[o] = net_block_.b[o];
    }

    Affine enc(1, encoder_dim_);
    if (mode == ExpandInit::Seeded)
        for (double& w : enc.W) w = rng.normal(0.0, 0.01);

    // Trunk layer 1 gains encoder_dim columns at the end of each row, since
    // the new encoder's output is appended to the concatenation.
    Affine t1(trunk1_.in + encoder_dim_, trunk1_.out);
    for (std::size_t o = 0; o < trunk1_.out; ++o) {
        for (std::size_t i = 0; i < trunk1_.in; ++i)
            t1.W[o * t1.in + i] = trunk1_.W[o * trunk1_.in + i];
        for (std::size_t k = 0; k < encoder_dim_; ++k)
            t1.W[o * t1.in + trunk1_.in + k] =
                mode == ExpandInit::Zero ? 0.0 : rng.normal(0.0, 0.01);
        t1.b[o] = trunk1_.b[o];
    }

    net_block_ = std::move(nb);
    trunk1_ = std::move(t1);
    encoders_.push_back(std::move(enc));
    resource_names_.push_back(resource_name);

    // Optimizer moments for resized groups restart; expansion is a structural
    // event, not a gradient step.
    opt_net_block_.match(net_block_);
    opt_trunk1_.match(trunk1_);
    opt_encoders_.emplace_back();
    opt_encoders_.back().match(encoders_.back());
}

void SchedNet::add_head(const std::string& service_name, ExpandInit mode, Rng& rng) {
    for (const auto& s : service_names_)
        if (s == service_name)
            throw std::invalid_argument("service " + service_name + " already has a head");
    Affine h(trunk_width_, actions_);
    if (mode == ExpandInit::Seeded) init_affine(h, rng);
    heads_.push_back(std::move(h));
    service_names_.push_back(service_name);
    opt_heads_.emplace_back();
    opt_heads_.back().match(heads_.back());
}

bool SchedNet::equal_bits(const SchedNet& other) const {
    auto eq = [](const Affine& a, const Affine& b) {
        return a.in == b.in && a.out == b.out && a.W == b.W && a.b == b.b;
    };
    if (encoders_.size() != other.encoders_.size() || heads_.size() != other.heads_.size())
        return false;
    for (std::size_t r = 0; r < encoders_.size(); ++r)
        if (!eq(encoders_[r], other.encoders_[r])) return false;
    for (std::size_t s = 0; s < heads_.size(); ++s)
        if (!eq(heads_[s], other.heads_[s])) return false;
    return eq(net_block_, other.net_block_) && eq(trunk1_, other.trunk1_) &&
           eq(trunk2_, other.trunk2_);
}

namespace {

nlohmann::json affine_to_json(const Affine& a) {
    return {{"in", a.in}, {"out", a.out}, {"W", a.W}, {"b", a.b}};
}

Affine affine_from_json(const nlohmann::json& j) {
    Affine a(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
    a.W = j.at("W").get<std::vector<double>>();
    a.b = j.at("b").get<std::vector<double>>();
    if (a.W.size() != a.in * a.out || a.b.size() != a.out)
        throw std::invalid_argument("affine payload shape mismatch");
    return a;
}

nlohmann::json adam_to_json(const AdamState& s) {
    return {{"mW", s.mW}, {"vW", s.vW}, {"mb", s.mb}, {"vb", s.vb}, {"t", s.t}};
}

AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s;
    s.mW = j.at("mW").get<std::vector<double>>();
    s.vW = j.at("vW").get<std::vector<double>>();
    s.mb = j.at("mb").get<std::vector<double>>();
    s.vb = j.at("vb").get<std::vector<double>>();
    s.t = j.at("t").get<std::uint64_t>();
    return s;
}

}  // namespace

nlohmann::json SchedNet::to_json() const {
    nlohmann::json enc = nlohmann::json::array();
    nlohmann::json enc_opt = nlohmann::json::array();
    for (std::size_t r = 0; r < encoders_.size(); ++r) {
        enc.push_back(affine_to_json(encoders_[r]));
        enc_opt.push_back(adam_to_json(opt_encoders_[r]));
    }
    nlohmann::json hd = nlohmann::json::array();
    nlohmann::json hd_opt = nlohmann::json::array();
    for (std::size_t s = 0; s < heads_.size(); ++s) {
        hd.push_back(affine_to_json(heads_[s]));
        hd_opt.push_back(adam_to_json(opt_heads_[s]));
    }
    return {{"nodes", nodes_},
            {"actions", actions_},
            {"encoder_dim", encoder_dim_},
            {"net_feature_dim", net_feature_dim_},
            {"trunk_width", trunk_width_},
            {"resource_names", resource_names_},
            {"service_names", service_names_},
            {"encoders", enc},
            {"net_block", affine_to_json(net_block_)},
            {"trunk1", affine_to_json(trunk1_)},
            {"trunk2", affine_to_json(trunk2_)},
            {"heads", hd},
            {"opt_encoders", enc_opt},
            {"opt_net_block", adam_to_json(opt_net_block_)},
            {"opt_trunk1", adam_to_json(opt_trunk1_)},
            {"opt_trunk2", adam_to_json(opt_trunk2_)},
            {"opt_heads", hd_opt},
            {"frozen", std::vector<std::string>(frozen_.begin(), frozen_.end())}};
}

SchedNet SchedNet::from_json(const nlohmann::json& j) {
    SchedNet n;
    n.nodes_ = j.at("nodes").get<std::size_t>();
    n.actions_ = j.at("actions").get<std::size_t>();
    n.encoder_dim_ = j.at("encoder_dim").get<std::size_t>();
    n.net_feature_dim_ = j.at("net_feature_dim").get<std::size_t>();
    n.trunk_width_ = j.at("trunk_width").get<std::size_t>();
    n.resource_names_ = j.at("resource_names").get<std::vector<std::string>>();
    n.service_names_ = j.at("service_names").get<std::vector<std::string>>();
    for (const auto& e : j.at("encoders")) n.encoders_.push_back(affine_from_json(e));
    n.net_block_ = affine_from_json(j.at("net_block"));
    n.trunk1_ = affine_from_json(j.at("trunk1"));
    n.trunk2_ = affine_from_json(j.at("trunk2"));
    for (const auto& h : j.at("heads")) n.heads_.push_back(affine_from_json(h));
    for (const auto& e : j.at("opt_encoders")) n.opt_encoders_.push_back(adam_from_json(e));
    n.opt_net_block_ = adam_from_json(j.at("opt_net_block"));
    n.opt_trunk1_ = adam_from_json(j.at("opt_trunk1"));
    n.opt_trunk2_ = adam_from_json(j.at("opt_trunk2"));
    for (const auto& h : j.at("opt_heads")) n.opt_heads_.push_back(adam_from_json(h));
    for (const auto& f : j.at("frozen")) n.frozen_.insert(f.get<std::string>());
    if (n.encoders_.size() != n.resource_names_.size() ||
        n.heads_.size() != n.service_names_.size())
        throw std::invalid_argument("checkpoint group counts do not match names");
    return n;
}

}  // namespace igaa
