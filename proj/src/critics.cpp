#include "drcorl/critics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace drcorl {

double expectile_loss(double u, double tau) {
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau must lie in [0,1]");
    const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return w * u * u;
}

CriticEnsemble::CriticEnsemble(Eigen::Index state_dim, Eigen::Index action_dim,
                               CriticConfig cfg, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {
    if (cfg_.ensemble_size < 2) throw std::invalid_argument("ensemble size must be >= 2");
    auto q_widths = [&] {
        std::vector<Eigen::Index> w;
        w.push_back(state_dim + action_dim);
        w.insert(w.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        w.push_back(1);
        return w;
    }();
    auto v_widths = [&] {
        std::vector<Eigen::Index> w;
        w.push_back(state_dim);
        w.insert(w.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        w.push_back(1);
        return w;
    }();
    q_r1_ = Mlp(q_widths);
    q_r1_.init_uniform(rng);
    q_r2_ = Mlp(q_widths);
    q_r2_.init_uniform(rng);
    v_r_ = Mlp(v_widths);
    v_r_.init_uniform(rng);
    q_r1_target_ = q_r1_;
    q_r2_target_ = q_r2_;
    opt_q_r1_ = Adam(q_r1_.param_count(), cfg_.adam);
    opt_q_r2_ = Adam(q_r2_.param_count(), cfg_.adam);
    opt_v_r_ = Adam(v_r_.param_count(), cfg_.adam);
    for (int i = 0; i < cfg_.ensemble_size; ++i) {
        Mlp q(q_widths);
        q.init_uniform(rng);
        q_cost_target_.push_back(q);
        opt_q_cost_.emplace_back(q.param_count(), cfg_.adam);
        q_cost_.push_back(std::move(q));
    }
}

Eigen::VectorXd CriticEnsemble::join(const Eigen::VectorXd& state,
                                     const Eigen::VectorXd& action) const {
    Eigen::VectorXd x(state.size() + action.size());
    x << state, action;
    return x;
}

double CriticEnsemble::reward_q(const Eigen::VectorXd& state,
                                const Eigen::VectorXd& action) const {
    const Eigen::VectorXd x = join(state, action);
    return std::min(q_r1_.forward(x)[0], q_r2_.forward(x)[0]);
}

double CriticEnsemble::reward_value(const Eigen::VectorXd& state) const {
    return v_r_.forward(state)[0];
}

double CriticEnsemble::cost_q(int member, const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action) const {
    return q_cost_.at(std::size_t(member)).forward(join(state, action))[0];
}

double CriticEnsemble::cost_q_mean(const Eigen::VectorXd& state,
                                   const Eigen::VectorXd& action) const {
    const Eigen::VectorXd x = join(state, action);
    double sum = 0.0;
    for (const Mlp& q : q_cost_) sum += q.forward(x)[0];
    return sum / double(q_cost_.size());
}

double CriticEnsemble::ucb_cost(const Eigen::VectorXd& state,
                                const Eigen::VectorXd& action) const {
    const Eigen::VectorXd x = join(state, action);
    const auto n = double(q_cost_.size());
    double sum = 0.0, sumsq = 0.0;
    for (const Mlp& q : q_cost_) {
        const double v = q.forward(x)[0];
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return mean + cfg_.ucb_k * std::sqrt(var);
}

Eigen::VectorXd CriticEnsemble::reward_q_grad_action(const Eigen::VectorXd& state,
                                                     const Eigen::VectorXd& action) const {
    const Eigen::VectorXd x = join(state, action);
    const Mlp& argmin = q_r1_.forward(x)[0] <= q_r2_.forward(x)[0] ? q_r1_ : q_r2_;
    const Eigen::VectorXd gx = argmin.grad_input(x, Eigen::VectorXd::Ones(1));
    return gx.tail(action_dim_);
}

Eigen::VectorXd CriticEnsemble::ucb_cost_grad_action(const Eigen::VectorXd& state,
                                                     const Eigen::VectorXd& action) const {
    const Eigen::VectorXd x = join(state, action);
    const auto n = double(q_cost_.size());
    std::vector<double> values;
    std::vector<Eigen::VectorXd> grads;
    double sum = 0.0;
    Eigen::VectorXd grad_mean = Eigen::VectorXd::Zero(action_dim_);
    for (const Mlp& q : q_cost_) {
        values.push_back(q.forward(x)[0]);
        grads.push_back(q.grad_input(x, Eigen::VectorXd::Ones(1)).tail(action_dim_).eval());
        sum += values.back();
        grad_mean += grads.back();
    }
    const double mean = sum / n;
    grad_mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    const double std_dev = std::sqrt(var);
    Eigen::VectorXd grad = grad_mean;
    if (std_dev > 1e-12) {
        Eigen::VectorXd grad_std = Eigen::VectorXd::Zero(action_dim_);
        for (std::size_t i = 0; i < values.size(); ++i) {
            grad_std += (values[i] - mean) * grads[i];
        }
        grad += cfg_.ucb_k * grad_std / (n * std_dev);
    }
    return grad;
}

void CriticEnsemble::train_reward_step(const TransitionDataset& dataset, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    const std::size_t batch = cfg_.batch_size;
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.index(dataset.size());

    // Expectile step on V_r against the target Q pair.
    Eigen::VectorXd gv = Eigen::VectorXd::Zero(v_r_.param_count());
    for (std::size_t i : idx) {
        const Transition& tr = dataset[i];
        const Eigen::VectorXd x = join(tr.state, tr.action);
        const double q_min =
            std::min(q_r1_target_.forward(x)[0], q_r2_target_.forward(x)[0]);
        Mlp::Trace trace;
        const double v = v_r_.forward(tr.state, trace)[0];
        const double u = q_min - v;
        const double w = std::abs(cfg_.expectile_tau - (u < 0.0 ? 1.0 : 0.0));
        // d/dv of w u^2 = -2 w u
        v_r_.backward(trace, Eigen::VectorXd::Constant(1, -2.0 * w * u / double(batch)), gv);
    }
    opt_v_r_.step(v_r_.params(), gv);

    // Squared-error steps on both Q heads toward r + gamma V_r(s').
    Eigen::VectorXd g1 = Eigen::VectorXd::Zero(q_r1_.param_count());
    Eigen::VectorXd g2 = Eigen::VectorXd::Zero(q_r2_.param_count());
    for (std::size_t i : idx) {
        const Transition& tr = dataset[i];
        const double y = tr.reward + cfg_.gamma * v_r_.forward(tr.next_state)[0];
        const Eigen::VectorXd x = join(tr.state, tr.action);
        Mlp::Trace t1, t2;
        const double u1 = q_r1_.forward(x, t1)[0] - y;
        const double u2 = q_r2_.forward(x, t2)[0] - y;
        q_r1_.backward(t1, Eigen::VectorXd::Constant(1, 2.0 * u1 / double(batch)), g1);
        q_r2_.backward(t2, Eigen::VectorXd::Constant(1, 2.0 * u2 / double(batch)), g2);
    }
    opt_q_r1_.step(q_r1_.params(), g1);
    opt_q_r2_.step(q_r2_.params(), g2);

    soft_update_targets();
}

void CriticEnsemble::train_cost_step(const TransitionDataset& dataset,
                                     const ActionSampler& sampler, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    const std::size_t batch = cfg_.batch_size;
    struct Sample {
        std::size_t idx;
        Eigen::VectorXd next_action;
    };
    std::vector<Sample> samples(batch);
    for (auto& s : samples) {
        s.idx = rng.index(dataset.size());
        s.next_action = sampler(dataset[s.idx].next_state, rng);
    }
    for (std::size_t m = 0; m < q_cost_.size(); ++m) {
        Mlp& q = q_cost_[m];
        const Mlp& target = q_cost_target_[m];
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(q.param_count());
        for (const Sample& s : samples) {
            const Transition& tr = dataset[s.idx];
            const double y =
                tr.cost + cfg_.gamma * target.forward(join(tr.next_state, s.next_action))[0];
            Mlp::Trace trace;
            const double u = q.forward(join(tr.state, tr.action), trace)[0] - y;
            // TD residual plus the pessimism term -alpha E[Q_c].
            const double upstream = (2.0 * u - cfg_.pessimism_alpha) / double(batch);
            q.backward(trace, Eigen::VectorXd::Constant(1, upstream), grad);
        }
        opt_q_cost_[m].step(q.params(), grad);
    }
    soft_update_targets();
}

void CriticEnsemble::soft_update_targets() {
    const double tau = cfg_.soft_update_tau;
    auto blend = [tau](const Mlp& online, Mlp& target) {
        target.params() = tau * online.params() + (1.0 - tau) * target.params();
    };
    blend(q_r1_, q_r1_target_);
    blend(q_r2_, q_r2_target_);
    for (std::size_t m = 0; m < q_cost_.size(); ++m) blend(q_cost_[m], q_cost_target_[m]);
}

namespace {

nlohmann::json net_to_json(const Mlp& net) {
    nlohmann::json j;
    j["widths"] = net.widths();
    j["params"] = std::vector<double>(net.params().data(),
                                      net.params().data() + net.param_count());
    return j;
}

Mlp net_from_json(const nlohmann::json& j) {
    Mlp net(j.at("widths").get<std::vector<Eigen::Index>>());
    const auto flat = j.at("params").get<std::vector<double>>();
    if (Eigen::Index(flat.size()) != net.param_count()) {
        throw std::runtime_error("critic checkpoint parameter mismatch");
    }
    net.params() = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
    return net;
}

}  // namespace

void CriticEnsemble::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "drcorl-critics";
    j["version"] = 1;
    j["state_dim"] = state_dim_;
    j["action_dim"] = action_dim_;
    j["ensemble_size"] = cfg_.ensemble_size;
    j["ucb_k"] = cfg_.ucb_k;
    j["pessimism_alpha"] = cfg_.pessimism_alpha;
    j["expectile_tau"] = cfg_.expectile_tau;
    j["soft_update_tau"] = cfg_.soft_update_tau;
    j["gamma"] = cfg_.gamma;
    j["q_r1"] = net_to_json(q_r1_);
    j["q_r2"] = net_to_json(q_r2_);
    j["v_r"] = net_to_json(v_r_);
    j["q_r1_target"] = net_to_json(q_r1_target_);
    j["q_r2_target"] = net_to_json(q_r2_target_);
    j["q_cost"] = nlohmann::json::array();
    j["q_cost_target"] = nlohmann::json::array();
    for (const Mlp& q : q_cost_) j["q_cost"].push_back(net_to_json(q));
    for (const Mlp& q : q_cost_target_) j["q_cost_target"].push_back(net_to_json(q));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump();
}

CriticEnsemble CriticEnsemble::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "drcorl-critics" || j.value("version", 0) != 1) {
        throw std::runtime_error("unrecognized critic checkpoint " + path);
    }
    CriticEnsemble c;
    c.state_dim_ = j.at("state_dim").get<Eigen::Index>();
    c.action_dim_ = j.at("action_dim").get<Eigen::Index>();
    c.cfg_.ensemble_size = j.at("ensemble_size").get<int>();
    c.cfg_.ucb_k = j.at("ucb_k").get<double>();
    c.cfg_.pessimism_alpha = j.at("pessimism_alpha").get<double>();
    c.cfg_.expectile_tau = j.at("expectile_tau").get<double>();
    c.cfg_.soft_update_tau = j.at("soft_update_tau").get<double>();
    c.cfg_.gamma = j.at("gamma").get<double>();
    c.q_r1_ = net_from_json(j.at("q_r1"));
    c.q_r2_ = net_from_json(j.at("q_r2"));
    c.v_r_ = net_from_json(j.at("v_r"));
    c.q_r1_target_ = net_from_json(j.at("q_r1_target"));
    c.q_r2_target_ = net_from_json(j.at("q_r2_target"));
    for (const auto& entry : j.at("q_cost")) c.q_cost_.push_back(net_from_json(entry));
    for (const auto& entry : j.at("q_cost_target")) {
        c.q_cost_target_.push_back(net_from_json(entry));
    }
    c.opt_q_r1_ = Adam(c.q_r1_.param_count(), c.cfg_.adam);
    c.opt_q_r2_ = Adam(c.q_r2_.param_count(), c.cfg_.adam);
    c.opt_v_r_ = Adam(c.v_r_.param_count(), c.cfg_.adam);
    for (const Mlp& q : c.q_cost_) c.opt_q_cost_.emplace_back(q.param_count(), c.cfg_.adam);
    return c;
}

EpisodicCostEstimate estimate_episodic_cost(const CriticEnsemble& critics,
                                            const TransitionDataset& dataset,
                                            const ActionSampler& sampler,
                                            std::size_t batch_size, double horizon_length,
                                            double gamma, Rng& rng) {
    if (batch_size == 0 || dataset.empty()) {
        throw std::invalid_argument("episodic cost estimate needs a non-empty batch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const Eigen::VectorXd& state = dataset[rng.index(dataset.size())].state;
        sum += critics.ucb_cost(state, sampler(state, rng));
    }
    EpisodicCostEstimate est;
    est.q_ucb = sum / double(batch_size);
    est.episodic = est.q_ucb * (1.0 - gamma) * horizon_length;
    return est;
}

Eigen::VectorXd one_hot(Eigen::Index index, Eigen::Index size) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    v[index] = 1.0;
    return v;
}

TransitionDataset one_hot_dataset(const TransitionDataset& dataset, Eigen::Index n_states,
                                  Eigen::Index n_actions) {
    TransitionDataset out;
    for (const Transition& t : dataset.transitions()) {
        Transition enc;
        enc.state = one_hot(Eigen::Index(t.state[0]), n_states);
        enc.action = one_hot(Eigen::Index(t.action[0]), n_actions);
        enc.next_state = one_hot(Eigen::Index(t.next_state[0]), n_states);
        enc.reward = t.reward;
        enc.cost = t.cost;
        enc.done = t.done;
        out.push_back(std::move(enc));
    }
    return out;
}

}  // namespace drcorl
