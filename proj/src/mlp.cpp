#include "drcorl/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace drcorl {

Mlp::Mlp(std::vector<Eigen::Index> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp needs at least two widths");
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        Slice s;
        s.rows = widths_[l + 1];
        s.cols = widths_[l];
        s.weight_offset = offset;
        offset += s.rows * s.cols;
        s.bias_offset = offset;
        offset += s.rows;
        slices_.push_back(s);
    }
    params_ = Eigen::VectorXd::Zero(offset);
}

void Mlp::init_uniform(Rng& rng) {
    for (std::size_t l = 0; l < slices_.size(); ++l) {
        const double bound = 1.0 / std::sqrt(double(slices_[l].cols));
        auto w = weight(params_, l);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
        }
        auto b = bias(params_, l);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    if (input.size() != input_dim()) throw std::invalid_argument("Mlp input dimension mismatch");
    Eigen::VectorXd h = input;
    for (std::size_t l = 0; l < slices_.size(); ++l) {
        h = (weight(params_, l) * h + bias(params_, l)).eval();
        if (l + 1 < slices_.size()) h = h.array().tanh();
    }
    return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input, Trace& trace) const {
    if (input.size() != input_dim()) throw std::invalid_argument("Mlp input dimension mismatch");
    trace.inputs.assign(slices_.size(), {});
    Eigen::VectorXd h = input;
    for (std::size_t l = 0; l < slices_.size(); ++l) {
        trace.inputs[l] = h;
        h = (weight(params_, l) * h + bias(params_, l)).eval();
        if (l + 1 < slices_.size()) h = h.array().tanh();
    }
    trace.output = h;
    return h;
}

void Mlp::backward(const Trace& trace, const Eigen::VectorXd& upstream,
                   Eigen::VectorXd& param_grad, Eigen::VectorXd* input_grad) const {
    if (upstream.size() != output_dim()) throw std::invalid_argument("upstream size mismatch");
    if (param_grad.size() != params_.size()) throw std::invalid_argument("param_grad size");
    Eigen::VectorXd g = upstream;
    for (std::size_t li = slices_.size(); li-- > 0;) {
        if (li + 1 < slices_.size()) {
            // Post-activation of layer li is the input of layer li+1.
            const Eigen::VectorXd& act = trace.inputs[li + 1];
            g.array() *= (1.0 - act.array().square());
        }
        weight(param_grad, li) += g * trace.inputs[li].transpose();
        bias(param_grad, li) += g;
        if (li > 0 || input_grad != nullptr) g = (weight(params_, li).transpose() * g).eval();
        if (li == 0 && input_grad != nullptr) *input_grad = g;
    }
}

Eigen::VectorXd Mlp::grad_params(const Eigen::VectorXd& input,
                                 const Eigen::VectorXd& upstream) const {
    Trace trace;
    forward(input, trace);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params_.size());
    backward(trace, upstream, g);
    return g;
}

Eigen::VectorXd Mlp::grad_input(const Eigen::VectorXd& input,
                                const Eigen::VectorXd& upstream) const {
    Trace trace;
    forward(input, trace);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params_.size());
    Eigen::VectorXd input_grad;
    backward(trace, upstream, g, &input_grad);
    return input_grad;
}

void Mlp::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "drcorl-mlp";
    j["version"] = 1;
    j["widths"] = widths_;
    j["params"] = std::vector<double>(params_.data(), params_.data() + params_.size());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump();
}

Mlp Mlp::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "drcorl-mlp" || j.value("version", 0) != 1) {
        throw std::runtime_error("unrecognized checkpoint format in " + path);
    }
    Mlp net(j.at("widths").get<std::vector<Eigen::Index>>());
    const auto flat = j.at("params").get<std::vector<double>>();
    if (Eigen::Index(flat.size()) != net.param_count()) {
        throw std::runtime_error("checkpoint parameter count mismatch in " + path);
    }
    net.params_ = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
    return net;
}

Adam::Adam(Eigen::Index n, Config cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (grad.size() != m_.size()) throw std::invalid_argument("Adam gradient size mismatch");
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    params.array() -=
        cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
}

}  // namespace drcorl
