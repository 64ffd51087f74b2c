#include "drcorl/gaussian_policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace drcorl {

namespace {

constexpr double kSigmaFloor = 1e-3;  // variance floor 1e-6

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

CovarianceMode covariance_mode_from_name(const std::string& name) {
    if (name == "state_dependent") return CovarianceMode::StateDependent;
    if (name == "constant") return CovarianceMode::Constant;
    if (name == "near_dirac") return CovarianceMode::NearDirac;
    throw std::invalid_argument("unknown covariance mode '" + name +
                                "' (state_dependent|constant|near_dirac)");
}

std::string to_string(CovarianceMode mode) {
    switch (mode) {
        case CovarianceMode::StateDependent: return "state_dependent";
        case CovarianceMode::Constant: return "constant";
        case CovarianceMode::NearDirac: return "near_dirac";
    }
    return "?";
}

GaussianPolicy::GaussianPolicy(Eigen::Index state_dim, Eigen::Index action_dim,
                               std::vector<Eigen::Index> hidden, CovarianceMode mode,
                               Rng& rng, double init_sigma)
    : state_dim_(state_dim), action_dim_(action_dim), mode_(mode) {
    std::vector<Eigen::Index> widths;
    widths.push_back(state_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_dim);
    mean_net_ = Mlp(widths);
    mean_net_.init_uniform(rng);
    if (mode_ == CovarianceMode::StateDependent) {
        std_net_ = Mlp(widths);
        std_net_.init_uniform(rng);
    } else if (mode_ == CovarianceMode::Constant) {
        log_std_ = Eigen::VectorXd::Constant(action_dim, std::log(init_sigma));
    }
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& state) const {
    return mean_net_.forward(state);
}

Eigen::VectorXd GaussianPolicy::std_pre(const Eigen::VectorXd& state) const {
    return std_net_.forward(state);
}

Eigen::VectorXd GaussianPolicy::stddev(const Eigen::VectorXd& state) const {
    switch (mode_) {
        case CovarianceMode::StateDependent: {
            Eigen::VectorXd pre = std_pre(state);
            for (Eigen::Index i = 0; i < pre.size(); ++i) {
                pre[i] = softplus(pre[i]) + kSigmaFloor;
            }
            return pre;
        }
        case CovarianceMode::Constant: {
            return log_std_.array().exp().max(kSigmaFloor).matrix();
        }
        case CovarianceMode::NearDirac:
            return Eigen::VectorXd::Constant(action_dim_, dirac_sigma_);
    }
    throw std::logic_error("bad covariance mode");
}

double GaussianPolicy::entropy(const Eigen::VectorXd& state) const {
    const Eigen::VectorXd sigma = stddev(state);
    if (sigma.minCoeff() <= 0.0) throw std::domain_error("non-positive std");
    const double d = double(action_dim_);
    return sigma.array().log().sum() + 0.5 * d * std::log(2.0 * std::numbers::pi) + 0.5 * d;
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& state,
                                const Eigen::VectorXd& action) const {
    const Eigen::VectorXd m = mean(state);
    const Eigen::VectorXd sigma = stddev(state);
    const Eigen::ArrayXd normed = (action - m).array() / sigma.array();
    return -0.5 * normed.square().sum() - sigma.array().log().sum() -
           0.5 * double(action_dim_) * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd GaussianPolicy::sample(const Eigen::VectorXd& state, Rng& rng) const {
    return sample_with_noise(state, rng.normal_vector(action_dim_));
}

Eigen::VectorXd GaussianPolicy::sample_with_noise(const Eigen::VectorXd& state,
                                                  const Eigen::VectorXd& z) const {
    return mean(state) + stddev(state).cwiseProduct(z);
}

Eigen::Index GaussianPolicy::param_count() const {
    Eigen::Index n = mean_net_.param_count();
    if (mode_ == CovarianceMode::StateDependent) n += std_net_.param_count();
    if (mode_ == CovarianceMode::Constant) n += log_std_.size();
    return n;
}

Eigen::VectorXd GaussianPolicy::flat_params() const {
    Eigen::VectorXd flat(param_count());
    flat.head(mean_net_.param_count()) = mean_net_.params();
    if (mode_ == CovarianceMode::StateDependent) {
        flat.tail(std_net_.param_count()) = std_net_.params();
    } else if (mode_ == CovarianceMode::Constant) {
        flat.tail(log_std_.size()) = log_std_;
    }
    return flat;
}

void GaussianPolicy::set_flat_params(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("flat param size mismatch");
    mean_net_.params() = flat.head(mean_net_.param_count());
    if (mode_ == CovarianceMode::StateDependent) {
        std_net_.params() = flat.tail(std_net_.param_count());
    } else if (mode_ == CovarianceMode::Constant) {
        log_std_ = flat.tail(log_std_.size());
    }
}

void GaussianPolicy::accumulate_action_grad(const Eigen::VectorXd& state,
                                            const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& upstream,
                                            Eigen::VectorXd& grad) const {
    if (grad.size() != param_count()) throw std::invalid_argument("grad size mismatch");
    Mlp::Trace trace;
    mean_net_.forward(state, trace);
    auto mean_grad = grad.head(mean_net_.param_count());
    Eigen::VectorXd mean_grad_buf = mean_grad;
    mean_net_.backward(trace, upstream, mean_grad_buf);
    mean_grad = mean_grad_buf;

    if (mode_ == CovarianceMode::StateDependent) {
        Mlp::Trace strace;
        const Eigen::VectorXd pre = std_net_.forward(state, strace);
        Eigen::VectorXd up(pre.size());
        for (Eigen::Index i = 0; i < pre.size(); ++i) {
            up[i] = upstream[i] * z[i] * sigmoid(pre[i]);
        }
        Eigen::VectorXd std_grad_buf = grad.tail(std_net_.param_count());
        std_net_.backward(strace, up, std_grad_buf);
        grad.tail(std_net_.param_count()) = std_grad_buf;
    } else if (mode_ == CovarianceMode::Constant) {
        const Eigen::VectorXd sigma = stddev(state);
        grad.tail(log_std_.size()).array() +=
            upstream.array() * z.array() * sigma.array();
    }
}

void GaussianPolicy::accumulate_entropy_grad(const Eigen::VectorXd& state, double coef,
                                             Eigen::VectorXd& grad) const {
    if (grad.size() != param_count()) throw std::invalid_argument("grad size mismatch");
    if (mode_ == CovarianceMode::NearDirac) return;
    if (mode_ == CovarianceMode::Constant) {
        // entropy = sum log sigma_i + const, with sigma = exp(log_std)
        grad.tail(log_std_.size()).array() += coef;
        return;
    }
    Mlp::Trace strace;
    const Eigen::VectorXd pre = std_net_.forward(state, strace);
    Eigen::VectorXd sigma(pre.size());
    Eigen::VectorXd up(pre.size());
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
        sigma[i] = softplus(pre[i]) + kSigmaFloor;
        up[i] = coef * sigmoid(pre[i]) / sigma[i];
    }
    Eigen::VectorXd std_grad_buf = grad.tail(std_net_.param_count());
    std_net_.backward(strace, up, std_grad_buf);
    grad.tail(std_net_.param_count()) = std_grad_buf;
}

Eigen::VectorXd GaussianPolicy::reverse_kl_grad(const ScoreFn& score,
                                                const Eigen::VectorXd& state,
                                                std::size_t n_mc, Rng& rng) const {
    if (n_mc == 0) throw std::invalid_argument("n_mc must be >= 1");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count());
    for (std::size_t i = 0; i < n_mc; ++i) {
        const Eigen::VectorXd z = rng.normal_vector(action_dim_);
        const Eigen::VectorXd a = sample_with_noise(state, z);
        const Eigen::VectorXd neg_score = -score(a, state);
        accumulate_action_grad(state, z, neg_score / double(n_mc), grad);
    }
    accumulate_entropy_grad(state, -1.0, grad);
    return grad;
}

void GaussianPolicy::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "drcorl-policy";
    j["version"] = 1;
    j["state_dim"] = state_dim_;
    j["action_dim"] = action_dim_;
    j["mode"] = to_string(mode_);
    j["mean_widths"] = mean_net_.widths();
    const Eigen::VectorXd flat = flat_params();
    j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump();
}

GaussianPolicy GaussianPolicy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "drcorl-policy" || j.value("version", 0) != 1) {
        throw std::runtime_error("unrecognized policy checkpoint " + path);
    }
    const auto widths = j.at("mean_widths").get<std::vector<Eigen::Index>>();
    std::vector<Eigen::Index> hidden(widths.begin() + 1, widths.end() - 1);
    Rng dummy(0);
    GaussianPolicy p(j.at("state_dim").get<Eigen::Index>(),
                     j.at("action_dim").get<Eigen::Index>(), hidden,
                     covariance_mode_from_name(j.at("mode").get<std::string>()), dummy);
    const auto flat = j.at("params").get<std::vector<double>>();
    if (Eigen::Index(flat.size()) != p.param_count()) {
        throw std::runtime_error("policy checkpoint parameter mismatch " + path);
    }
    p.set_flat_params(Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size()));
    return p;
}

}  // namespace drcorl
