#include "drcorl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace drcorl {

namespace {
constexpr double kBetaFloor = 1e-4;
constexpr double kBetaCeil = 0.999;
}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
    if (beta_.empty()) throw std::invalid_argument("schedule needs at least one step");
    alpha_bar_.resize(beta_.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < beta_.size(); ++i) {
        if (!(beta_[i] > 0.0 && beta_[i] < 1.0)) {
            throw std::invalid_argument("beta_t must lie in (0,1)");
        }
        prod *= 1.0 - beta_[i];
        alpha_bar_[i] = prod;
    }
}

NoiseSchedule NoiseSchedule::constant(int T, double beta) {
    return NoiseSchedule(std::vector<double>(std::size_t(T), beta));
}

NoiseSchedule NoiseSchedule::sqrt_growth(int T, double scale) {
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        betas[std::size_t(t - 1)] =
            std::clamp(scale * std::sqrt(double(t)), kBetaFloor, kBetaCeil);
    }
    return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::linear_growth(int T, double slope, double intercept) {
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        betas[std::size_t(t - 1)] =
            std::clamp(slope * double(t) + intercept, kBetaFloor, kBetaCeil);
    }
    return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_name(const std::string& name, int T) {
    if (name == "constant") return constant(T);
    if (name == "sqrt") return sqrt_growth(T);
    if (name == "linear") return linear_growth(T);
    throw std::invalid_argument("unknown schedule '" + name + "' (constant|sqrt|linear)");
}

NoisedAction noise_action(const NoiseSchedule& schedule, const Eigen::VectorXd& a0, int t,
                          Rng& rng) {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("timestep out of range");
    NoisedAction out;
    out.eps = rng.normal_vector(a0.size());
    out.noised = std::sqrt(schedule.alpha_bar(t)) * a0 +
                 std::sqrt(schedule.beta_bar(t)) * out.eps;
    return out;
}

Denoiser::Denoiser(Eigen::Index action_dim, Eigen::Index state_dim,
                   std::vector<Eigen::Index> hidden, int T, Rng& rng)
    : action_dim_(action_dim), state_dim_(state_dim), T_(T) {
    std::vector<Eigen::Index> widths;
    widths.push_back(action_dim + state_dim + 3);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_dim);
    net_ = Mlp(widths);
    net_.init_uniform(rng);
}

Eigen::VectorXd Denoiser::embed(const Eigen::VectorXd& noised_action, int t,
                                const Eigen::VectorXd& state) const {
    if (noised_action.size() != action_dim_ || state.size() != state_dim_) {
        throw std::invalid_argument("denoiser input dimension mismatch");
    }
    Eigen::VectorXd input(action_dim_ + state_dim_ + 3);
    input.head(action_dim_) = noised_action;
    input.segment(action_dim_, state_dim_) = state;
    const double frac = double(t) / double(T_);
    input[action_dim_ + state_dim_] = frac;
    input[action_dim_ + state_dim_ + 1] = std::sin(2.0 * std::numbers::pi * frac);
    input[action_dim_ + state_dim_ + 2] = std::cos(2.0 * std::numbers::pi * frac);
    return input;
}

Eigen::VectorXd Denoiser::predict(const Eigen::VectorXd& noised_action, int t,
                                  const Eigen::VectorXd& state) const {
    return net_.forward(embed(noised_action, t, state));
}

Eigen::VectorXd Denoiser::score(const NoiseSchedule& schedule, const Eigen::VectorXd& action,
                                int t, const Eigen::VectorXd& state) const {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("timestep out of range");
    const double bb = schedule.beta_bar(t);
    if (bb <= 0.0) throw std::domain_error("score undefined at beta_bar_t = 0");
    return -predict(action, t, state) / std::sqrt(bb);
}

void Denoiser::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "drcorl-denoiser";
    j["version"] = 1;
    j["action_dim"] = action_dim_;
    j["state_dim"] = state_dim_;
    j["T"] = T_;
    j["widths"] = net_.widths();
    j["params"] =
        std::vector<double>(net_.params().data(), net_.params().data() + net_.param_count());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump();
}

Denoiser Denoiser::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "drcorl-denoiser" || j.value("version", 0) != 1) {
        throw std::runtime_error("unrecognized denoiser checkpoint " + path);
    }
    Denoiser d;
    d.action_dim_ = j.at("action_dim").get<Eigen::Index>();
    d.state_dim_ = j.at("state_dim").get<Eigen::Index>();
    d.T_ = j.at("T").get<int>();
    d.net_ = Mlp(j.at("widths").get<std::vector<Eigen::Index>>());
    const auto flat = j.at("params").get<std::vector<double>>();
    if (Eigen::Index(flat.size()) != d.net_.param_count()) {
        throw std::runtime_error("denoiser checkpoint parameter mismatch " + path);
    }
    d.net_.params() = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
    return d;
}

std::vector<double> train_denoiser(const TransitionDataset& dataset,
                                   const NoiseSchedule& schedule, Denoiser& denoiser,
                                   const DiffusionTrainConfig& cfg, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("cannot train denoiser on empty dataset");
    const TimeWeightFn weight = cfg.weight ? cfg.weight : [](int) { return 1.0; };
    Adam opt(denoiser.net().param_count(), cfg.adam);
    Eigen::VectorXd grad(denoiser.net().param_count());
    std::vector<double> losses;
    losses.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        grad.setZero();
        double loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const Transition& tr = dataset[rng.index(dataset.size())];
            const int t = int(rng.index(std::size_t(schedule.steps()))) + 1;
            const double w = weight(t);
            const NoisedAction na = noise_action(schedule, tr.action, t, rng);
            Mlp::Trace trace;
            const Eigen::VectorXd pred =
                denoiser.net().forward(denoiser.embed(na.noised, t, tr.state), trace);
            const Eigen::VectorXd residual = pred - na.eps;
            loss += w * residual.squaredNorm();
            if (w != 0.0) {
                denoiser.net().backward(trace, (2.0 * w / double(cfg.batch_size)) * residual,
                                        grad);
            }
        }
        opt.step(denoiser.net().params(), grad);
        losses.push_back(loss / double(cfg.batch_size));
    }
    return losses;
}

Eigen::VectorXd reverse_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                               const Eigen::VectorXd& state, Rng& rng, const ActionBox* box) {
    Eigen::VectorXd x = rng.normal_vector(denoiser.action_dim());
    for (int t = schedule.steps(); t >= 1; --t) {
        const Eigen::VectorXd eps_hat = denoiser.predict(x, t, state);
        const double coef = (1.0 - schedule.alpha(t)) / std::sqrt(schedule.beta_bar(t));
        x = (x - coef * eps_hat) / std::sqrt(schedule.alpha(t));
        if (t > 1) x += std::sqrt(schedule.beta(t)) * rng.normal_vector(x.size());
    }
    if (box != nullptr) x = x.cwiseMax(box->lo).cwiseMin(box->hi);
    return x;
}

}  // namespace drcorl
