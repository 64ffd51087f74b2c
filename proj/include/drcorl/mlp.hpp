#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/rng.hpp"

namespace drcorl {

/// Fully connected net with tanh hidden activations and identity output.
/// Parameters live in a single flat vector (per-layer weight matrix followed
/// by its bias), so gradients, optimizers and the gradient-combination kernel
/// all operate on plain vectors.
class Mlp {
public:
    Mlp() = default;
    /// widths = {in, hidden..., out}. Parameters start at zero; call
    /// init_uniform for fan-in scaled random initialization.
    explicit Mlp(std::vector<Eigen::Index> widths);

    void init_uniform(Rng& rng);

    Eigen::Index input_dim() const { return widths_.front(); }
    Eigen::Index output_dim() const { return widths_.back(); }
    Eigen::Index param_count() const { return params_.size(); }
    const std::vector<Eigen::Index>& widths() const { return widths_; }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

    /// Stored activations from one forward pass, consumed by backward().
    struct Trace {
        std::vector<Eigen::VectorXd> inputs;  // input to each layer
        Eigen::VectorXd output;
    };

    Eigen::VectorXd forward(const Eigen::VectorXd& input, Trace& trace) const;

    /// Reverse-mode pass. Accumulates d(upstream . output)/d(params) into
    /// param_grad (must be param_count() long, caller zeroes it) and, when
    /// input_grad is non-null, writes d(upstream . output)/d(input).
    void backward(const Trace& trace, const Eigen::VectorXd& upstream,
                  Eigen::VectorXd& param_grad, Eigen::VectorXd* input_grad = nullptr) const;

    /// Convenience: fresh gradient from a single (input, upstream) pair.
    Eigen::VectorXd grad_params(const Eigen::VectorXd& input,
                                const Eigen::VectorXd& upstream) const;
    Eigen::VectorXd grad_input(const Eigen::VectorXd& input,
                               const Eigen::VectorXd& upstream) const;

    void save(const std::string& path) const;
    static Mlp load(const std::string& path);

private:
    struct Slice {
        Eigen::Index weight_offset, bias_offset, rows, cols;
    };
    std::vector<Eigen::Index> widths_;
    std::vector<Slice> slices_;
    Eigen::VectorXd params_;

    Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& v, std::size_t l) const {
        const Slice& s = slices_[l];
        return {v.data() + s.weight_offset, s.rows, s.cols};
    }
    Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& v, std::size_t l) const {
        const Slice& s = slices_[l];
        return {v.data() + s.bias_offset, s.rows};
    }
    Eigen::Map<Eigen::MatrixXd> weight(Eigen::VectorXd& v, std::size_t l) const {
        const Slice& s = slices_[l];
        return {v.data() + s.weight_offset, s.rows, s.cols};
    }
    Eigen::Map<Eigen::VectorXd> bias(Eigen::VectorXd& v, std::size_t l) const {
        const Slice& s = slices_[l];
        return {v.data() + s.bias_offset, s.rows};
    }
};

/// Adam over a flat parameter vector. step() applies a descent step on grad;
/// ascend by passing the negated gradient.
class Adam {
public:
    struct Config {
        double lr = 6e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(Eigen::Index n) : Adam(n, Config{}) {}
    Adam(Eigen::Index n, Config cfg);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

/// Plain SGD, used by the tabular harness.
class Sgd {
public:
    explicit Sgd(double lr) : lr_(lr) {}
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) { params -= lr_ * grad; }

private:
    double lr_;
};

}  // namespace drcorl
