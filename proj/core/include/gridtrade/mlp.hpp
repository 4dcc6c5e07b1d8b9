#pragma once

#include <Eigen/Dense>

#include <random>
#include <span>
#include <vector>

namespace gridtrade {

enum class OutputActivation { tanh, identity };

/// Dense feed-forward network: ReLU on every hidden layer, tanh or identity on
/// the output. Batches are column-major: one sample per column.
class Mlp {
public:
    struct Layer {
        Eigen::MatrixXd weights; // out x in
        Eigen::VectorXd bias;
    };

    /// Activations kept by forward_batch for a later backward pass.
    struct Cache {
        std::vector<Eigen::MatrixXd> inputs;       // input to each layer
        std::vector<Eigen::MatrixXd> activations;  // output of each layer (post-activation)
    };

    struct Gradients {
        std::vector<Eigen::MatrixXd> weights;
        std::vector<Eigen::VectorXd> bias;
    };

    Mlp() = default;

    /// Zero-initialized network with layer sizes `dims` (input first).
    Mlp(std::vector<int> dims, OutputActivation output);

    /// Hidden layers: U(-1/sqrt(fan_in), 1/sqrt(fan_in)); output layer:
    /// U(-final_scale, final_scale).
    static Mlp random(std::vector<int> dims, OutputActivation output, std::mt19937_64& rng,
                      double final_scale = 3e-3);

    int input_dim() const noexcept { return dims_.front(); }
    int output_dim() const noexcept { return dims_.back(); }
    const std::vector<int>& dims() const noexcept { return dims_; }
    OutputActivation output_activation() const noexcept { return output_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// Throws ShapeError on a dimension mismatch.
    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

    /// Reverse-mode pass for a batch seen by forward_batch. `output_grad` is
    /// dLoss/dOutput per sample; parameter gradients are summed over the batch
    /// into `grads` (overwritten). Returns dLoss/dInput.
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Gradients& grads) const;

    Gradients zero_gradients() const;

    /// theta <- tau * source + (1 - tau) * theta
    void soft_update(const Mlp& source, double tau);

    bool all_finite() const;
    std::size_t parameter_count() const;
    /// Flattened parameters, layer by layer: weights row-major, then bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

private:
    std::vector<int> dims_;
    OutputActivation output_ = OutputActivation::identity;
    std::vector<Layer> layers_;
};

/// Flatten gradients in the same order as Mlp::parameters().
std::vector<double> flatten(const Mlp::Gradients& grads);

/// Adam with bias correction.
class Adam {
public:
    struct Config {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Adam() = default;
    Adam(const Mlp& net, Config config);

    /// Descent step: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    void step(Mlp& net, const Mlp::Gradients& grads);

    const Config& config() const noexcept { return config_; }
    long steps() const noexcept { return t_; }

private:
    Config config_;
    long t_ = 0;
    Mlp::Gradients m_;
    Mlp::Gradients v_;
};

} // namespace gridtrade
