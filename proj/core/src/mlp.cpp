#include "gridtrade/mlp.hpp"

#include "gridtrade/errors.hpp"

#include <cmath>

namespace gridtrade {

Mlp::Mlp(std::vector<int> dims, OutputActivation output) : dims_(std::move(dims)), output_(output) {
    if (dims_.size() < 2) throw ShapeError("an MLP needs at least an input and an output size");
    for (int d : dims_) {
        if (d <= 0) throw ShapeError("layer sizes must be positive");
    }
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
        layers_.push_back(Layer{Eigen::MatrixXd::Zero(dims_[i + 1], dims_[i]), Eigen::VectorXd::Zero(dims_[i + 1])});
    }
}

Mlp Mlp::random(std::vector<int> dims, OutputActivation output, std::mt19937_64& rng, double final_scale) {
    Mlp net(std::move(dims), output);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
        const bool last = l + 1 == net.layers_.size();
        const double bound = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(net.dims_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer& layer = net.layers_[l];
        // row-major fill so the draw order matches the flattened layout
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
    }
    return net;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    return forward_batch(input, nullptr).col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& input, Cache* cache) const {
    if (layers_.empty()) throw ShapeError("network has no layers");
    if (input.rows() != dims_.front()) {
        throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(dims_.front()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->activations.clear();
    }
    Eigen::MatrixXd x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        if (cache) cache->inputs.push_back(x);
        Eigen::MatrixXd z = layer.weights * x;
        z.colwise() += layer.bias;
        const bool last = l + 1 == layers_.size();
        if (!last) {
            z = z.cwiseMax(0.0);
        } else if (output_ == OutputActivation::tanh) {
            z = z.array().tanh().matrix();
        }
        if (cache) cache->activations.push_back(z);
        x = std::move(z);
    }
    return x;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Gradients& grads) const {
    if (cache.inputs.size() != layers_.size()) throw ShapeError("cache does not match this network");
    if (output_grad.rows() != dims_.back() || output_grad.cols() != cache.inputs.front().cols()) {
        throw ShapeError("output gradient has the wrong shape");
    }
    grads.weights.resize(layers_.size());
    grads.bias.resize(layers_.size());
    Eigen::MatrixXd delta = output_grad;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        const Eigen::MatrixXd& a = cache.activations[li];
        const bool last = li + 1 == layers_.size();
        if (!last) {
            delta = delta.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
        } else if (output_ == OutputActivation::tanh) {
            delta = delta.cwiseProduct((1.0 - a.array().square()).matrix());
        }
        grads.weights[li].noalias() = delta * cache.inputs[li].transpose();
        grads.bias[li] = delta.rowwise().sum();
        delta = layer.weights.transpose() * delta;
    }
    return delta;
}

Mlp::Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (const Layer& layer : layers_) {
        g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return g;
}

void Mlp::soft_update(const Mlp& source, double tau) {
    if (source.dims_ != dims_) throw ShapeError("soft update between differently shaped networks");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weights = tau * source.layers_[l].weights + (1.0 - tau) * layers_[l].weights;
        layers_[l].bias = tau * source.layers_[l].bias + (1.0 - tau) * layers_[l].bias;
    }
}

bool Mlp::all_finite() const {
    for (const Layer& layer : layers_) {
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    return n;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const Layer& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) out.push_back(layer.weights(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(layer.bias(r));
    }
    return out;
}

void Mlp::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    std::size_t k = 0;
    for (Layer& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = values[k++];
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = values[k++];
    }
}

std::vector<double> flatten(const Mlp::Gradients& grads) {
    std::vector<double> out;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        const auto& w = grads.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
        }
        for (Eigen::Index r = 0; r < grads.bias[l].size(); ++r) out.push_back(grads.bias[l](r));
    }
    return out;
}

Adam::Adam(const Mlp& net, Config config) : config_(config), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

void Adam::step(Mlp& net, const Mlp::Gradients& grads) {
    auto& layers = net.layers();
    if (grads.weights.size() != layers.size() || m_.weights.size() != layers.size()) {
        throw ShapeError("optimizer state does not match the network");
    }
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        m_.weights[l] = b1 * m_.weights[l] + (1.0 - b1) * grads.weights[l];
        v_.weights[l] = b2 * v_.weights[l] + (1.0 - b2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        m_.bias[l] = b1 * m_.bias[l] + (1.0 - b1) * grads.bias[l];
        v_.bias[l] = b2 * v_.bias[l] + (1.0 - b2) * grads.bias[l].cwiseProduct(grads.bias[l]);
        layers[l].weights.array() -=
            lr * (m_.weights[l].array() / correction1) / ((v_.weights[l].array() / correction2).sqrt() + eps);
        layers[l].bias.array() -=
            lr * (m_.bias[l].array() / correction1) / ((v_.bias[l].array() / correction2).sqrt() + eps);
    }
}

} // namespace gridtrade
