#include "gridtrade/errors.hpp"
#include "gridtrade/mlp.hpp"

#include "fd.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gridtrade;
using gridtrade::testing::central_difference;
using gridtrade::testing::max_relative_error;

namespace {

// Straight scalar loops over the same arithmetic, used as an independent oracle.
std::vector<double> scalar_forward(const Mlp& net, std::vector<double> x) {
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        std::vector<double> y(static_cast<std::size_t>(layers[l].weights.rows()));
        for (std::size_t r = 0; r < y.size(); ++r) {
            double acc = layers[l].bias(static_cast<Eigen::Index>(r));
            for (std::size_t c = 0; c < x.size(); ++c) {
                acc += layers[l].weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * x[c];
            }
            if (l + 1 < layers.size()) acc = acc > 0.0 ? acc : 0.0;
            else if (net.output_activation() == OutputActivation::tanh) acc = std::tanh(acc);
            y[r] = acc;
        }
        x = y;
    }
    return x;
}

Eigen::MatrixXd random_batch(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// Loss = sum(W .* output) for a fixed random W, so every output gets a
// distinct gradient.
double weighted_sum(const Mlp& net, const Eigen::MatrixXd& in, const Eigen::MatrixXd& w) {
    return net.forward_batch(in).cwiseProduct(w).sum();
}

} // namespace

TEST(Mlp, ZeroNetworkOutputsZero) {
    Mlp actor({3, 4, 1}, OutputActivation::tanh);
    Eigen::VectorXd x(3);
    x << 0.3, -1.0, 2.0;
    EXPECT_EQ(actor.forward(x)(0), 0.0);
}

TEST(Mlp, SingleWeightIdentityCritic) {
    Mlp critic({1, 1}, OutputActivation::identity);
    critic.layers()[0].weights(0, 0) = 2.5;
    Eigen::VectorXd u(1);
    u << -0.7;
    EXPECT_DOUBLE_EQ(critic.forward(u)(0), 2.5 * -0.7);
}

TEST(Mlp, MatchesScalarReimplementation) {
    std::mt19937_64 rng(5);
    for (auto out : {OutputActivation::tanh, OutputActivation::identity}) {
        const Mlp net = Mlp::random({5, 7, 6, 2}, out, rng, 0.5);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::MatrixXd x = random_batch(5, 1, rng);
            const Eigen::VectorXd y = net.forward(x.col(0));
            const auto ref = scalar_forward(net, std::vector<double>(x.data(), x.data() + 5));
            for (int i = 0; i < 2; ++i) EXPECT_NEAR(y(i), ref[static_cast<std::size_t>(i)], 1e-12);
        }
    }
}

TEST(Mlp, DimensionMismatchThrows) {
    Mlp net({3, 4, 1}, OutputActivation::tanh);
    EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(2)), ShapeError);
    EXPECT_THROW(Mlp({3}, OutputActivation::tanh), ShapeError);
    EXPECT_THROW(Mlp({3, 0, 1}, OutputActivation::tanh), ShapeError);
}

TEST(Mlp, BackwardMatchesFiniteDifferencesOnSmallNet) {
    std::mt19937_64 rng(11);
    for (auto out : {OutputActivation::tanh, OutputActivation::identity}) {
        Mlp net = Mlp::random({3, 4, 1}, out, rng, 1.0);
        const Eigen::MatrixXd in = random_batch(3, 5, rng);
        const Eigen::MatrixXd w = random_batch(1, 5, rng);
        Mlp::Cache cache;
        net.forward_batch(in, &cache);
        Mlp::Gradients g;
        net.backward(cache, w, g);
        const auto analytic = flatten(g);
        const auto numeric = central_difference(
            [&](const std::vector<double>& p) {
                Mlp copy = net;
                copy.set_parameters(p);
                return weighted_sum(copy, in, w);
            },
            net.parameters());
        EXPECT_LT(max_relative_error(analytic, numeric), 1e-4);
    }
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    const Mlp net = Mlp::random({4, 8, 8, 1}, OutputActivation::identity, rng, 1.0);
    const Eigen::MatrixXd in = random_batch(4, 1, rng);
    Mlp::Cache cache;
    net.forward_batch(in, &cache);
    Mlp::Gradients g;
    const Eigen::MatrixXd dx = net.backward(cache, Eigen::MatrixXd::Ones(1, 1), g);
    const auto numeric = central_difference(
        [&](const std::vector<double>& x) {
            return net.forward(Eigen::Map<const Eigen::VectorXd>(x.data(), 4))(0);
        },
        std::vector<double>(in.data(), in.data() + 4));
    EXPECT_LT(max_relative_error(std::vector<double>(dx.data(), dx.data() + 4), numeric), 1e-4);
}

TEST(Mlp, ZeroOutputGradientGivesZeroParameterGradients) {
    std::mt19937_64 rng(3);
    const Mlp net = Mlp::random({3, 5, 1}, OutputActivation::tanh, rng);
    Mlp::Cache cache;
    net.forward_batch(random_batch(3, 4, rng), &cache);
    Mlp::Gradients g;
    net.backward(cache, Eigen::MatrixXd::Zero(1, 4), g);
    for (double v : flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, InactiveReluUnitPassesNoGradient) {
    Mlp net({1, 2, 1}, OutputActivation::identity);
    auto& l = net.layers();
    l[0].weights << 1.0, -1.0;
    l[1].weights << 1.0, 1.0;
    Eigen::MatrixXd x(1, 1);
    x << 2.0; // unit 1 active, unit 2 at -2 (inactive)
    Mlp::Cache cache;
    net.forward_batch(x, &cache);
    Mlp::Gradients g;
    net.backward(cache, Eigen::MatrixXd::Ones(1, 1), g);
    EXPECT_EQ(g.weights[0](1, 0), 0.0);
    EXPECT_EQ(g.bias[0](1), 0.0);
    EXPECT_EQ(g.weights[1](0, 1), 0.0);
    EXPECT_NE(g.weights[0](0, 0), 0.0);
}

TEST(Mlp, SoftUpdateBlends) {
    Mlp a({1, 1}, OutputActivation::identity), b({1, 1}, OutputActivation::identity);
    a.layers()[0].weights(0, 0) = 2.0;
    b.soft_update(a, 0.5);
    EXPECT_DOUBLE_EQ(b.layers()[0].weights(0, 0), 1.0);
    b.soft_update(a, 0.0);
    EXPECT_DOUBLE_EQ(b.layers()[0].weights(0, 0), 1.0);
    b.soft_update(a, 1.0);
    EXPECT_EQ(b.parameters(), a.parameters());
}

TEST(Mlp, ParametersRoundTrip) {
    std::mt19937_64 rng(1);
    Mlp net = Mlp::random({3, 4, 2}, OutputActivation::tanh, rng);
    auto p = net.parameters();
    EXPECT_EQ(p.size(), net.parameter_count());
    EXPECT_EQ(p.size(), std::size_t{3 * 4 + 4 + 4 * 2 + 2});
    Mlp other({3, 4, 2}, OutputActivation::tanh);
    other.set_parameters(p);
    EXPECT_EQ(other.parameters(), p);
    p.pop_back();
    EXPECT_THROW(other.set_parameters(p), ShapeError);
}

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
    Mlp net({1, 1}, OutputActivation::identity);
    Adam opt(net, Adam::Config{0.1});
    Mlp::Gradients g = net.zero_gradients();
    g.weights[0](0, 0) = 3.0;
    g.bias[0](0) = -0.5;
    opt.step(net, g);
    // bias-corrected first step is lr * sign(g)
    EXPECT_NEAR(net.layers()[0].weights(0, 0), -0.1, 1e-7);
    EXPECT_NEAR(net.layers()[0].bias(0), 0.1, 1e-7);
}
