#include "gridtrade/environment.hpp"
#include "gridtrade/maddpg.hpp"
#include "gridtrade/manifest.hpp"
#include "gridtrade/mlp.hpp"
#include "gridtrade/network.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gridtrade;

namespace {

const std::filesystem::path kSource = GRIDTRADE_SOURCE_DIR;

Mlp critic_net(int width, std::mt19937_64& rng) {
    return Mlp::random({3 * kStateDim + 3 * kActionDim, width, width, 1}, OutputActivation::identity, rng);
}

void BM_MlpForward(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const int width = static_cast<int>(state.range(0));
    const Mlp net = critic_net(width, rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(net.input_dim(), 256);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward_batch(x));
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(500);

void BM_MlpForwardBackward(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const int width = static_cast<int>(state.range(0));
    const Mlp net = critic_net(width, rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(net.input_dim(), 256);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Ones(1, 256);
    Mlp::Cache cache;
    Mlp::Gradients grads;
    for (auto _ : state) {
        net.forward_batch(x, &cache);
        benchmark::DoNotOptimize(net.backward(cache, g, grads));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(500);

NetSnapshot feeder_snapshot(const RadialNetwork& net) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    std::vector<double> inj(net.num_buses(), 0.0);
    for (std::size_t i = 1; i < inj.size(); ++i) inj[i] = u(rng);
    return make_snapshot(net, inj, 0.05);
}

void BM_LinDistFlow(benchmark::State& state) {
    const auto net = parse_network(kSource / "networks" / "feeder15.json");
    const auto snap = feeder_snapshot(net);
    for (auto _ : state) benchmark::DoNotOptimize(solve_lindistflow(net, snap));
}
BENCHMARK(BM_LinDistFlow);

void BM_Dlmp(benchmark::State& state) {
    const auto net = parse_network(kSource / "networks" / "feeder15.json");
    const auto snap = feeder_snapshot(net);
    for (auto _ : state) benchmark::DoNotOptimize(compute_dlmp(net, snap));
}
BENCHMARK(BM_Dlmp);

void BM_EnvironmentStep(benchmark::State& state) {
    const auto m = load_manifest(kSource / "scenarios" / "community15.json");
    Environment env(m.community);
    const std::vector<double> actions(env.num_agents(), 0.3);
    env.reset(0, m.community->horizon());
    for (auto _ : state) {
        if (env.done()) env.reset(0, m.community->horizon());
        benchmark::DoNotOptimize(env.step(actions));
    }
}
BENCHMARK(BM_EnvironmentStep);

void BM_LearnerUpdate(benchmark::State& state) {
    const auto m = load_manifest(kSource / "scenarios" / "community15.json");
    Hyperparams hp = m.hyperparams;
    Environment env(m.community);
    const std::size_t agents = env.num_agents();
    Maddpg learner(agents, hp, 5);
    ReplayBuffer buffer(4096);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    env.reset(0, m.community->horizon());
    while (buffer.size() < 1024) {
        if (env.done()) env.reset(0, m.community->horizon());
        std::vector<double> a(agents);
        for (double& x : a) x = u(rng);
        buffer.push(env.step(a).transition);
    }
    for (auto _ : state) {
        for (std::size_t p = 0; p < agents; ++p) {
            const Batch batch = make_batch(buffer, buffer.sample_indices(256, rng), hp.reward_scale);
            learner.update_critic(p, batch, learner.critic_target(p, batch));
            learner.update_actor(p, batch);
            learner.soft_update(p, hp.tau);
        }
    }
}
BENCHMARK(BM_LearnerUpdate)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
