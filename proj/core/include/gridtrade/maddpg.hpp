#pragma once

#include "gridtrade/environment.hpp"
#include "gridtrade/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridtrade {

enum class EpisodeMode { sequential, random };

struct Hyperparams {
    double gamma = 0.95;
    int batch_size = 256;
    double actor_lr = 1e-4;
    double critic_lr = 3e-4;
    double tau = 0.01;
    int episodes = 300;
    int hidden_width = 64;
    int hidden_layers = 2;
    std::size_t buffer_capacity = 100000;
    double ou_theta = 0.15;
    double ou_sigma = 0.2;
    double ou_sigma_final = 0.02; // sigma decays linearly to this over training
    std::size_t episode_slots = 48;
    EpisodeMode episode_mode = EpisodeMode::sequential;
    double reward_scale = 1.0;

    void validate() const;
};

/// x <- x + theta (0 - x) + sigma N(0, 1), one state per action dimension.
class OuNoise {
public:
    OuNoise(double theta = 0.15, double sigma = 0.2) : theta_(theta), sigma_(sigma) {}

    double sample(std::mt19937_64& rng);
    void reset() noexcept { state_ = 0.0; }
    void set_sigma(double sigma) noexcept { sigma_ = sigma; }
    double sigma() const noexcept { return sigma_; }
    double state() const noexcept { return state_; }

private:
    double theta_;
    double sigma_;
    double state_ = 0.0;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Bounded ring of joint transitions with uniform sampling (with replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(JointTransition transition);
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const JointTransition& at(std::size_t i) const { return data_.at(i); }

    /// Throws RangeError when fewer than `count` transitions are stored.
    std::vector<std::size_t> sample_indices(std::size_t count, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<JointTransition> data_;
};

/// Original and target actor/critic for one agent plus their optimizers.
struct AgentBundle {
    Mlp actor;
    Mlp critic;
    Mlp target_actor;
    Mlp target_critic;
    Adam actor_opt;
    Adam critic_opt;
};

/// Column-stacked view of a sampled minibatch.
struct Batch {
    std::vector<Eigen::MatrixXd> states;      // per agent: kStateDim x S
    std::vector<Eigen::MatrixXd> next_states; // per agent
    Eigen::MatrixXd actions;                  // agents x S
    Eigen::MatrixXd rewards;                  // agents x S (already scaled)
    Eigen::VectorXd not_terminal;             // S

    std::size_t size() const noexcept { return static_cast<std::size_t>(not_terminal.size()); }
};

Batch make_batch(const ReplayBuffer& buffer, std::span<const std::size_t> indices, double reward_scale = 1.0);

/// Critic input: every agent's state, then every agent's action.
Eigen::MatrixXd critic_input(std::span<const Eigen::MatrixXd> states, const Eigen::MatrixXd& actions);

struct EpisodeLog {
    int episode = 0;
    std::vector<double> mean_reward; // per agent, mean per-slot reward
    std::vector<double> critic_loss; // per agent, mean over updates this episode (0 if none)
};

class Maddpg {
public:
    Maddpg(std::size_t num_agents, const Hyperparams& hp, std::uint64_t seed);

    std::size_t num_agents() const noexcept { return agents_.size(); }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    AgentBundle& agent(std::size_t p) { return agents_.at(p); }
    const AgentBundle& agent(std::size_t p) const { return agents_.at(p); }
    std::mt19937_64& rng() noexcept { return rng_; }

    /// mu_p(s) plus optional OU noise, clipped to [-1, 1].
    double act(std::size_t p, const AgentState& state, OuNoise* noise);

    /// y_j = r_j + gamma * Q'_p(s'_j, mu'_1(s'_1), ..., mu'_P(s'_P)), bootstrap
    /// dropped on terminal transitions.
    Eigen::VectorXd critic_target(std::size_t p, const Batch& batch) const;

    /// One Adam step on the critic's mean squared error; returns the loss
    /// before the step.
    double update_critic(std::size_t p, const Batch& batch, const Eigen::VectorXd& targets);

    /// One Adam ascent step on mean Q_p(s, mu_1(s_1), ..., mu_P(s_P)) through
    /// agent p's own action only.
    void update_actor(std::size_t p, const Batch& batch);

    void soft_update(std::size_t p, double tau);

    /// Gradient of the actor objective (mean Q) w.r.t. agent p's actor
    /// parameters, flattened. Exposed for gradient checks.
    std::vector<double> actor_objective_gradient(std::size_t p, const Batch& batch) const;
    double actor_objective(std::size_t p, const Batch& batch) const;

private:
    Hyperparams hp_;
    std::mt19937_64 rng_;
    std::vector<AgentBundle> agents_;
};

struct TrainingResult {
    std::vector<Mlp> actors;
    std::vector<Mlp> critics;
    std::vector<EpisodeLog> log;
};

using EpisodeCallback = std::function<void(const EpisodeLog&)>;

/// Centralized training loop. Episodes are windows of hp.episode_slots slots
/// taken back to back from the horizon (or at random starts). Throws
/// TrainingDiverged if a loss or parameter stops being finite.
TrainingResult train(std::shared_ptr<const Community> community, const Hyperparams& hp, std::uint64_t seed,
                     const EpisodeCallback& on_episode = {});

/// Decentralized execution: the trained actor applied to the local state.
double execute_policy(const Mlp& actor, const AgentState& state);

/// Versioned checkpoint: `{"schema":1,"agents":[{"id","actor","critic"}]}` with
/// each network as `{"dims","output","layers":[{"weights" (row-major),"bias"}]}`.
nlohmann::json network_to_json(const Mlp& net);
Mlp network_from_json_doc(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& ids,
                     const std::vector<Mlp>& actors, const std::vector<Mlp>& critics);
/// Returns actors keyed in file order; ids are written to `ids`.
std::vector<Mlp> load_checkpoint_actors(const std::filesystem::path& path, std::vector<std::string>* ids = nullptr);

/// JSON-lines record `{"episode","agent","mean_reward","critic_loss"}`.
std::string log_line(const EpisodeLog& log, std::size_t agent, const std::string& agent_id);

} // namespace gridtrade
