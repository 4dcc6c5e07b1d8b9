#include "gridtrade/maddpg.hpp"

#include "gridtrade/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gridtrade {

using nlohmann::json;
using nlohmann::ordered_json;

void Hyperparams::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw ValidationError("learning rates must be positive");
    if (episodes < 1) throw ValidationError("episodes must be >= 1");
    if (hidden_width < 1 || hidden_layers < 1) throw ValidationError("hidden layers must be non-empty");
    if (buffer_capacity < 1) throw ValidationError("buffer capacity must be >= 1");
    if (!(ou_theta > 0.0) || ou_sigma < 0.0 || ou_sigma_final < 0.0) throw ValidationError("bad noise parameters");
    if (episode_slots < 1) throw ValidationError("episode length must be >= 1");
    if (!(reward_scale > 0.0)) throw ValidationError("reward scale must be positive");
}

double OuNoise::sample(std::mt19937_64& rng) {
    state_ += theta_ * (0.0 - state_) + sigma_ * gauss_(rng);
    return state_;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(JointTransition transition) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(transition));
    } else {
        data_[cursor_] = std::move(transition);
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, std::mt19937_64& rng) const {
    if (data_.size() < count || data_.empty()) {
        throw RangeError("replay buffer holds fewer transitions than the batch size");
    }
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> out(count);
    for (auto& i : out) i = pick(rng);
    return out;
}

Batch make_batch(const ReplayBuffer& buffer, std::span<const std::size_t> indices, double reward_scale) {
    const auto s = static_cast<Eigen::Index>(indices.size());
    if (s == 0) throw RangeError("empty batch");
    const std::size_t agents = buffer.at(indices[0]).states.size();
    Batch b;
    b.states.assign(agents, Eigen::MatrixXd(kStateDim, s));
    b.next_states.assign(agents, Eigen::MatrixXd(kStateDim, s));
    b.actions.resize(static_cast<Eigen::Index>(agents), s);
    b.rewards.resize(static_cast<Eigen::Index>(agents), s);
    b.not_terminal.resize(s);
    for (Eigen::Index j = 0; j < s; ++j) {
        const JointTransition& t = buffer.at(indices[static_cast<std::size_t>(j)]);
        for (std::size_t p = 0; p < agents; ++p) {
            const auto pi = static_cast<Eigen::Index>(p);
            b.states[p].col(j) << t.states[p].g, t.states[p].d, t.states[p].soc;
            b.next_states[p].col(j) << t.next_states[p].g, t.next_states[p].d, t.next_states[p].soc;
            b.actions(pi, j) = t.actions[p];
            b.rewards(pi, j) = t.rewards[p] * reward_scale;
        }
        b.not_terminal(j) = t.terminal ? 0.0 : 1.0;
    }
    return b;
}

Eigen::MatrixXd critic_input(std::span<const Eigen::MatrixXd> states, const Eigen::MatrixXd& actions) {
    const auto agents = static_cast<Eigen::Index>(states.size());
    const Eigen::Index s = actions.cols();
    Eigen::MatrixXd x(agents * kStateDim + agents * kActionDim, s);
    for (Eigen::Index p = 0; p < agents; ++p) {
        x.middleRows(p * kStateDim, kStateDim) = states[static_cast<std::size_t>(p)];
    }
    x.bottomRows(agents * kActionDim) = actions;
    return x;
}

Maddpg::Maddpg(std::size_t num_agents, const Hyperparams& hp, std::uint64_t seed) : hp_(hp), rng_(seed) {
    hp_.validate();
    if (num_agents == 0) throw ValidationError("MADDPG needs at least one agent");
    const int p = static_cast<int>(num_agents);
    std::vector<int> actor_dims{kStateDim};
    std::vector<int> critic_dims{p * kStateDim + p * kActionDim};
    for (int l = 0; l < hp_.hidden_layers; ++l) {
        actor_dims.push_back(hp_.hidden_width);
        critic_dims.push_back(hp_.hidden_width);
    }
    actor_dims.push_back(kActionDim);
    critic_dims.push_back(1);
    for (std::size_t i = 0; i < num_agents; ++i) {
        AgentBundle a;
        a.actor = Mlp::random(actor_dims, OutputActivation::tanh, rng_);
        a.critic = Mlp::random(critic_dims, OutputActivation::identity, rng_);
        a.target_actor = a.actor;
        a.target_critic = a.critic;
        a.actor_opt = Adam(a.actor, Adam::Config{hp_.actor_lr});
        a.critic_opt = Adam(a.critic, Adam::Config{hp_.critic_lr});
        agents_.push_back(std::move(a));
    }
}

double Maddpg::act(std::size_t p, const AgentState& state, OuNoise* noise) {
    Eigen::VectorXd s(kStateDim);
    s << state.g, state.d, state.soc;
    double a = agents_.at(p).actor.forward(s)(0);
    if (noise) a += noise->sample(rng_);
    return std::clamp(a, -1.0, 1.0);
}

Eigen::VectorXd Maddpg::critic_target(std::size_t p, const Batch& batch) const {
    const auto n = static_cast<Eigen::Index>(agents_.size());
    Eigen::MatrixXd next_actions(n, static_cast<Eigen::Index>(batch.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        next_actions.row(i) = agents_[static_cast<std::size_t>(i)].target_actor.forward_batch(
            batch.next_states[static_cast<std::size_t>(i)]);
    }
    const Eigen::MatrixXd q_next = agents_.at(p).target_critic.forward_batch(critic_input(batch.next_states, next_actions));
    const auto pi = static_cast<Eigen::Index>(p);
    return batch.rewards.row(pi).transpose() + hp_.gamma * batch.not_terminal.cwiseProduct(q_next.row(0).transpose());
}

double Maddpg::update_critic(std::size_t p, const Batch& batch, const Eigen::VectorXd& targets) {
    AgentBundle& a = agents_.at(p);
    Mlp::Cache cache;
    const Eigen::MatrixXd q = a.critic.forward_batch(critic_input(batch.states, batch.actions), &cache);
    const Eigen::RowVectorXd residual = q.row(0) - targets.transpose();
    const double s = static_cast<double>(batch.size());
    const double loss = residual.squaredNorm() / s;
    Mlp::Gradients grads;
    a.critic.backward(cache, (2.0 / s) * residual, grads);
    a.critic_opt.step(a.critic, grads);
    return loss;
}

namespace {

struct ActorPass {
    Mlp::Cache actor_cache;
    Mlp::Cache critic_cache;
    Eigen::MatrixXd q;
};

ActorPass actor_forward(const std::vector<AgentBundle>& agents, std::size_t p, const Batch& batch) {
    ActorPass pass;
    const auto n = static_cast<Eigen::Index>(agents.size());
    Eigen::MatrixXd actions(n, static_cast<Eigen::Index>(batch.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        actions.row(i) = agents[ui].actor.forward_batch(batch.states[ui], ui == p ? &pass.actor_cache : nullptr);
    }
    pass.q = agents[p].critic.forward_batch(critic_input(batch.states, actions), &pass.critic_cache);
    return pass;
}

// Gradient of scale * sum_j Q_j w.r.t. agent p's actor parameters.
Mlp::Gradients actor_gradient(const std::vector<AgentBundle>& agents, std::size_t p, const Batch& batch,
                              const ActorPass& pass, double scale) {
    const Eigen::Index s = static_cast<Eigen::Index>(batch.size());
    const auto n = static_cast<Eigen::Index>(agents.size());
    Mlp::Gradients critic_grads;
    const Eigen::MatrixXd dq_dx =
        agents[p].critic.backward(pass.critic_cache, Eigen::MatrixXd::Constant(1, s, scale), critic_grads);
    const Eigen::MatrixXd dq_da = dq_dx.row(n * kStateDim + static_cast<Eigen::Index>(p));
    Mlp::Gradients grads;
    agents[p].actor.backward(pass.actor_cache, dq_da, grads);
    return grads;
}

} // namespace

void Maddpg::update_actor(std::size_t p, const Batch& batch) {
    const ActorPass pass = actor_forward(agents_, p, batch);
    // descend on -mean(Q)
    const Mlp::Gradients grads = actor_gradient(agents_, p, batch, pass, -1.0 / static_cast<double>(batch.size()));
    AgentBundle& a = agents_.at(p);
    a.actor_opt.step(a.actor, grads);
}

double Maddpg::actor_objective(std::size_t p, const Batch& batch) const {
    return actor_forward(agents_, p, batch).q.mean();
}

std::vector<double> Maddpg::actor_objective_gradient(std::size_t p, const Batch& batch) const {
    const ActorPass pass = actor_forward(agents_, p, batch);
    return flatten(actor_gradient(agents_, p, batch, pass, 1.0 / static_cast<double>(batch.size())));
}

void Maddpg::soft_update(std::size_t p, double tau) {
    AgentBundle& a = agents_.at(p);
    a.target_actor.soft_update(a.actor, tau);
    a.target_critic.soft_update(a.critic, tau);
}

TrainingResult train(std::shared_ptr<const Community> community, const Hyperparams& hp, std::uint64_t seed,
                     const EpisodeCallback& on_episode) {
    hp.validate();
    Environment env(community);
    const std::size_t agents = env.num_agents();
    if (agents == 0) throw ValidationError("community has no battery-equipped agents");
    Maddpg learner(agents, hp, seed);
    ReplayBuffer buffer(hp.buffer_capacity);
    std::vector<OuNoise> noise(agents, OuNoise(hp.ou_theta, hp.ou_sigma));
    std::mt19937_64& rng = learner.rng();

    const std::size_t horizon = community->horizon();
    const std::size_t length = std::min(hp.episode_slots, horizon);
    const std::size_t windows = std::max<std::size_t>(1, horizon / length);
    const auto batch_size = static_cast<std::size_t>(hp.batch_size);

    TrainingResult result;
    std::vector<double> actions(agents);
    for (int ep = 0; ep < hp.episodes; ++ep) {
        const double progress = hp.episodes > 1 ? static_cast<double>(ep) / (hp.episodes - 1) : 0.0;
        const double sigma = hp.ou_sigma + (hp.ou_sigma_final - hp.ou_sigma) * progress;
        for (auto& n : noise) {
            n.reset();
            n.set_sigma(sigma);
        }
        std::size_t start = 0;
        if (hp.episode_mode == EpisodeMode::sequential) {
            start = (static_cast<std::size_t>(ep) % windows) * length;
        } else {
            start = std::uniform_int_distribution<std::size_t>(0, horizon - length)(rng);
        }

        std::vector<AgentState> states = env.reset(start, length);
        std::vector<double> reward_sum(agents, 0.0);
        std::vector<double> loss_sum(agents, 0.0);
        std::size_t slots = 0;
        std::size_t updates = 0;
        while (!env.done()) {
            for (std::size_t p = 0; p < agents; ++p) actions[p] = learner.act(p, states[p], &noise[p]);
            StepResult step = env.step(actions);
            for (std::size_t p = 0; p < agents; ++p) reward_sum[p] += step.transition.rewards[p];
            states = step.transition.next_states;
            buffer.push(std::move(step.transition));
            ++slots;

            if (buffer.size() >= batch_size) {
                for (std::size_t p = 0; p < agents; ++p) {
                    const auto idx = buffer.sample_indices(batch_size, rng);
                    const Batch batch = make_batch(buffer, idx, hp.reward_scale);
                    const Eigen::VectorXd y = learner.critic_target(p, batch);
                    const double loss = learner.update_critic(p, batch, y);
                    if (!std::isfinite(loss)) {
                        throw TrainingDiverged("critic loss of agent " + std::to_string(p) + " is not finite (episode " +
                                               std::to_string(ep) + ")");
                    }
                    learner.update_actor(p, batch);
                    learner.soft_update(p, hp.tau);
                    const AgentBundle& a = learner.agent(p);
                    if (!a.actor.all_finite() || !a.critic.all_finite()) {
                        throw TrainingDiverged("parameters of agent " + std::to_string(p) + " are not finite (episode " +
                                               std::to_string(ep) + ")");
                    }
                    loss_sum[p] += loss;
                }
                ++updates;
            }
        }

        EpisodeLog log;
        log.episode = ep;
        for (std::size_t p = 0; p < agents; ++p) {
            log.mean_reward.push_back(reward_sum[p] / static_cast<double>(slots));
            log.critic_loss.push_back(updates ? loss_sum[p] / static_cast<double>(updates) : 0.0);
        }
        if (on_episode) on_episode(log);
        result.log.push_back(std::move(log));
    }

    for (std::size_t p = 0; p < agents; ++p) {
        result.actors.push_back(learner.agent(p).actor);
        result.critics.push_back(learner.agent(p).critic);
    }
    return result;
}

double execute_policy(const Mlp& actor, const AgentState& state) {
    Eigen::VectorXd s(kStateDim);
    s << state.g, state.d, state.soc;
    return std::clamp(actor.forward(s)(0), -1.0, 1.0);
}

json network_to_json(const Mlp& net) {
    ordered_json doc;
    doc["dims"] = net.dims();
    doc["output"] = net.output_activation() == OutputActivation::tanh ? "tanh" : "identity";
    ordered_json layers = ordered_json::array();
    for (const auto& layer : net.layers()) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
        }
        std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
        ordered_json l;
        l["weights"] = w;
        l["bias"] = b;
        layers.push_back(std::move(l));
    }
    doc["layers"] = std::move(layers);
    return json(doc);
}

Mlp network_from_json_doc(const json& doc) {
    try {
        const auto dims = doc.at("dims").get<std::vector<int>>();
        const std::string out = doc.at("output").get<std::string>();
        if (out != "tanh" && out != "identity") throw ParseError("unknown output activation '" + out + "'");
        Mlp net(dims, out == "tanh" ? OutputActivation::tanh : OutputActivation::identity);
        const auto& layers = doc.at("layers");
        if (layers.size() != net.layers().size()) throw ShapeError("checkpoint layer count mismatch");
        std::vector<double> flat;
        for (const auto& l : layers) {
            for (double v : l.at("weights")) flat.push_back(v);
            for (double v : l.at("bias")) flat.push_back(v);
        }
        net.set_parameters(flat);
        return net;
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& ids,
                     const std::vector<Mlp>& actors, const std::vector<Mlp>& critics) {
    if (ids.size() != actors.size() || (!critics.empty() && critics.size() != actors.size())) {
        throw ShapeError("checkpoint needs one id and one critic per actor");
    }
    ordered_json doc;
    doc["schema"] = 1;
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < actors.size(); ++i) {
        ordered_json a;
        a["id"] = ids[i];
        a["actor"] = ordered_json::parse(network_to_json(actors[i]).dump());
        if (!critics.empty()) a["critic"] = ordered_json::parse(network_to_json(critics[i]).dump());
        list.push_back(std::move(a));
    }
    doc["agents"] = std::move(list);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write checkpoint '" + path.string() + "'");
    out << doc.dump() << '\n';
}

std::vector<Mlp> load_checkpoint_actors(const std::filesystem::path& path, std::vector<std::string>* ids) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
        if (doc.value("schema", 0) != 1) throw ParseError("checkpoint must declare \"schema\": 1");
        std::vector<Mlp> actors;
        for (const auto& a : doc.at("agents")) {
            actors.push_back(network_from_json_doc(a.at("actor")));
            if (ids) ids->push_back(a.value("id", std::string{}));
        }
        return actors;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint '" + path.string() + "': " + e.what());
    }
}

std::string log_line(const EpisodeLog& log, std::size_t agent, const std::string& agent_id) {
    ordered_json j;
    j["episode"] = log.episode;
    j["agent"] = agent_id;
    j["mean_reward"] = log.mean_reward.at(agent);
    j["critic_loss"] = log.critic_loss.at(agent);
    return j.dump();
}

} // namespace gridtrade
