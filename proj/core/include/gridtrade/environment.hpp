#pragma once

#include "gridtrade/network.hpp"
#include "gridtrade/pricing.hpp"
#include "gridtrade/prosumer.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridtrade {

/// A community member. Members with a battery are learning agents; the rest
/// (plain consumers) still count towards the SDR and the network flows.
struct Participant {
    std::string id;
    int bus = 1;
    std::vector<double> load_kw;
    std::vector<double> pv_kw;
    std::optional<BatterySpec> battery;
};

enum class PricingMode { sdr, exogenous };

struct PricingConfig {
    PricingMode mode = PricingMode::sdr;
    PriceBounds bounds;
    // exogenous mode only: per-slot prices paid by buyers / received by sellers
    std::vector<double> buy;
    std::vector<double> sell;
};

struct Community {
    std::vector<Participant> participants;
    PricingConfig pricing;
    std::vector<double> wholesale; // lambda_0 per slot, GBP/kWh
    std::shared_ptr<const RadialNetwork> network;
    bool dnt_enabled = true;
    double dt_hours = 0.5;

    std::size_t horizon() const noexcept;
    std::vector<std::size_t> agent_indices() const;
    /// Throws ValidationError when series lengths, buses or parameters disagree.
    void validate() const;
};

inline constexpr int kStateDim = 3;
inline constexpr int kActionDim = 1;

struct AgentState {
    double g = 0.0;   // PV output, kW
    double d = 0.0;   // load, kW
    double soc = 0.0; // fraction
};

struct JointTransition {
    std::vector<AgentState> states;
    std::vector<double> actions; // normalized, as submitted
    std::vector<double> rewards;
    std::vector<AgentState> next_states;
    bool terminal = false;
};

/// Everything the platform and the DSO computed for one slot. Per-participant
/// vectors follow Community::participants order.
struct MarketSnapshot {
    std::size_t slot = 0;
    SlotPrices prices;
    double wholesale = 0.0;
    std::vector<double> battery_kw;
    std::vector<double> net_kw;
    std::vector<double> price; // pi applied to each participant
    std::vector<double> dnt;
    std::vector<double> reward; // GBP for the slot, agents and passive members alike
    double total_loss_kw = 0.0;
    double peak_loading_fraction = 0.0;
    double min_voltage_pu = 1.0;
};

struct StepResult {
    JointTransition transition;
    MarketSnapshot market;
    bool done = false;
};

/// Maps a normalized action in [-1, 1] affinely onto [b_min, b_max].
double denormalize_action(double action, const BatterySpec& spec);

class Environment {
public:
    explicit Environment(std::shared_ptr<const Community> community);

    /// Starts an episode of `length` slots at `start_slot` (truncated at the
    /// horizon). Batteries go back to their initial SoC.
    std::vector<AgentState> reset(std::size_t start_slot, std::size_t length);

    /// Advances one slot. Throws EpisodeFinished once the episode is over.
    StepResult step(std::span<const double> actions);

    std::size_t num_agents() const noexcept { return agents_.size(); }
    std::size_t slot() const noexcept { return slot_; }
    bool done() const noexcept { return slot_ >= end_; }
    const Community& community() const noexcept { return *community_; }
    std::vector<AgentState> observe() const;

private:
    AgentState observe_agent(std::size_t agent, std::size_t slot) const;

    std::shared_ptr<const Community> community_;
    std::vector<std::size_t> agents_;
    std::vector<BatteryState> batteries_;
    std::vector<double> wear_;
    std::vector<int> bus_of_participant_;
    std::size_t slot_ = 0;
    std::size_t end_ = 0;
    bool started_ = false;
};

/// sum_t gamma^t r_t
double episode_return(std::span<const double> rewards, double gamma);

/// Evaluation trace: `slot,agent,g,d,soc,b,x,price_buy,price_sell,dnt,reward`,
/// one row per agent per slot. `soc` is the value at the start of the slot.
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, const Community& community, const StepResult& step);

} // namespace gridtrade
