#include "gridtrade/environment.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace gridtrade {

std::size_t Community::horizon() const noexcept {
    return participants.empty() ? 0 : participants.front().load_kw.size();
}

std::vector<std::size_t> Community::agent_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < participants.size(); ++i) {
        if (participants[i].battery) out.push_back(i);
    }
    return out;
}

void Community::validate() const {
    if (participants.empty()) throw ValidationError("community has no participants");
    if (!(dt_hours > 0.0)) throw ValidationError("slot length must be positive");
    const std::size_t t = horizon();
    if (t == 0) throw ValidationError("empty horizon");
    for (const Participant& p : participants) {
        if (p.load_kw.size() != t || p.pv_kw.size() != t) {
            throw ValidationError("participant '" + p.id + "' series length differs from the horizon");
        }
        for (std::size_t i = 0; i < t; ++i) {
            if (!(p.load_kw[i] >= 0.0) || !(p.pv_kw[i] >= 0.0) || !std::isfinite(p.load_kw[i]) ||
                !std::isfinite(p.pv_kw[i])) {
                throw ValidationError("participant '" + p.id + "' has invalid power at slot " + std::to_string(i));
            }
        }
        if (p.battery) p.battery->validate();
        if (network) {
            if (p.bus <= 0 || static_cast<std::size_t>(p.bus) >= network->num_buses()) {
                throw ValidationError("participant '" + p.id + "' sits on a missing or substation bus");
            }
        }
    }
    pricing.bounds.validate();
    if (pricing.mode == PricingMode::exogenous) {
        if (pricing.buy.size() != t || pricing.sell.size() != t) {
            throw ValidationError("exogenous price series must cover the horizon");
        }
        for (std::size_t i = 0; i < t; ++i) {
            if (pricing.buy[i] < pricing.sell[i]) throw ValidationError("exogenous buy price below sell price");
        }
    }
    if (network && wholesale.size() != t) throw ValidationError("wholesale series must cover the horizon");
}

double denormalize_action(double action, const BatterySpec& spec) {
    const double a = std::clamp(action, -1.0, 1.0);
    return spec.b_min_kw + 0.5 * (a + 1.0) * (spec.b_max_kw - spec.b_min_kw);
}

Environment::Environment(std::shared_ptr<const Community> community) : community_(std::move(community)) {
    if (!community_) throw ValidationError("environment needs a community");
    community_->validate();
    agents_ = community_->agent_indices();
    for (std::size_t a : agents_) wear_.push_back(wear_cost_per_kwh(*community_->participants[a].battery));
}

AgentState Environment::observe_agent(std::size_t agent, std::size_t slot) const {
    const Participant& p = community_->participants[agents_[agent]];
    return AgentState{p.pv_kw[slot], p.load_kw[slot], batteries_[agent].soc};
}

std::vector<AgentState> Environment::observe() const {
    std::vector<AgentState> out;
    const std::size_t s = std::min(slot_, community_->horizon() - 1);
    for (std::size_t a = 0; a < agents_.size(); ++a) out.push_back(observe_agent(a, s));
    return out;
}

std::vector<AgentState> Environment::reset(std::size_t start_slot, std::size_t length) {
    if (start_slot >= community_->horizon()) {
        throw RangeError("episode start " + std::to_string(start_slot) + " is beyond the horizon");
    }
    if (length == 0) throw RangeError("episode length must be positive");
    slot_ = start_slot;
    end_ = std::min(start_slot + length, community_->horizon());
    batteries_.clear();
    for (std::size_t a : agents_) batteries_.push_back(BatteryState{community_->participants[a].battery->initial_soc});
    started_ = true;
    return observe();
}

StepResult Environment::step(std::span<const double> actions) {
    if (!started_ || done()) throw EpisodeFinished("episode is finished; call reset()");
    if (actions.size() != agents_.size()) throw ShapeError("one action per agent required");

    const Community& c = *community_;
    const std::size_t t = slot_;
    const std::size_t np = c.participants.size();
    const double dt = c.dt_hours;

    StepResult out;
    JointTransition& tr = out.transition;
    MarketSnapshot& m = out.market;
    tr.states = observe();
    tr.actions.assign(actions.begin(), actions.end());

    m.slot = t;
    m.battery_kw.assign(np, 0.0);
    m.net_kw.assign(np, 0.0);
    m.price.assign(np, 0.0);
    m.dnt.assign(np, 0.0);
    m.reward.assign(np, 0.0);
    m.wholesale = c.wholesale.empty() ? 0.0 : c.wholesale[t];

    std::vector<BatteryState> next_batteries = batteries_;
    for (std::size_t a = 0; a < agents_.size(); ++a) {
        const BatterySpec& spec = *c.participants[agents_[a]].battery;
        const ActionBounds bounds = feasible_action_bounds(batteries_[a], spec, dt);
        const double b = bounds.clip(denormalize_action(actions[a], spec));
        m.battery_kw[agents_[a]] = b;
        next_batteries[a] = step_soc(batteries_[a], b, spec, dt);
    }

    std::vector<double> supplies(np), demands(np);
    for (std::size_t i = 0; i < np; ++i) {
        const Participant& p = c.participants[i];
        supplies[i] = p.pv_kw[t] + m.battery_kw[i];
        demands[i] = p.load_kw[t];
        m.net_kw[i] = net_power(p.load_kw[t], p.pv_kw[t], m.battery_kw[i]);
    }
    m.prices.sdr = compute_sdr(supplies, demands);
    if (c.pricing.mode == PricingMode::sdr) {
        m.prices = compute_prices(m.prices.sdr, c.pricing.bounds);
    } else {
        m.prices.buy = c.pricing.buy[t];
        m.prices.sell = c.pricing.sell[t];
    }

    if (c.network) {
        const RadialNetwork& net = *c.network;
        const double tan_phi = std::tan(std::acos(net.load_power_factor));
        NetSnapshot snap;
        snap.injection_kw.assign(net.num_buses(), 0.0);
        snap.reactive_demand_kvar.assign(net.num_buses(), 0.0);
        snap.wholesale_price = m.wholesale;
        for (std::size_t i = 0; i < np; ++i) {
            const int bus = c.participants[i].bus;
            snap.injection_kw[bus] -= m.net_kw[i];
            snap.reactive_demand_kvar[bus] += c.participants[i].load_kw[t] * tan_phi;
        }
        if (c.dnt_enabled) {
            const DlmpResult prices = compute_dlmp(net, snap);
            for (std::size_t i = 0; i < np; ++i) m.dnt[i] = prices.dnt[c.participants[i].bus];
            m.total_loss_kw = prices.flow.total_loss_kw;
            m.peak_loading_fraction = prices.flow.peak_loading_fraction(net);
            m.min_voltage_pu = prices.flow.min_voltage_pu();
        } else {
            const FlowSolution flow = solve_lindistflow(net, snap);
            m.total_loss_kw = flow.total_loss_kw;
            m.peak_loading_fraction = flow.peak_loading_fraction(net);
            m.min_voltage_pu = flow.min_voltage_pu();
        }
    }

    for (std::size_t i = 0; i < np; ++i) {
        const double x = m.net_kw[i];
        m.price[i] = x >= 0.0 ? m.prices.buy : m.prices.sell;
        double wear = 0.0;
        if (const auto it = std::find(agents_.begin(), agents_.end(), i); it != agents_.end()) {
            wear = wear_[static_cast<std::size_t>(it - agents_.begin())];
        }
        m.reward[i] = -((m.price[i] + m.dnt[i]) * x + wear * std::abs(m.battery_kw[i])) * dt;
    }

    batteries_ = std::move(next_batteries);
    ++slot_;
    out.done = done();
    tr.terminal = out.done;
    for (std::size_t a = 0; a < agents_.size(); ++a) tr.rewards.push_back(m.reward[agents_[a]]);
    // next observation; the terminal one repeats the last profile slot
    const std::size_t next = std::min(slot_, c.horizon() - 1);
    for (std::size_t a = 0; a < agents_.size(); ++a) tr.next_states.push_back(observe_agent(a, next));
    return out;
}

double episode_return(std::span<const double> rewards, double gamma) {
    double total = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        total += discount * r;
        discount *= gamma;
    }
    return total;
}

void write_trace_header(std::ostream& out) {
    out << "slot,agent,g,d,soc,b,x,price_buy,price_sell,dnt,reward\n";
}

void write_trace_rows(std::ostream& out, const Community& community, const StepResult& step) {
    const auto agents = community.agent_indices();
    const MarketSnapshot& m = step.market;
    char buf[512];
    for (std::size_t a = 0; a < agents.size(); ++a) {
        const std::size_t i = agents[a];
        const AgentState& s = step.transition.states[a];
        std::snprintf(buf, sizeof buf, "%zu,%s,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", m.slot,
                      community.participants[i].id.c_str(), s.g, s.d, s.soc, m.battery_kw[i], m.net_kw[i],
                      m.prices.buy, m.prices.sell, m.dnt[i], m.reward[i]);
        out << buf;
    }
}

} // namespace gridtrade
