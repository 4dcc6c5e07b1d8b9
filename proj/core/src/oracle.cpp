#include "gridtrade/oracle.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridtrade {

void DpGrid::validate() const {
    if (soc_points < 2 || action_points < 2) throw ValidationError("DP grid counts must be >= 2");
}

void SingleAgentProblem::validate() const {
    const std::size_t t = horizon();
    if (t == 0) throw ValidationError("empty horizon");
    if (pv_kw.size() != t || buy.size() != t || sell.size() != t || (!dnt.empty() && dnt.size() != t)) {
        throw ValidationError("single-agent series lengths differ");
    }
    if (!(dt_hours > 0.0)) throw ValidationError("slot length must be positive");
    battery.validate();
}

double slot_cost(const SingleAgentProblem& problem, std::size_t t, double b_kw) {
    const double x = net_power(problem.load_kw[t], problem.pv_kw[t], b_kw);
    const double price = x >= 0.0 ? problem.buy[t] : problem.sell[t];
    const double delta = problem.dnt.empty() ? 0.0 : problem.dnt[t];
    return ((price + delta) * x + wear_cost_per_kwh(problem.battery) * std::abs(b_kw)) * problem.dt_hours;
}

DpSolution solve_dp(const SingleAgentProblem& problem, const DpGrid& grid) {
    problem.validate();
    grid.validate();
    const BatterySpec& spec = problem.battery;
    const std::size_t horizon = problem.horizon();
    const auto n = static_cast<std::size_t>(grid.soc_points);
    const double span = spec.soc_max - spec.soc_min;
    const double cell = span / static_cast<double>(n - 1);
    auto lattice = [&](std::size_t i) { return spec.soc_min + cell * static_cast<double>(i); };
    auto snap = [&](double soc) {
        const double k = span > 0.0 ? std::round((soc - spec.soc_min) / cell) : 0.0;
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n - 1)));
    };

    std::vector<double> grid_b(static_cast<std::size_t>(grid.action_points));
    for (std::size_t k = 0; k < grid_b.size(); ++k) {
        grid_b[k] = spec.b_min_kw +
                    (spec.b_max_kw - spec.b_min_kw) * static_cast<double>(k) / static_cast<double>(grid_b.size() - 1);
    }

    // Battery power that moves the SoC from `from` to `to` exactly.
    const double root_mu = std::sqrt(spec.round_trip_efficiency);
    auto power_for = [&](double from, double to) {
        const double delta = to - from;
        const double energy = delta * spec.capacity_kwh / problem.dt_hours;
        return delta > 0.0 ? -energy / root_mu : -energy * root_mu;
    };

    std::vector<double> value(n, 0.0), next_value(n, 0.0);
    std::vector<std::vector<double>> policy(horizon, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::size_t>> successor(horizon, std::vector<std::size_t>(n, 0));
    double max_snap = 0.0;

    for (std::size_t t = horizon; t-- > 0;) {
        next_value.swap(value);
        for (std::size_t i = 0; i < n; ++i) {
            const BatteryState state{lattice(i)};
            const ActionBounds bounds = feasible_action_bounds(state, spec, problem.dt_hours);
            // lattice points reachable within the feasible power range
            const double soc_high = step_soc(state, bounds.lo, spec, problem.dt_hours).soc;
            const double soc_low = step_soc(state, bounds.hi, spec, problem.dt_hours).soc;
            const double eps = 1e-9 * std::max(1.0, span);
            const auto j_min = static_cast<std::size_t>(std::ceil((soc_low - spec.soc_min) / cell - eps));
            const auto j_max = static_cast<std::size_t>(std::max(0.0, std::floor((soc_high - spec.soc_min) / cell + eps)));
            double best = std::numeric_limits<double>::infinity();
            for (double raw : grid_b) {
                const double soc = step_soc(state, bounds.clip(raw), spec, problem.dt_hours).soc;
                const std::size_t j = std::clamp(snap(soc), std::min(j_min, i), std::max(j_max, i));
                const double b = j == i ? 0.0 : bounds.clip(power_for(lattice(i), lattice(j)));
                const double v = slot_cost(problem, t, b) + next_value[j];
                max_snap = std::max(max_snap, std::abs(soc - lattice(j)));
                if (v < best - 1e-15) {
                    best = v;
                    policy[t][i] = b;
                    successor[t][i] = j;
                }
            }
            value[i] = best;
        }
    }

    DpSolution out;
    out.max_snap_error = max_snap;
    std::size_t i = snap(spec.initial_soc);
    out.cost = value[i];
    for (std::size_t t = 0; t < horizon; ++t) {
        out.soc.push_back(lattice(i));
        out.action_kw.push_back(policy[t][i]);
        i = successor[t][i];
    }
    out.soc.push_back(lattice(i));
    return out;
}

Replay replay_schedule(const SingleAgentProblem& problem, const std::vector<double>& action_kw) {
    problem.validate();
    if (action_kw.size() != problem.horizon()) throw ShapeError("schedule length differs from the horizon");
    Replay out;
    BatteryState state{problem.battery.initial_soc};
    for (std::size_t t = 0; t < problem.horizon(); ++t) {
        out.soc.push_back(state.soc);
        const double b = feasible_action_bounds(state, problem.battery, problem.dt_hours).clip(action_kw[t]);
        out.executed_kw.push_back(b);
        out.cost += slot_cost(problem, t, b);
        state = step_soc(state, b, problem.battery, problem.dt_hours);
    }
    out.soc.push_back(state.soc);
    return out;
}

SingleAgentProblem single_agent_problem(const Community& community, std::size_t start, std::size_t length) {
    community.validate();
    const auto agents = community.agent_indices();
    if (agents.size() != 1) throw ValidationError("the DP oracle needs exactly one battery-equipped participant");
    if (community.pricing.mode != PricingMode::exogenous) {
        throw ValidationError("the DP oracle needs exogenous prices");
    }
    if (community.network && community.dnt_enabled) {
        throw ValidationError("the DP oracle needs network tariffs disabled");
    }
    if (start >= community.horizon()) throw RangeError("window starts beyond the horizon");
    const std::size_t end = std::min(start + length, community.horizon());
    const Participant& p = community.participants[agents.front()];
    auto cut = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(start),
                                   v.begin() + static_cast<std::ptrdiff_t>(end));
    };
    SingleAgentProblem out;
    out.load_kw = cut(p.load_kw);
    out.pv_kw = cut(p.pv_kw);
    out.buy = cut(community.pricing.buy);
    out.sell = cut(community.pricing.sell);
    out.battery = *p.battery;
    out.dt_hours = community.dt_hours;
    return out;
}

double normalize_action(double b_kw, const BatterySpec& spec) {
    const double a = 2.0 * (b_kw - spec.b_min_kw) / (spec.b_max_kw - spec.b_min_kw) - 1.0;
    return std::clamp(a, -1.0, 1.0);
}

} // namespace gridtrade
