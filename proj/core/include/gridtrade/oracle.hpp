#pragma once

#include "gridtrade/environment.hpp"
#include "gridtrade/prosumer.hpp"

#include <vector>

namespace gridtrade {

struct DpGrid {
    int soc_points = 101;
    int action_points = 21;

    void validate() const;
};

/// One battery owner facing fixed buy/sell prices (and an optional fixed
/// tariff series).
struct SingleAgentProblem {
    std::vector<double> load_kw;
    std::vector<double> pv_kw;
    std::vector<double> buy;
    std::vector<double> sell;
    std::vector<double> dnt; // empty means zero
    BatterySpec battery;
    double dt_hours = 0.5;

    std::size_t horizon() const noexcept { return load_kw.size(); }
    void validate() const;
};

/// Cost of a single slot, GBP: ((pi + delta) * x + wear * |b|) * dt.
double slot_cost(const SingleAgentProblem& problem, std::size_t t, double b_kw);

struct DpSolution {
    double cost = 0.0;             // optimal on the lattice
    std::vector<double> action_kw; // one per slot
    std::vector<double> soc;       // lattice SoC at the start of each slot, plus the final one
    double max_snap_error = 0.0;   // largest |soc - lattice point| absorbed by snapping
};

/// Backward induction over a uniform SoC lattice on [soc_min, soc_max]. The
/// action grid spans [b_min, b_max] and is clipped to each state's feasible
/// range. The start SoC is snapped to the lattice.
DpSolution solve_dp(const SingleAgentProblem& problem, const DpGrid& grid = {});

struct Replay {
    double cost = 0.0;
    std::vector<double> executed_kw;
    std::vector<double> soc; // continuous, start of each slot plus the final one
};

/// Runs a battery power schedule without snapping; actions are clipped to the
/// feasible range at the true SoC.
Replay replay_schedule(const SingleAgentProblem& problem, const std::vector<double>& action_kw);

/// Extracts the problem seen by the only agent of `community` for slots
/// [start, start + length). Requires exogenous pricing and either no network
/// or tariffs disabled (ValidationError otherwise).
SingleAgentProblem single_agent_problem(const Community& community, std::size_t start, std::size_t length);

/// Inverse of denormalize_action.
double normalize_action(double b_kw, const BatterySpec& spec);

} // namespace gridtrade
