#pragma once

#include <string>

namespace gridtrade {

/// Battery parameters. Defaults are a Tesla Powerwall 2 (13.5 kWh usable,
/// 5 kW continuous, 92.5 % round trip, 5000 cycles at 100 % DoD).
struct BatterySpec {
    double capacity_kwh = 13.5;
    double soc_min = 0.0;
    double soc_max = 1.0;
    double b_min_kw = -5.0;  // charging limit (negative)
    double b_max_kw = 5.0;   // discharging limit (positive)
    double round_trip_efficiency = 0.925;
    double price_per_kwh = 314.64;
    double life_cycles = 5000.0;
    double depth_of_discharge = 1.0;
    double initial_soc = 0.5;

    /// Throws ValidationError on violated invariants.
    void validate() const;
};

struct BatteryState {
    double soc = 0.5;
};

struct ProsumerSpec {
    std::string id;
    BatterySpec battery;
    double pv_capacity_kw = 1.0;
    int bus_id = 1;
};

/// Feasible battery power range for one slot, kW. lo <= 0 <= hi while soc is in range.
struct ActionBounds {
    double lo = 0.0;
    double hi = 0.0;

    double clip(double b) const noexcept { return b < lo ? lo : (b > hi ? hi : b); }
};

/// Factor applied to b in the SoC update: sqrt(mu) when charging (b < 0),
/// 1/sqrt(mu) when discharging.
double efficiency_for(double b_kw, const BatterySpec& spec);

/// Intersection of the SoC-window limits and the inverter limits.
ActionBounds feasible_action_bounds(BatteryState state, const BatterySpec& spec, double dt_hours);

/// soc' = soc - eta(b) * b * dt / E. Throws FeasibilityError if b lies outside
/// feasible_action_bounds by more than 1e-9 kW; the result is clamped into
/// [soc_min, soc_max] to absorb rounding.
BatteryState step_soc(BatteryState state, double b_kw, const BatterySpec& spec, double dt_hours);

/// Empirical wear cost C_b / (ACC * 2 * DoD * E_b * mu^2), GBP per kWh of throughput.
double wear_cost_per_kwh(const BatterySpec& spec);

/// x = d - (g + b). Positive: buyer. Negative: seller.
constexpr double net_power(double demand_kw, double generation_kw, double battery_kw) noexcept {
    return demand_kw - (generation_kw + battery_kw);
}

} // namespace gridtrade
