#include "gridtrade/prosumer.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gridtrade {

namespace {
constexpr double kBoundTolerance = 1e-9;
constexpr double kSocTolerance = 1e-9;
} // namespace

void BatterySpec::validate() const {
    if (!(capacity_kwh > 0.0)) throw ValidationError("battery capacity must be positive");
    if (!(0.0 <= soc_min && soc_min < soc_max && soc_max <= 1.0)) {
        throw ValidationError("battery SoC limits must satisfy 0 <= soc_min < soc_max <= 1");
    }
    if (!(b_min_kw < 0.0 && b_max_kw > 0.0)) {
        throw ValidationError("inverter limits must satisfy b_min < 0 < b_max");
    }
    if (!(round_trip_efficiency > 0.0 && round_trip_efficiency <= 1.0)) {
        throw ValidationError("round trip efficiency must lie in (0, 1]");
    }
    if (!(life_cycles > 0.0)) throw ValidationError("life cycle count must be positive");
    if (!(depth_of_discharge > 0.0 && depth_of_discharge <= 1.0)) {
        throw ValidationError("depth of discharge must lie in (0, 1]");
    }
    if (price_per_kwh < 0.0) throw ValidationError("battery price must be non-negative");
    if (initial_soc < soc_min || initial_soc > soc_max) {
        throw ValidationError("initial SoC outside [soc_min, soc_max]");
    }
}

double efficiency_for(double b_kw, const BatterySpec& spec) {
    const double one_way = std::sqrt(spec.round_trip_efficiency);
    return b_kw < 0.0 ? one_way : 1.0 / one_way;
}

ActionBounds feasible_action_bounds(BatteryState state, const BatterySpec& spec, double dt_hours) {
    const double one_way = std::sqrt(spec.round_trip_efficiency);
    const double eta_discharge = 1.0 / one_way;
    const double eta_charge = one_way;
    const double discharge_room = spec.capacity_kwh * (state.soc - spec.soc_min) / (eta_discharge * dt_hours);
    const double charge_room = spec.capacity_kwh * (state.soc - spec.soc_max) / (eta_charge * dt_hours);
    ActionBounds bounds;
    bounds.hi = std::max(0.0, std::min(spec.b_max_kw, discharge_room));
    bounds.lo = std::min(0.0, std::max(spec.b_min_kw, charge_room));
    return bounds;
}

BatteryState step_soc(BatteryState state, double b_kw, const BatterySpec& spec, double dt_hours) {
    const ActionBounds bounds = feasible_action_bounds(state, spec, dt_hours);
    if (b_kw < bounds.lo - kBoundTolerance || b_kw > bounds.hi + kBoundTolerance) {
        throw FeasibilityError("battery power " + std::to_string(b_kw) + " kW outside [" +
                               std::to_string(bounds.lo) + ", " + std::to_string(bounds.hi) + "]");
    }
    double soc = state.soc - efficiency_for(b_kw, spec) * b_kw * dt_hours / spec.capacity_kwh;
    if (soc < spec.soc_min - kSocTolerance || soc > spec.soc_max + kSocTolerance) {
        throw FeasibilityError("SoC left its window: " + std::to_string(soc));
    }
    soc = std::clamp(soc, spec.soc_min, spec.soc_max);
    return BatteryState{soc};
}

double wear_cost_per_kwh(const BatterySpec& spec) {
    const double mu = spec.round_trip_efficiency;
    return spec.price_per_kwh /
           (spec.life_cycles * 2.0 * spec.depth_of_discharge * spec.capacity_kwh * mu * mu);
}

} // namespace gridtrade
