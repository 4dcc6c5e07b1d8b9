#include "gridtrade/errors.hpp"
#include "gridtrade/manifest.hpp"
#include "gridtrade/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gridtrade;

namespace {

const std::filesystem::path kSource = GRIDTRADE_SOURCE_DIR;

SingleAgentProblem flat(std::size_t slots, double load, double buy, double sell) {
    SingleAgentProblem p;
    p.load_kw.assign(slots, load);
    p.pv_kw.assign(slots, 0.0);
    p.buy.assign(slots, buy);
    p.sell.assign(slots, sell);
    return p;
}

SingleAgentProblem bundled() {
    const auto m = load_manifest(kSource / "scenarios" / "single_agent.json");
    return single_agent_problem(*m.community, 0, 48);
}

} // namespace

TEST(Oracle, FlatPricesMeanIdle) {
    auto p = flat(12, 1.3, 0.05, 0.05);
    p.battery.initial_soc = 0.0; // no stored energy to give away
    const auto sol = solve_dp(p);
    double expected = 0.0;
    for (std::size_t t = 0; t < 12; ++t) {
        EXPECT_EQ(sol.action_kw[t], 0.0);
        expected += 0.05 * 1.3 * 0.5;
    }
    EXPECT_NEAR(sol.cost, expected, 1e-12);
}

TEST(Oracle, TwoSlotArbitrageUsesInverterLimit) {
    SingleAgentProblem p = flat(2, 5.0, 0.02, 0.01);
    p.buy[1] = 0.2;
    p.sell[1] = 0.15;
    p.battery.initial_soc = 0.0;
    const DpGrid grid{201, 21};
    const auto sol = solve_dp(p, grid);
    // one lattice cell of SoC, expressed as charging power
    const double cell_kw = p.battery.capacity_kwh / (grid.soc_points - 1) /
                           (efficiency_for(-1.0, p.battery) * p.dt_hours);
    EXPECT_LE(sol.action_kw[0], p.battery.b_min_kw + cell_kw);
    EXPECT_LT(sol.action_kw[0], 0.0);
    // everything stored goes out in the expensive slot
    EXPECT_GT(sol.action_kw[1], 0.0);
    EXPECT_NEAR(sol.soc[2], 0.0, 1e-12);
    // closed form: spread beats losses and wear, so cycling pays
    const double wear = wear_cost_per_kwh(p.battery);
    EXPECT_GT(p.buy[1] * p.battery.round_trip_efficiency, p.buy[0] + wear * (1.0 + p.battery.round_trip_efficiency));
    EXPECT_LT(sol.cost, solve_dp(flat(2, 5.0, 0.02, 0.01), grid).cost + 5.0 * 0.5 * (0.2 - 0.02));
}

TEST(Oracle, ReplayReproducesCost) {
    const auto p = bundled();
    const auto sol = solve_dp(p);
    const auto rep = replay_schedule(p, sol.action_kw);
    EXPECT_NEAR(rep.cost, sol.cost, 1e-9);
    for (std::size_t t = 0; t < p.horizon(); ++t) EXPECT_NEAR(rep.executed_kw[t], sol.action_kw[t], 1e-9);
    // targets beyond the reachable range are pulled back by at most one cell
    EXPECT_LE(sol.max_snap_error, 1.0 / 100.0 + 1e-12);
}

TEST(Oracle, GridRefinementIsStableOnBundledDay) {
    const auto p = bundled();
    const double coarse = solve_dp(p, {101, 21}).cost;
    const double fine = solve_dp(p, {201, 21}).cost;
    EXPECT_LT(std::abs(fine - coarse), 0.005 * std::abs(coarse));
}

// Smooth tariff, surplus always sells for something.
TEST(Oracle, GridRefinementIsStableOnTimeOfUseDay) {
    auto p = flat(48, 0.8, 0.04, 0.02);
    for (std::size_t t = 0; t < 48; ++t) {
        const double h = 0.5 * static_cast<double>(t);
        p.pv_kw[t] = h > 6.0 && h < 18.0 ? 3.0 * std::sin(3.14159265358979 * (h - 6.0) / 12.0) : 0.0;
        if (h >= 16.0 && h < 20.0) {
            p.buy[t] = 0.09;
            p.sell[t] = 0.06;
        }
    }
    p.battery.initial_soc = 0.2;
    const double coarse = solve_dp(p, {101, 21}).cost;
    const double fine = solve_dp(p, {201, 21}).cost;
    EXPECT_LT(std::abs(fine - coarse), 0.005 * std::abs(coarse));
}

TEST(Oracle, LowerBoundsRandomSchedules) {
    const auto p = bundled();
    const double best = solve_dp(p).cost;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> actions(p.horizon());
        for (double& a : actions) a = u(rng);
        EXPECT_GE(replay_schedule(p, actions).cost, best - 1e-9);
    }
    EXPECT_GE(replay_schedule(p, std::vector<double>(p.horizon(), 0.0)).cost, best);
}

TEST(Oracle, SlotCostMatchesReward) {
    auto p = flat(1, 1.2, 0.047222, 0.03);
    p.pv_kw[0] = 0.8;
    const double wear = wear_cost_per_kwh(p.battery);
    EXPECT_NEAR(slot_cost(p, 0, 0.1), (0.047222 * 0.3 + wear * 0.1) * 0.5, 1e-15);
    p.dnt = {0.01};
    EXPECT_NEAR(slot_cost(p, 0, 0.1), (0.057222 * 0.3 + wear * 0.1) * 0.5, 1e-15);
}

TEST(Oracle, ActionNormalizationRoundTrips) {
    const BatterySpec pw;
    for (double b : {-5.0, -1.2, 0.0, 3.3, 5.0}) EXPECT_NEAR(denormalize_action(normalize_action(b, pw), pw), b, 1e-12);
}

TEST(Oracle, Validation) {
    EXPECT_THROW((DpGrid{1, 21}.validate()), ValidationError);
    EXPECT_THROW((DpGrid{101, 1}.validate()), ValidationError);
    auto p = flat(3, 1.0, 0.05, 0.03);
    p.sell.pop_back();
    EXPECT_THROW(solve_dp(p), ValidationError);
    const auto m = load_manifest(kSource / "scenarios" / "community15.json");
    EXPECT_THROW(single_agent_problem(*m.community, 0, 48), ValidationError);
}
