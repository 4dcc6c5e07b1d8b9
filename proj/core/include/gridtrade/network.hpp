#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridtrade {

/// A bus and, for every bus except the substation, the line that feeds it
/// from its parent. Line quantities elsewhere in this header are indexed by
/// the id of the bus they feed; entry 0 is always zero.
struct Bus {
    int id = 0;
    int parent = -1;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double line_limit_kva = std::numeric_limits<double>::infinity();
    double v_min_pu = 0.95;
    double v_max_pu = 1.05;
    std::string name;
};

class RadialNetwork {
public:
    RadialNetwork() = default;

    /// Builds a validated tree rooted at bus 0. `buses[i].id` must equal i and
    /// parent links must reach bus 0 without cycles (TopologyError otherwise).
    static RadialNetwork from_buses(std::vector<Bus> buses, double base_voltage_kv = 0.4,
                                    double base_power_kva = 100.0);

    std::size_t num_buses() const noexcept { return buses_.size(); }
    std::size_t num_lines() const noexcept { return buses_.empty() ? 0 : buses_.size() - 1; }
    const Bus& bus(int id) const { return buses_.at(static_cast<std::size_t>(id)); }
    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<int>& children(int id) const { return children_.at(static_cast<std::size_t>(id)); }
    /// Root-first ordering; every bus appears after its parent.
    const std::vector<int>& order() const noexcept { return order_; }

    double base_voltage_kv() const noexcept { return base_voltage_kv_; }
    double base_power_kva() const noexcept { return base_power_kva_; }
    double base_impedance_ohm() const noexcept {
        return base_voltage_kv_ * base_voltage_kv_ * 1000.0 / base_power_kva_;
    }

    double load_power_factor = 0.95;
    double substation_voltage_pu = 1.0;
    /// Price on line-limit and voltage-band violations, GBP/kWh per kW (line)
    /// or per unit of squared voltage times base power (voltage). Zero makes
    /// every limit hard.
    double violation_price = 0.0;

    /// Copy with every impedance multiplied by `factor`.
    RadialNetwork scaled_impedance(double factor) const;

private:
    std::vector<Bus> buses_;
    std::vector<std::vector<int>> children_;
    std::vector<int> order_;
    double base_voltage_kv_ = 0.4;
    double base_power_kva_ = 100.0;
};

/// Reads the versioned network JSON (`"schema": 1`). See docs/formats.md.
RadialNetwork parse_network(const std::filesystem::path& path);
RadialNetwork network_from_json(const nlohmann::json& doc);

/// Per-bus operating point for one slot. Injections are kW with generation
/// positive; reactive demand is kvar consumed at the bus.
struct NetSnapshot {
    std::vector<double> injection_kw;
    std::vector<double> reactive_demand_kvar;
    double wholesale_price = 0.0; // lambda_0, GBP/kWh
};

/// Fills reactive demand from the network load power factor applied to net
/// consumption (negative injection); net generation is taken at unity.
NetSnapshot make_snapshot(const RadialNetwork& net, std::vector<double> injection_kw,
                          double wholesale_price);

struct FlowOptions {
    int max_iterations = 100;
    double tolerance_kw = 1e-10;
    double min_voltage_pu = 0.5;
};

struct FlowSolution {
    std::vector<double> flow_kw;    // sending-end active flow, per line
    std::vector<double> flow_kvar;  // per line
    std::vector<double> loss_kw;    // per line
    std::vector<double> voltage_pu; // per bus
    double import_kw = 0.0;         // substation injection into the feeder
    double total_loss_kw = 0.0;
    int iterations = 0;

    /// |S| / limit per line (0 for unlimited lines), and the maximum of those.
    std::vector<double> loading_fraction(const RadialNetwork& net) const;
    double peak_loading_fraction(const RadialNetwork& net) const;
    double min_voltage_pu() const;
};

/// LinDistFlow with quadratic line losses, iterated to a fixed point.
///
///   P_l = d_child + L_l + sum(P_c for child lines c)
///   Q_l = q_child + sum(Q_c)
///   w_child = w_parent - 2 (r P_l + x Q_l)          (w = v^2, per unit)
///   L_l = r (P_l^2 + Q_l^2) / w_parent
///
/// Throws DivergenceError when a voltage falls below options.min_voltage_pu or
/// the loss iteration does not settle.
FlowSolution solve_lindistflow(const RadialNetwork& net, const NetSnapshot& snapshot,
                               const FlowOptions& options = {});

struct DlmpResult {
    std::vector<double> dlmp;                 // GBP/kWh per bus
    std::vector<double> dnt;                  // dlmp - lambda_0, per bus
    std::vector<double> congestion_multiplier; // per line, GBP/kWh
    std::vector<double> voltage_multiplier;    // per bus
    FlowSolution flow;
    double objective = 0.0; // GBP/h: lambda_0 * import + violation charges
};

/// Nodal prices as duals of the nodal active-power balance in a linear
/// program over the LinDistFlow model, with losses linearized at the
/// operating point from solve_lindistflow. The only cost is energy imported at
/// the substation (plus violation charges when the network prices them), so
/// dlmp - lambda_0 collects the loss, congestion and voltage components.
/// Throws InfeasibleError (naming the constraint) when a hard limit is broken.
DlmpResult compute_dlmp(const RadialNetwork& net, const NetSnapshot& snapshot,
                        const FlowOptions& options = {});

/// Objective the nodal prices differentiate, evaluated directly from a power
/// flow solution. Exposed for diagnostics and consistency checks.
double dispatch_cost(const RadialNetwork& net, const NetSnapshot& snapshot, const FlowSolution& flow);

/// Writes `slot,bus,dlmp,dnt,voltage` rows (no header when `header` is false).
void write_dlmp_csv(std::ostream& out, std::size_t slot, const DlmpResult& result, bool header);

} // namespace gridtrade
