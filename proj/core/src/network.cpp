#include "gridtrade/network.hpp"

#include "gridtrade/errors.hpp"
#include "gridtrade/lp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <queue>

namespace gridtrade {

using nlohmann::json;

RadialNetwork RadialNetwork::from_buses(std::vector<Bus> buses, double base_voltage_kv,
                                        double base_power_kva) {
    if (buses.empty()) throw TopologyError("network has no buses");
    if (!(base_voltage_kv > 0.0 && base_power_kva > 0.0)) {
        throw ValidationError("base voltage and base power must be positive");
    }
    const int n = static_cast<int>(buses.size());
    for (int i = 0; i < n; ++i) {
        const Bus& b = buses[i];
        if (b.id != i) throw TopologyError("bus ids must be 0..N-1 in order");
        if (i == 0 && b.parent != -1) throw TopologyError("bus 0 must be the substation");
        if (i != 0 && b.parent < 0) throw TopologyError("multiple roots: bus " + std::to_string(i) + " has no parent");
        if (i != 0 && b.parent >= n) throw TopologyError("bus " + std::to_string(i) + " has unknown parent");
        if (b.r_ohm < 0.0 || b.x_ohm < 0.0) throw ValidationError("negative line impedance");
        if (!(b.v_min_pu > 0.0 && b.v_min_pu < b.v_max_pu)) throw ValidationError("voltage band must satisfy 0 < v_min < v_max");
        if (!(b.line_limit_kva > 0.0)) throw ValidationError("line limit must be positive");
    }

    RadialNetwork net;
    net.base_voltage_kv_ = base_voltage_kv;
    net.base_power_kva_ = base_power_kva;
    net.children_.assign(n, {});
    for (int i = 1; i < n; ++i) net.children_[buses[i].parent].push_back(i);

    std::vector<char> seen(n, 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    while (!frontier.empty()) {
        const int b = frontier.front();
        frontier.pop();
        net.order_.push_back(b);
        for (int c : net.children_[b]) {
            if (seen[c]) throw TopologyError("cycle through bus " + std::to_string(c));
            seen[c] = 1;
            frontier.push(c);
        }
    }
    if (static_cast<int>(net.order_.size()) != n) {
        throw TopologyError("cycle detected: some buses are unreachable from the substation");
    }
    net.buses_ = std::move(buses);
    return net;
}

RadialNetwork RadialNetwork::scaled_impedance(double factor) const {
    RadialNetwork copy = *this;
    for (Bus& b : copy.buses_) {
        b.r_ohm *= factor;
        b.x_ohm *= factor;
    }
    return copy;
}

RadialNetwork network_from_json(const json& doc) {
    try {
        if (doc.value("schema", 0) != 1) throw ParseError("network file must declare \"schema\": 1");
        const double default_vmin = doc.value("default_v_min_pu", 0.95);
        const double default_vmax = doc.value("default_v_max_pu", 1.05);

        const auto& bus_list = doc.at("buses");
        const auto& line_list = doc.at("lines");
        std::map<int, json> bus_by_id;
        int substations = 0;
        for (const auto& b : bus_list) {
            const int id = b.at("id").get<int>();
            if (!bus_by_id.emplace(id, b).second) throw TopologyError("duplicate bus id " + std::to_string(id));
            if (b.value("substation", false)) ++substations;
        }
        if (substations > 1) throw TopologyError("multiple roots: more than one substation bus");
        if (bus_by_id.empty() || bus_by_id.begin()->first != 0 ||
            bus_by_id.rbegin()->first != static_cast<int>(bus_by_id.size()) - 1) {
            throw TopologyError("bus ids must be contiguous from 0");
        }
        const int n = static_cast<int>(bus_by_id.size());
        if (substations == 1 && !bus_by_id.at(0).value("substation", false)) {
            throw TopologyError("the substation must be bus 0");
        }

        // adjacency from undirected line records, oriented away from bus 0
        struct LineRec {
            int a, b;
            double r, x, limit;
        };
        std::vector<LineRec> lines;
        std::vector<std::vector<int>> adjacent(n);
        for (const auto& l : line_list) {
            LineRec rec{l.at("from").get<int>(), l.at("to").get<int>(), l.value("r_ohm", 0.0), l.value("x_ohm", 0.0),
                        l.contains("limit_kva") && !l.at("limit_kva").is_null()
                            ? l.at("limit_kva").get<double>()
                            : std::numeric_limits<double>::infinity()};
            if (rec.a < 0 || rec.a >= n || rec.b < 0 || rec.b >= n || rec.a == rec.b) {
                throw TopologyError("line references an unknown bus");
            }
            adjacent[rec.a].push_back(static_cast<int>(lines.size()));
            adjacent[rec.b].push_back(static_cast<int>(lines.size()));
            lines.push_back(rec);
        }

        std::vector<Bus> buses(n);
        for (int i = 0; i < n; ++i) {
            const json& b = bus_by_id.at(i);
            buses[i].id = i;
            buses[i].name = b.value("name", std::string{});
            buses[i].v_min_pu = b.value("v_min_pu", default_vmin);
            buses[i].v_max_pu = b.value("v_max_pu", default_vmax);
        }
        std::vector<char> seen(n, 0);
        std::vector<char> used(lines.size(), 0);
        std::queue<int> frontier;
        frontier.push(0);
        seen[0] = 1;
        while (!frontier.empty()) {
            const int u = frontier.front();
            frontier.pop();
            for (int li : adjacent[u]) {
                if (used[li]) continue;
                used[li] = 1;
                const LineRec& rec = lines[li];
                const int v = rec.a == u ? rec.b : rec.a;
                if (seen[v]) throw TopologyError("cycle: line " + std::to_string(rec.a) + "-" + std::to_string(rec.b) + " closes a loop");
                seen[v] = 1;
                buses[v].parent = u;
                buses[v].r_ohm = rec.r;
                buses[v].x_ohm = rec.x;
                buses[v].line_limit_kva = rec.limit;
                frontier.push(v);
            }
        }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
            throw TopologyError("multiple roots: network is not connected to bus 0");
        }

        RadialNetwork net = RadialNetwork::from_buses(std::move(buses), doc.value("base_voltage_kv", 0.4),
                                                      doc.value("base_power_kva", 100.0));
        net.load_power_factor = doc.value("load_power_factor", 0.95);
        net.substation_voltage_pu = doc.value("substation_voltage_pu", 1.0);
        net.violation_price = doc.value("violation_price", 0.0);
        if (!(net.load_power_factor > 0.0 && net.load_power_factor <= 1.0)) {
            throw ValidationError("load power factor must lie in (0, 1]");
        }
        if (net.violation_price < 0.0) throw ValidationError("violation price must be non-negative");
        return net;
    } catch (const json::exception& e) {
        throw ParseError(std::string("network json: ") + e.what());
    }
}

RadialNetwork parse_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("network file '" + path.string() + "': " + e.what());
    }
    return network_from_json(doc);
}

NetSnapshot make_snapshot(const RadialNetwork& net, std::vector<double> injection_kw, double wholesale_price) {
    if (injection_kw.size() != net.num_buses()) throw ShapeError("one injection per bus required");
    const double tan_phi = std::tan(std::acos(net.load_power_factor));
    NetSnapshot snap;
    snap.reactive_demand_kvar.resize(injection_kw.size());
    for (std::size_t i = 0; i < injection_kw.size(); ++i) {
        snap.reactive_demand_kvar[i] = std::max(0.0, -injection_kw[i]) * tan_phi;
    }
    snap.injection_kw = std::move(injection_kw);
    snap.wholesale_price = wholesale_price;
    return snap;
}

std::vector<double> FlowSolution::loading_fraction(const RadialNetwork& net) const {
    std::vector<double> out(net.num_buses(), 0.0);
    for (std::size_t n = 1; n < net.num_buses(); ++n) {
        const double limit = net.bus(static_cast<int>(n)).line_limit_kva;
        if (std::isfinite(limit)) out[n] = std::hypot(flow_kw[n], flow_kvar[n]) / limit;
    }
    return out;
}

double FlowSolution::peak_loading_fraction(const RadialNetwork& net) const {
    const auto f = loading_fraction(net);
    return f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
}

double FlowSolution::min_voltage_pu() const {
    return voltage_pu.empty() ? 1.0 : *std::min_element(voltage_pu.begin(), voltage_pu.end());
}

namespace {

void check_snapshot(const RadialNetwork& net, const NetSnapshot& s) {
    if (s.injection_kw.size() != net.num_buses() || s.reactive_demand_kvar.size() != net.num_buses()) {
        throw ShapeError("snapshot must carry one injection and one reactive demand per bus");
    }
    for (std::size_t i = 0; i < s.injection_kw.size(); ++i) {
        if (!std::isfinite(s.injection_kw[i]) || !std::isfinite(s.reactive_demand_kvar[i])) {
            throw ValidationError("non-finite injection at bus " + std::to_string(i));
        }
    }
}

// Per-unit working state of the fixed point.
struct PuFlow {
    std::vector<double> p, q, loss, w;
};

void accumulate_flows(const RadialNetwork& net, const std::vector<double>& d, const std::vector<double>& qd,
                      PuFlow& f) {
    const auto& order = net.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int n = *it;
        if (n == 0) continue;
        double p = d[n] + f.loss[n];
        double q = qd[n];
        for (int c : net.children(n)) {
            p += f.p[c];
            q += f.q[c];
        }
        f.p[n] = p;
        f.q[n] = q;
    }
}

void propagate_voltage(const RadialNetwork& net, PuFlow& f, double w0, double zb, double min_w) {
    f.w[0] = w0;
    for (int n : net.order()) {
        if (n == 0) continue;
        const Bus& b = net.bus(n);
        f.w[n] = f.w[b.parent] - 2.0 * (b.r_ohm / zb * f.p[n] + b.x_ohm / zb * f.q[n]);
        if (!(f.w[n] >= min_w)) {
            throw DivergenceError("voltage at bus " + std::to_string(n) + " fell below the divergence threshold");
        }
    }
}

} // namespace

FlowSolution solve_lindistflow(const RadialNetwork& net, const NetSnapshot& snapshot, const FlowOptions& options) {
    check_snapshot(net, snapshot);
    const std::size_t nb = net.num_buses();
    const double sb = net.base_power_kva();
    const double zb = net.base_impedance_ohm();
    const double w0 = net.substation_voltage_pu * net.substation_voltage_pu;
    const double min_w = options.min_voltage_pu * options.min_voltage_pu;

    std::vector<double> d(nb), qd(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        d[i] = -snapshot.injection_kw[i] / sb;
        qd[i] = snapshot.reactive_demand_kvar[i] / sb;
    }
    d[0] = qd[0] = 0.0;

    PuFlow f{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0),
             std::vector<double>(nb, w0)};
    const double tol = options.tolerance_kw / sb;
    int iter = 0;
    bool converged = false;
    while (iter < options.max_iterations) {
        ++iter;
        accumulate_flows(net, d, qd, f);
        propagate_voltage(net, f, w0, zb, min_w);
        double change = 0.0;
        for (std::size_t n = 1; n < nb; ++n) {
            const Bus& b = net.bus(static_cast<int>(n));
            const double l = b.r_ohm / zb * (f.p[n] * f.p[n] + f.q[n] * f.q[n]) / f.w[b.parent];
            change = std::max(change, std::abs(l - f.loss[n]));
            f.loss[n] = l;
        }
        if (change <= tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw DivergenceError("loss iteration did not converge");
    // flows and voltages consistent with the final losses
    accumulate_flows(net, d, qd, f);
    propagate_voltage(net, f, w0, zb, min_w);

    FlowSolution out;
    out.iterations = iter;
    out.flow_kw.assign(nb, 0.0);
    out.flow_kvar.assign(nb, 0.0);
    out.loss_kw.assign(nb, 0.0);
    out.voltage_pu.assign(nb, 0.0);
    out.voltage_pu[0] = std::sqrt(w0);
    for (std::size_t n = 1; n < nb; ++n) {
        out.flow_kw[n] = f.p[n] * sb;
        out.flow_kvar[n] = f.q[n] * sb;
        out.loss_kw[n] = f.loss[n] * sb;
        out.voltage_pu[n] = std::sqrt(f.w[n]);
        out.total_loss_kw += out.loss_kw[n];
    }
    for (int c : net.children(0)) out.import_kw += out.flow_kw[c];
    return out;
}

namespace {

double line_active_limit_kw(const Bus& b, double q_kvar) {
    if (!std::isfinite(b.line_limit_kva)) return std::numeric_limits<double>::infinity();
    const double s2 = b.line_limit_kva * b.line_limit_kva - q_kvar * q_kvar;
    return s2 > 0.0 ? std::sqrt(s2) : 0.0;
}

} // namespace

double dispatch_cost(const RadialNetwork& net, const NetSnapshot& snapshot, const FlowSolution& flow) {
    double cost = snapshot.wholesale_price * flow.import_kw;
    if (net.violation_price <= 0.0) return cost;
    for (std::size_t n = 1; n < net.num_buses(); ++n) {
        const Bus& b = net.bus(static_cast<int>(n));
        const double limit = line_active_limit_kw(b, flow.flow_kvar[n]);
        if (std::isfinite(limit)) cost += net.violation_price * std::max(0.0, std::abs(flow.flow_kw[n]) - limit);
        const double w = flow.voltage_pu[n] * flow.voltage_pu[n];
        const double under = std::max(0.0, b.v_min_pu * b.v_min_pu - w);
        const double over = std::max(0.0, w - b.v_max_pu * b.v_max_pu);
        cost += net.violation_price * net.base_power_kva() * (under + over);
    }
    return cost;
}

DlmpResult compute_dlmp(const RadialNetwork& net, const NetSnapshot& snapshot, const FlowOptions& options) {
    FlowSolution flow = solve_lindistflow(net, snapshot, options);

    const std::size_t nb = net.num_buses();
    const double sb = net.base_power_kva();
    const double zb = net.base_impedance_ohm();
    const double w0 = net.substation_voltage_pu * net.substation_voltage_pu;
    const double lambda0 = snapshot.wholesale_price;
    const double rho = net.violation_price;
    const bool soft = rho > 0.0;

    // Objective is GBP/h divided by base power, so duals of rows written in
    // per-unit power come out directly in GBP/kWh.
    lp::LinearProgram prog;
    const int imp = prog.add_variable(lambda0, -lp::kInfinity, lp::kInfinity);
    std::vector<int> p(nb, -1), q(nb, -1), w(nb, -1), loss(nb, -1);
    for (std::size_t n = 1; n < nb; ++n) {
        p[n] = prog.add_variable(0.0, -lp::kInfinity, lp::kInfinity);
        q[n] = prog.add_variable(0.0, -lp::kInfinity, lp::kInfinity);
        w[n] = prog.add_variable(0.0, -lp::kInfinity, lp::kInfinity);
        loss[n] = prog.add_variable(0.0, -lp::kInfinity, lp::kInfinity);
    }

    std::vector<int> balance_row(nb, -1);
    {
        std::vector<std::pair<int, double>> terms{{imp, 1.0}};
        for (int c : net.children(0)) terms.emplace_back(p[c], -1.0);
        balance_row[0] = prog.add_row(std::move(terms), lp::Sense::equal, 0.0, "balance[0]");
    }
    for (std::size_t n = 1; n < nb; ++n) {
        const int ni = static_cast<int>(n);
        const Bus& b = net.bus(ni);
        const double r = b.r_ohm / zb;
        const double x = b.x_ohm / zb;
        const double d = -snapshot.injection_kw[n] / sb;
        const double qd = snapshot.reactive_demand_kvar[n] / sb;

        std::vector<std::pair<int, double>> bal{{p[n], 1.0}, {loss[n], -1.0}};
        std::vector<std::pair<int, double>> qbal{{q[n], 1.0}};
        for (int c : net.children(ni)) {
            bal.emplace_back(p[c], -1.0);
            qbal.emplace_back(q[c], -1.0);
        }
        balance_row[n] = prog.add_row(std::move(bal), lp::Sense::equal, d, "balance[" + std::to_string(n) + "]");
        prog.add_row(std::move(qbal), lp::Sense::equal, qd, "reactive[" + std::to_string(n) + "]");

        std::vector<std::pair<int, double>> volt{{w[n], 1.0}, {p[n], 2.0 * r}, {q[n], 2.0 * x}};
        double volt_rhs = 0.0;
        if (b.parent == 0) {
            volt_rhs = w0;
        } else {
            volt.emplace_back(w[b.parent], -1.0);
        }
        prog.add_row(std::move(volt), lp::Sense::equal, volt_rhs, "voltage_drop[" + std::to_string(n) + "]");

        // first-order expansion of r (P^2 + Q^2) / w_parent at the operating point
        const double p0 = flow.flow_kw[n] / sb;
        const double q0 = flow.flow_kvar[n] / sb;
        const double wp0 = flow.voltage_pu[b.parent] * flow.voltage_pu[b.parent];
        const double l0 = r * (p0 * p0 + q0 * q0) / wp0;
        const double dp = 2.0 * r * p0 / wp0;
        const double dq = 2.0 * r * q0 / wp0;
        const double dw = -l0 / wp0;
        std::vector<std::pair<int, double>> lrow{{loss[n], 1.0}, {p[n], -dp}, {q[n], -dq}};
        double l_rhs = l0 - dp * p0 - dq * q0;
        if (b.parent != 0) {
            lrow.emplace_back(w[b.parent], -dw);
            l_rhs -= dw * wp0;
        }
        prog.add_row(std::move(lrow), lp::Sense::equal, l_rhs, "loss[" + std::to_string(n) + "]");
    }

    // limits
    std::vector<std::pair<int, int>> line_rows(nb, {-1, -1});
    std::vector<std::pair<int, int>> volt_rows(nb, {-1, -1});
    for (std::size_t n = 1; n < nb; ++n) {
        const int ni = static_cast<int>(n);
        const Bus& b = net.bus(ni);
        const double limit = line_active_limit_kw(b, flow.flow_kvar[n]);
        const std::string tag = "[" + std::to_string(n) + "]";
        if (std::isfinite(limit)) {
            std::vector<std::pair<int, double>> up{{p[n], 1.0}};
            std::vector<std::pair<int, double>> down{{p[n], -1.0}};
            if (soft) {
                up.emplace_back(prog.add_variable(rho, 0.0), -1.0);
                down.emplace_back(prog.add_variable(rho, 0.0), -1.0);
            }
            line_rows[n].first = prog.add_row(std::move(up), lp::Sense::less_equal, limit / sb, "line_limit_forward" + tag);
            line_rows[n].second = prog.add_row(std::move(down), lp::Sense::less_equal, limit / sb, "line_limit_reverse" + tag);
        }
        std::vector<std::pair<int, double>> lo{{w[n], 1.0}};
        std::vector<std::pair<int, double>> hi{{w[n], 1.0}};
        if (soft) {
            lo.emplace_back(prog.add_variable(rho, 0.0), 1.0);
            hi.emplace_back(prog.add_variable(rho, 0.0), -1.0);
        }
        volt_rows[n].first = prog.add_row(std::move(lo), lp::Sense::greater_equal, b.v_min_pu * b.v_min_pu, "voltage_min" + tag);
        volt_rows[n].second = prog.add_row(std::move(hi), lp::Sense::less_equal, b.v_max_pu * b.v_max_pu, "voltage_max" + tag);
    }

    const lp::Solution sol = lp::solve(prog);
    if (sol.status == lp::Status::infeasible) {
        const std::string name = sol.violated_row >= 0 ? prog.rows()[sol.violated_row].name : std::string("bounds");
        throw InfeasibleError("no import level satisfies the network limits (" + name + ")", name);
    }
    if (sol.status != lp::Status::optimal) {
        throw DivergenceError("nodal price program did not reach an optimum");
    }

    DlmpResult result;
    result.dlmp.assign(nb, 0.0);
    result.dnt.assign(nb, 0.0);
    result.congestion_multiplier.assign(nb, 0.0);
    result.voltage_multiplier.assign(nb, 0.0);
    result.dlmp[0] = lambda0;
    for (std::size_t n = 1; n < nb; ++n) {
        result.dlmp[n] = sol.duals[balance_row[n]];
        result.dnt[n] = result.dlmp[n] - lambda0;
        if (line_rows[n].first >= 0) {
            result.congestion_multiplier[n] = -(sol.duals[line_rows[n].first] + sol.duals[line_rows[n].second]);
        }
        result.voltage_multiplier[n] = sol.duals[volt_rows[n].first] - sol.duals[volt_rows[n].second];
    }
    // multipliers are reported in GBP/kWh per kW / per unit as the program sees them
    result.objective = sol.objective * sb;
    result.flow = std::move(flow);
    return result;
}

void write_dlmp_csv(std::ostream& out, std::size_t slot, const DlmpResult& result, bool header) {
    if (header) out << "slot,bus,dlmp,dnt,voltage\n";
    char buf[160];
    for (std::size_t n = 0; n < result.dlmp.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.9f,%.9f,%.9f\n", slot, n, result.dlmp[n], result.dnt[n],
                      result.flow.voltage_pu[n]);
        out << buf;
    }
}

} // namespace gridtrade
