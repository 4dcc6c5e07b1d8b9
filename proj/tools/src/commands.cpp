#include "gridtrade_cli/commands.hpp"

#include "gridtrade/errors.hpp"
#include "gridtrade/manifest.hpp"
#include "gridtrade/network.hpp"
#include "gridtrade/oracle.hpp"
#include "gridtrade/pricing.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace gridtrade::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto log = std::make_shared<spdlog::logger>("gridtrade", sink);
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::warn);
    if (const char* level = std::getenv("GRIDTRADE_LOG")) {
        const std::string v = level;
        if (v == "debug") log->set_level(spdlog::level::debug);
        else if (v == "info") log->set_level(spdlog::level::info);
    }
    return log;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

Manifest load(const fs::path& path, bool no_dnt) {
    Manifest m = load_manifest(path);
    if (no_dnt) m.community->dnt_enabled = false;
    return m;
}

struct TrainArgs {
    fs::path manifest, out;
    std::optional<int> episodes;
    std::optional<std::uint64_t> seed;
    bool no_dnt = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, spdlog::logger& log) {
    Manifest m = load(a.manifest, a.no_dnt);
    Hyperparams hp = m.hyperparams;
    if (a.episodes) hp.episodes = *a.episodes;
    hp.validate();
    const std::uint64_t seed = a.seed.value_or(m.seed);
    const auto ids = m.agent_ids();

    fs::create_directories(a.out);
    std::ofstream log_file(a.out / "training_log.jsonl");
    if (!log_file) throw ValidationError("cannot write to '" + a.out.string() + "'");
    log.info("training {} agents for {} episodes (seed {}, dnt {})", ids.size(), hp.episodes, seed,
             m.community->dnt_enabled ? "on" : "off");

    const TrainingResult result = train(m.community, hp, seed, [&](const EpisodeLog& ep) {
        for (std::size_t p = 0; p < ids.size(); ++p) log_file << log_line(ep, p, ids[p]) << '\n';
        double mean = 0.0;
        for (double r : ep.mean_reward) mean += r;
        log.info("episode {} mean reward {:.6f}", ep.episode, mean / static_cast<double>(ep.mean_reward.size()));
    });
    log_file.close();
    save_checkpoint(a.out / "checkpoint.json", ids, result.actors, result.critics);
    out << "wrote " << (a.out / "checkpoint.json").string() << " and " << (a.out / "training_log.jsonl").string()
        << '\n';
    return kExitOk;
}

struct EvaluateArgs {
    fs::path manifest, checkpoints, out;
    std::optional<fs::path> summary;
    bool no_dnt = false;
};

fs::path checkpoint_file(const fs::path& p) {
    return fs::is_directory(p) ? p / "checkpoint.json" : p;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, spdlog::logger& log) {
    Manifest m = load(a.manifest, a.no_dnt);
    std::vector<std::string> ckpt_ids;
    const std::vector<Mlp> actors = load_checkpoint_actors(checkpoint_file(a.checkpoints), &ckpt_ids);
    const auto ids = m.agent_ids();
    if (actors.size() != ids.size()) {
        throw ShapeError("checkpoint holds " + std::to_string(actors.size()) + " actors, manifest has " +
                         std::to_string(ids.size()) + " agents");
    }
    for (std::size_t p = 0; p < actors.size(); ++p) {
        if (actors[p].input_dim() != kStateDim || actors[p].output_dim() != kActionDim) {
            throw ShapeError("actor " + std::to_string(p) + " has the wrong input or output size");
        }
        if (!ckpt_ids[p].empty() && ckpt_ids[p] != ids[p]) {
            throw ShapeError("checkpoint agent '" + ckpt_ids[p] + "' does not match manifest agent '" + ids[p] + "'");
        }
    }

    Environment env(m.community);
    std::vector<AgentState> states = env.reset(m.eval_start, m.eval_slots);
    std::ofstream trace(a.out);
    if (!trace) throw ValidationError("cannot write '" + a.out.string() + "'");
    write_trace_header(trace);

    const auto agents = m.community->agent_indices();
    std::vector<double> cost(agents.size(), 0.0);
    double loss_kwh = 0.0;
    double peak = 0.0;
    double vmin = 1e300;
    std::vector<double> actions(agents.size());
    while (!env.done()) {
        for (std::size_t p = 0; p < agents.size(); ++p) actions[p] = execute_policy(actors[p], states[p]);
        const StepResult step = env.step(actions);
        write_trace_rows(trace, *m.community, step);
        for (std::size_t p = 0; p < agents.size(); ++p) cost[p] -= step.market.reward[agents[p]];
        loss_kwh += step.market.total_loss_kw * m.community->dt_hours;
        peak = std::max(peak, step.market.peak_loading_fraction);
        vmin = std::min(vmin, step.market.min_voltage_pu);
        states = step.transition.next_states;
    }
    if (!m.community->network) vmin = 1.0;

    ordered_json summary;
    ordered_json per_agent = ordered_json::object();
    for (std::size_t p = 0; p < ids.size(); ++p) per_agent[ids[p]] = cost[p];
    summary["total_cost_per_agent"] = per_agent;
    summary["total_network_loss"] = loss_kwh;
    summary["peak_line_loading_fraction"] = peak;
    summary["min_voltage_pu"] = vmin;
    summary["dnt_enabled"] = m.community->dnt_enabled;
    summary["slots"] = m.eval_slots;

    fs::path summary_path = a.summary.value_or(fs::path(a.out).replace_extension(".summary.json"));
    std::ofstream s(summary_path);
    if (!s) throw ValidationError("cannot write '" + summary_path.string() + "'");
    s << summary.dump(2) << '\n';
    log.info("evaluation trace {} summary {}", a.out.string(), summary_path.string());
    out << summary.dump(2) << '\n';
    return kExitOk;
}

struct PriceArgs {
    double sdr = 0.0;
    PriceBounds bounds;
};

int cmd_price(const PriceArgs& a, std::ostream& out) {
    a.bounds.validate();
    if (!(a.sdr >= 0.0)) throw ValidationError("SDR must be non-negative");
    const SlotPrices p = compute_prices(std::min(a.sdr, kSdrCap), a.bounds);
    out << fmt6(p.sell) << ' ' << fmt6(p.buy) << '\n';
    return kExitOk;
}

// `bus,injection_kw` rows; buses left out inject nothing.
std::vector<double> read_injections(const fs::path& path, std::size_t buses) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open injections file '" + path.string() + "'");
    std::vector<double> inj(buses, 0.0);
    std::vector<bool> seen(buses, false);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "bus,injection_kw") throw ParseError("injections header must be 'bus,injection_kw'", line_no);
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("expected two fields", line_no);
        std::size_t used_a = 0, used_b = 0;
        int bus = 0;
        double value = 0.0;
        try {
            const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
            bus = std::stoi(a, &used_a);
            value = std::stod(b, &used_b);
            if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw ParseError("malformed injection row '" + line + "'", line_no);
        }
        if (bus < 0 || static_cast<std::size_t>(bus) >= buses) throw ParseError("unknown bus", line_no);
        if (seen[bus]) throw ParseError("duplicate bus", line_no);
        if (!std::isfinite(value)) throw ParseError("non-finite injection", line_no);
        seen[bus] = true;
        inj[bus] = value;
    }
    if (!header) throw ParseError("injections file is empty");
    return inj;
}

struct DntArgs {
    fs::path network, injections;
    double price = 0.0;
};

int cmd_dnt(const DntArgs& a, std::ostream& out) {
    const RadialNetwork net = parse_network(a.network);
    const NetSnapshot snap = make_snapshot(net, read_injections(a.injections, net.num_buses()), a.price);
    const DlmpResult r = compute_dlmp(net, snap);
    out << "bus,dlmp,dnt,voltage\n";
    char buf[160];
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f\n", i, r.dlmp[i], r.dnt[i], r.flow.voltage_pu[i]);
        out << buf;
    }
    return kExitOk;
}

struct OracleArgs {
    fs::path manifest, out;
    DpGrid grid;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
    Manifest m = load(a.manifest, false);
    m.community->dnt_enabled = m.community->network ? false : m.community->dnt_enabled;
    const SingleAgentProblem problem = single_agent_problem(*m.community, m.eval_start, m.eval_slots);
    const DpSolution dp = solve_dp(problem, a.grid);
    const BatterySpec& spec = problem.battery;

    Environment env(m.community);
    env.reset(m.eval_start, m.eval_slots);
    std::ofstream trace(a.out);
    if (!trace) throw ValidationError("cannot write '" + a.out.string() + "'");
    write_trace_header(trace);
    const std::size_t agent = m.community->agent_indices().front();
    double replay_cost = 0.0;
    for (double b : dp.action_kw) {
        const double action = normalize_action(b, spec);
        const StepResult step = env.step(std::span<const double>(&action, 1));
        write_trace_rows(trace, *m.community, step);
        replay_cost -= step.market.reward[agent];
    }
    ordered_json j;
    j["dp_cost"] = dp.cost;
    j["replay_cost"] = replay_cost;
    j["max_snap_error"] = dp.max_snap_error;
    out << j.dump(2) << '\n';
    return kExitOk;
}

int classify(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const InfeasibleError*>(&e) ||
        dynamic_cast<const TrainingDiverged*>(&e) || dynamic_cast<const FeasibilityError*>(&e)) {
        return kExitNumeric;
    }
    if (dynamic_cast<const Error*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kExitConfig;
    return kExitNumeric;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto log = make_logger(err);
    CLI::App app{"Peer-to-peer energy trading with network tariffs"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train one actor-critic pair per battery owner");
    train_cmd->add_option("--manifest", train_args.manifest, "Scenario manifest")->required();
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();
    train_cmd->add_option("--episodes", train_args.episodes, "Override the episode count")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_args.seed, "Override the manifest seed");
    train_cmd->add_flag("--no-dnt", train_args.no_dnt, "Disable network tariffs");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Run trained actors over the evaluation window");
    eval_cmd->add_option("--manifest", eval_args.manifest, "Scenario manifest")->required();
    eval_cmd->add_option("--checkpoints", eval_args.checkpoints, "Training output directory or checkpoint file")
        ->required();
    eval_cmd->add_option("--out", eval_args.out, "Trace CSV")->required();
    eval_cmd->add_option("--summary", eval_args.summary, "Summary JSON (default: <out>.summary.json)");
    eval_cmd->add_flag("--no-dnt", eval_args.no_dnt, "Disable network tariffs");

    PriceArgs price_args;
    auto* price_cmd = app.add_subcommand("price", "Print the P2P selling and buying prices for an SDR");
    price_cmd->add_option("--sdr", price_args.sdr, "Supply-to-demand ratio")->required();
    price_cmd->add_option("--lambda-b", price_args.bounds.esp_import, "ESP import price");
    price_cmd->add_option("--lambda-s", price_args.bounds.esp_export, "ESP export price");
    price_cmd->add_option("--lambda", price_args.bounds.compensation, "Seller compensation");

    DntArgs dnt_args;
    auto* dnt_cmd = app.add_subcommand("dnt", "Print nodal prices and tariffs for one operating point");
    dnt_cmd->add_option("--network", dnt_args.network, "Network JSON")->required();
    dnt_cmd->add_option("--injections", dnt_args.injections, "CSV bus,injection_kw")->required();
    dnt_cmd->add_option("--price", dnt_args.price, "Wholesale price at the substation")->required();

    OracleArgs oracle_args;
    auto* oracle_cmd = app.add_subcommand("oracle", "Dynamic-programming schedule for a single battery owner");
    oracle_cmd->add_option("--manifest", oracle_args.manifest, "Single-agent manifest with exogenous prices")
        ->required();
    oracle_cmd->add_option("--out", oracle_args.out, "Trace CSV")->required();
    oracle_cmd->add_option("--soc-points", oracle_args.grid.soc_points, "SoC lattice size")->check(CLI::Range(2, 100000));
    oracle_cmd->add_option("--action-points", oracle_args.grid.action_points, "Action grid size")
        ->check(CLI::Range(2, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*train_cmd) return cmd_train(train_args, out, *log);
        if (*eval_cmd) return cmd_evaluate(eval_args, out, *log);
        if (*price_cmd) return cmd_price(price_args, out);
        if (*dnt_cmd) return cmd_dnt(dnt_args, out);
        if (*oracle_cmd) return cmd_oracle(oracle_args, out);
    } catch (const std::exception& e) {
        return classify(e, err);
    }
    return kExitConfig;
}

} // namespace gridtrade::cli
