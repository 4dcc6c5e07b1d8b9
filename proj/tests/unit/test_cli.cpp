#include "gridtrade_cli/commands.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;
namespace fs = std::filesystem;
namespace cli = gridtrade::cli;

namespace {

const fs::path kSource = GRIDTRADE_SOURCE_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "gridtrade");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("gridtrade_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Copy of the toy manifest whose network has every impedance zeroed.
    fs::path zero_impedance_toy() {
        json net = json::parse(slurp(kSource / "networks" / "chain3.json"));
        for (auto& l : net["lines"]) {
            l["r_ohm"] = 0.0;
            l["x_ohm"] = 0.0;
        }
        std::ofstream(dir_ / "net0.json") << net.dump();
        json m = json::parse(slurp(kSource / "scenarios" / "toy.json"));
        m["network"] = "net0.json";
        std::ofstream(dir_ / "toy0.json") << m.dump();
        return dir_ / "toy0.json";
    }

    fs::path dir_;
};

const std::string kToy = (kSource / "scenarios" / "toy.json").string();

} // namespace

TEST_F(Cli, PriceExamples) {
    auto r = run({"price", "--sdr", "0.5", "--lambda-b", "0.05", "--lambda-s", "0.03", "--lambda", "0.01"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_EQ(r.out, "0.044444 0.047222\n");
    r = run({"price", "--sdr", "0"});
    EXPECT_EQ(r.out, "0.050000 0.050000\n");
    r = run({"price", "--sdr", "0.5", "--lambda", "0.05"});
    EXPECT_EQ(r.code, cli::kExitConfig);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, cli::kExitConfig);
    EXPECT_EQ(run({"price"}).code, cli::kExitConfig);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitConfig);
    EXPECT_EQ(run({"price", "--sdr", "abc"}).code, cli::kExitConfig);
    EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, DntGolden) {
    const auto r = run({"dnt", "--network", (kSource / "networks" / "feeder15.json").string(), "--injections",
                        (kSource / "tests" / "data" / "feeder15_injections.csv").string(), "--price", "0.05"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.out, slurp(kSource / "tests" / "data" / "feeder15_dnt_golden.csv"));
}

TEST_F(Cli, DntZeroImpedance) {
    zero_impedance_toy();
    std::ofstream(dir_ / "inj.csv") << "bus,injection_kw\n1,-3.0\n2,1.5\n";
    const auto r = run({"dnt", "--network", (dir_ / "net0.json").string(), "--injections", (dir_ / "inj.csv").string(),
                        "--price", "0.05"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string bus, dlmp, dnt;
        std::getline(cells, bus, ',');
        std::getline(cells, dlmp, ',');
        std::getline(cells, dnt, ',');
        EXPECT_EQ(dnt, "0.000000000") << line;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(Cli, DntMalformedInjections) {
    const std::string net = (kSource / "networks" / "chain3.json").string();
    const std::map<std::string, std::string> bad{{"header", "node,kw\n1,1\n"},
                                                 {"value", "bus,injection_kw\n1,lots\n"},
                                                 {"unknown", "bus,injection_kw\n9,1\n"},
                                                 {"duplicate", "bus,injection_kw\n1,1\n1,2\n"}};
    for (const auto& [name, text] : bad) {
        const fs::path p = dir_ / (name + ".csv");
        std::ofstream(p) << text;
        EXPECT_EQ(run({"dnt", "--network", net, "--injections", p.string(), "--price", "0.05"}).code, cli::kExitConfig)
            << name;
    }
    EXPECT_EQ(run({"dnt", "--network", net, "--injections", (dir_ / "absent.csv").string(), "--price", "0.05"}).code,
              cli::kExitConfig);
}

TEST_F(Cli, DntHardLimitIsNumericFailure) {
    json net = json::parse(slurp(kSource / "networks" / "chain3.json"));
    net["violation_price"] = 0.0;
    std::ofstream(dir_ / "hard.json") << net.dump();
    std::ofstream(dir_ / "inj.csv") << "bus,injection_kw\n2,-25\n";
    EXPECT_EQ(run({"dnt", "--network", (dir_ / "hard.json").string(), "--injections", (dir_ / "inj.csv").string(),
                   "--price", "0.05"})
                  .code,
              cli::kExitNumeric);
}

TEST_F(Cli, TrainToyWritesLogAndCheckpoint) {
    const auto out = dir_ / "run";
    const auto r = run({"train", "--manifest", kToy, "--out", out.string(), "--episodes", "10"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    std::ifstream log(out / "training_log.jsonl");
    std::map<std::string, int> per_agent;
    std::string line;
    while (std::getline(log, line)) {
        const json row = json::parse(line);
        ++per_agent[row.at("agent").get<std::string>()];
        EXPECT_TRUE(row.contains("episode"));
        EXPECT_TRUE(row.contains("mean_reward"));
        EXPECT_TRUE(row.contains("critic_loss"));
    }
    EXPECT_EQ(per_agent, (std::map<std::string, int>{{"A", 10}, {"B", 10}}));
    EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
}

TEST_F(Cli, TrainIsDeterministic) {
    const auto a = dir_ / "a", b = dir_ / "b";
    ASSERT_EQ(run({"train", "--manifest", kToy, "--out", a.string(), "--episodes", "4"}).code, 0);
    ASSERT_EQ(run({"train", "--manifest", kToy, "--out", b.string(), "--episodes", "4"}).code, 0);
    EXPECT_EQ(slurp(a / "training_log.jsonl"), slurp(b / "training_log.jsonl"));
    EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
    const auto c = dir_ / "c";
    ASSERT_EQ(run({"train", "--manifest", kToy, "--out", c.string(), "--episodes", "4", "--seed", "99"}).code, 0);
    EXPECT_NE(slurp(a / "checkpoint.json"), slurp(c / "checkpoint.json"));
}

TEST_F(Cli, TrainConfigErrors) {
    json m = json::parse(slurp(kSource / "scenarios" / "toy.json"));
    m["network"] = "missing_network.json";
    std::ofstream(dir_ / "m.json") << m.dump();
    EXPECT_EQ(run({"train", "--manifest", (dir_ / "m.json").string(), "--out", (dir_ / "o").string()}).code,
              cli::kExitConfig);
    EXPECT_EQ(run({"train", "--manifest", (dir_ / "none.json").string(), "--out", (dir_ / "o").string()}).code,
              cli::kExitConfig);
    EXPECT_EQ(run({"train", "--manifest", kToy, "--out", (dir_ / "o").string(), "--episodes", "0"}).code,
              cli::kExitConfig);
}

TEST_F(Cli, EvaluateIsRepeatableAndSummarized) {
    const auto run_dir = dir_ / "run";
    ASSERT_EQ(run({"train", "--manifest", kToy, "--out", run_dir.string(), "--episodes", "3"}).code, 0);
    const auto t1 = dir_ / "t1.csv", t2 = dir_ / "t2.csv";
    auto r = run({"evaluate", "--manifest", kToy, "--checkpoints", run_dir.string(), "--out", t1.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(run({"evaluate", "--manifest", kToy, "--checkpoints", run_dir.string(), "--out", t2.string()}).code, 0);
    EXPECT_EQ(slurp(t1), slurp(t2));
    EXPECT_EQ(slurp(fs::path(t1).replace_extension(".summary.json")), slurp(fs::path(t2).replace_extension(".summary.json")));
    const json s = json::parse(slurp(fs::path(t1).replace_extension(".summary.json")));
    for (const char* key :
         {"total_cost_per_agent", "total_network_loss", "peak_line_loading_fraction", "min_voltage_pu"}) {
        EXPECT_TRUE(s.contains(key)) << key;
    }
    EXPECT_EQ(s.at("total_cost_per_agent").size(), 2u);
    EXPECT_GT(s.at("total_network_loss").get<double>(), 0.0);
    // whole 48-slot day, two agents, plus the header
    const std::string trace = slurp(t1);
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 97);

    // tariffs off still yields a summary for the comparison
    const auto t3 = dir_ / "t3.csv";
    r = run({"evaluate", "--manifest", kToy, "--checkpoints", (run_dir / "checkpoint.json").string(), "--out",
             t3.string(), "--no-dnt", "--summary", (dir_ / "off.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(json::parse(slurp(dir_ / "off.json")).at("dnt_enabled").get<bool>());
}

TEST_F(Cli, EvaluateZeroImpedanceHasNoLoss) {
    const auto manifest = zero_impedance_toy().string();
    const auto run_dir = dir_ / "run";
    ASSERT_EQ(run({"train", "--manifest", manifest, "--out", run_dir.string(), "--episodes", "2"}).code, 0);
    const auto t = dir_ / "t.csv";
    ASSERT_EQ(run({"evaluate", "--manifest", manifest, "--checkpoints", run_dir.string(), "--out", t.string()}).code, 0);
    EXPECT_EQ(json::parse(slurp(fs::path(t).replace_extension(".summary.json"))).at("total_network_loss").get<double>(), 0.0);
}

TEST_F(Cli, EvaluateRejectsMismatchedCheckpoint) {
    const auto run_dir = dir_ / "run";
    ASSERT_EQ(run({"train", "--manifest", kToy, "--out", run_dir.string(), "--episodes", "1"}).code, 0);
    const std::string single = (kSource / "scenarios" / "single_agent.json").string();
    EXPECT_EQ(run({"evaluate", "--manifest", single, "--checkpoints", run_dir.string(), "--out",
                   (dir_ / "t.csv").string()})
                  .code,
              cli::kExitConfig);
    EXPECT_EQ(run({"evaluate", "--manifest", kToy, "--checkpoints", (dir_ / "nothing").string(), "--out",
                   (dir_ / "t.csv").string()})
                  .code,
              cli::kExitConfig);
}

TEST_F(Cli, OracleReportsMatchingCosts) {
    const auto r = run({"oracle", "--manifest", (kSource / "scenarios" / "single_agent.json").string(), "--out",
                        (dir_ / "dp.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j.at("dp_cost").get<double>(), j.at("replay_cost").get<double>(), 1e-9);
    EXPECT_TRUE(fs::exists(dir_ / "dp.csv"));
    EXPECT_EQ(run({"oracle", "--manifest", kToy, "--out", (dir_ / "dp2.csv").string()}).code, cli::kExitConfig);
}
