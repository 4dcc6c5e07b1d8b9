#include "gridtrade/errors.hpp"
#include "gridtrade/manifest.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>

using namespace gridtrade;
using nlohmann::json;

namespace {

const std::filesystem::path kSource = GRIDTRADE_SOURCE_DIR;
const std::filesystem::path kScenarios = kSource / "scenarios";

json minimal() {
    return json::parse(R"({
        "schema": 1,
        "participants": [
            {"id": "A", "load": {"values": [1.0, 2.0, 3.0]}, "battery": {}},
            {"id": "B", "load": {"constant": 0.5}, "pv": 0.25}
        ]
    })");
}

Manifest from(const json& doc) { return manifest_from_json(doc, kScenarios); }

} // namespace

TEST(Manifest, Minimal) {
    const auto m = from(minimal());
    const Community& c = *m.community;
    EXPECT_EQ(c.horizon(), 3u);
    EXPECT_EQ(m.agent_ids(), std::vector<std::string>{"A"});
    EXPECT_EQ(c.participants[1].load_kw, (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_EQ(c.participants[1].pv_kw, (std::vector<double>{0.25, 0.25, 0.25}));
    EXPECT_FALSE(c.network);
    EXPECT_EQ(m.eval_start, 0u);
    EXPECT_EQ(m.eval_slots, 3u);
    EXPECT_DOUBLE_EQ(m.hyperparams.gamma, 0.95);
    EXPECT_EQ(m.hyperparams.batch_size, 256);
    EXPECT_DOUBLE_EQ(c.participants[0].battery->capacity_kwh, 13.5);
}

TEST(Manifest, BundledScenariosLoad) {
    for (const char* name : {"toy.json", "community15.json", "single_agent.json"}) {
        SCOPED_TRACE(name);
        const auto m = load_manifest(kScenarios / name);
        EXPECT_GT(m.community->horizon(), 0u);
        EXPECT_NO_THROW(m.community->validate());
    }
    const auto m = load_manifest(kScenarios / "community15.json");
    EXPECT_EQ(m.community->participants.size(), 5u);
    EXPECT_EQ(m.agent_ids().size(), 3u);
    EXPECT_EQ(m.community->network->num_buses(), 15u);
    EXPECT_EQ(m.community->horizon(), 336u);
}

TEST(Manifest, UnknownKeysRejected) {
    auto doc = minimal();
    doc["extra"] = 1;
    EXPECT_THROW(from(doc), ValidationError);
    doc = minimal();
    doc["participants"][0]["battery"]["colour"] = "red";
    EXPECT_THROW(from(doc), ValidationError);
    doc = minimal();
    doc["training"] = {{"epochs", 3}};
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, SchemaRequired) {
    auto doc = minimal();
    doc.erase("schema");
    EXPECT_THROW(from(doc), ParseError);
}

TEST(Manifest, NeedsAnAgent) {
    auto doc = minimal();
    doc["participants"][0].erase("battery");
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, DuplicateIds) {
    auto doc = minimal();
    doc["participants"][1]["id"] = "A";
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, HorizonNeedsASeries) {
    auto doc = minimal();
    doc["participants"][0]["load"] = 1.0;
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, ShortestSeriesWins) {
    auto doc = minimal();
    doc["participants"][1]["load"] = {{"synth", "load"}, {"seed", 3}, {"days", 1}};
    const auto m = from(doc);
    EXPECT_EQ(m.community->horizon(), 3u);
}

TEST(Manifest, NegativePowerRejected) {
    auto doc = minimal();
    doc["participants"][0]["load"] = {{"values", {1.0, -2.0}}};
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, MissingNetworkFile) {
    auto doc = minimal();
    doc["network"] = "nowhere.json";
    doc["wholesale"] = 0.05;
    EXPECT_THROW(from(doc), ParseError);
}

TEST(Manifest, NetworkNeedsWholesale) {
    auto doc = minimal();
    doc["network"] = "../networks/chain3.json";
    EXPECT_THROW(from(doc), ValidationError);
    doc["wholesale"] = 0.05;
    EXPECT_NO_THROW(from(doc));
    doc["participants"][0]["bus"] = 9;
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, PricingModes) {
    auto doc = minimal();
    doc["pricing"] = {{"mode", "auction"}};
    EXPECT_THROW(from(doc), ValidationError);
    doc["pricing"] = {{"mode", "sdr"}, {"lambda", 0.05}};
    EXPECT_THROW(from(doc), ValidationError);
    doc["pricing"] = {{"mode", "exogenous"}, {"buy", 0.05}, {"sell", 0.03}};
    const auto m = from(doc);
    EXPECT_EQ(m.community->pricing.mode, PricingMode::exogenous);
    EXPECT_EQ(m.community->pricing.buy.size(), 3u);
    doc["pricing"] = {{"mode", "exogenous"}, {"buy", 0.02}, {"sell", 0.03}};
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, EvaluationWindow) {
    auto doc = minimal();
    doc["evaluation"] = {{"start_slot", 1}, {"slots", 2}};
    EXPECT_EQ(from(doc).eval_start, 1u);
    doc["evaluation"] = {{"start_slot", 2}, {"slots", 2}};
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, TrainingOverrides) {
    auto doc = minimal();
    doc["training"] = {{"episodes", 7}, {"gamma", 0.5}, {"episode_mode", "random"}, {"hidden_width", 8}};
    const auto m = from(doc);
    EXPECT_EQ(m.hyperparams.episodes, 7);
    EXPECT_DOUBLE_EQ(m.hyperparams.gamma, 0.5);
    EXPECT_EQ(m.hyperparams.hidden_width, 8);
    doc["training"] = {{"episode_mode", "shuffled"}};
    EXPECT_THROW(from(doc), ValidationError);
    doc["training"] = {{"gamma", 1.5}};
    EXPECT_THROW(from(doc), ValidationError);
}

TEST(Manifest, CsvSeriesAndAlignment) {
    const auto dir = std::filesystem::temp_directory_path() / "gridtrade_manifest_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "load.csv");
        f << "timestamp,value\n2017-01-01T00:00:00Z,1.0\n2017-01-01T00:30:00Z,1.5\n";
        std::ofstream g(dir / "late.csv");
        g << "timestamp,value\n2017-01-02T00:00:00Z,1.0\n2017-01-02T00:30:00Z,1.5\n";
        std::ofstream h(dir / "hourly.csv");
        h << "timestamp,value\n2017-01-01T00:00:00Z,1.0\n2017-01-01T01:00:00Z,1.5\n";
    }
    json doc = minimal();
    doc["participants"][0]["load"] = {{"csv", "load.csv"}};
    doc["participants"][1]["load"] = {{"csv", "load.csv"}};
    EXPECT_EQ(manifest_from_json(doc, dir).community->horizon(), 2u);
    doc["participants"][1]["load"] = {{"csv", "late.csv"}};
    EXPECT_THROW(manifest_from_json(doc, dir), AlignmentError);
    doc["participants"][1]["load"] = {{"csv", "hourly.csv"}};
    EXPECT_THROW(manifest_from_json(doc, dir), SpacingError);
    std::filesystem::remove_all(dir);
}

TEST(Manifest, BadJsonIsParseError) {
    const auto path = std::filesystem::temp_directory_path() / "gridtrade_bad_manifest.json";
    {
        std::ofstream f(path);
        f << "{ \"schema\": 1, ";
    }
    EXPECT_THROW(load_manifest(path), ParseError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_manifest(kScenarios / "missing.json"), ParseError);
}
