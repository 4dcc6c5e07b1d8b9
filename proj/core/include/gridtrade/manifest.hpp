#pragma once

#include "gridtrade/environment.hpp"
#include "gridtrade/maddpg.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridtrade {

/// A scenario file resolved into a ready-to-run community plus training and
/// evaluation settings. See docs/formats.md for the schema.
struct Manifest {
    std::filesystem::path source;
    std::shared_ptr<Community> community;
    std::optional<std::filesystem::path> network_path;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;
    std::size_t eval_start = 0;
    std::size_t eval_slots = 0; // resolved; never zero after loading

    std::vector<std::string> agent_ids() const;
};

/// Relative paths inside the document resolve against `base_dir`.
Manifest manifest_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

BatterySpec battery_from_json(const nlohmann::json& doc);

} // namespace gridtrade
