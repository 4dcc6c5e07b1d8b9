#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gridtrade {

using Timestamp = std::chrono::sys_seconds;

enum class SeriesKind { power, price };

/// Uniformly sampled series. Power values are kW, price values are GBP/kWh.
struct TimeSeries {
    Timestamp start{};
    int step_minutes = 30;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double step_hours() const noexcept { return step_minutes / 60.0; }
    Timestamp time_at(std::size_t slot) const {
        return start + std::chrono::minutes(step_minutes) * static_cast<std::int64_t>(slot);
    }

    /// Throws ValidationError when the series breaks the invariants for `kind`.
    void validate(SeriesKind kind) const;

    bool operator==(const TimeSeries&) const = default;
};

/// Accepts `YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM|-HH:MM]` (a space may replace the
/// `T`). Offsets are folded into UTC.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

/// Reads a `timestamp,value` CSV. Every consecutive pair of rows must be
/// `expected_step_minutes` apart (pass 0 to accept whatever uniform step the
/// file uses). Errors: ParseError (with line), SpacingError, ValidationError.
TimeSeries load_profile_csv(const std::filesystem::path& path, SeriesKind kind,
                            int expected_step_minutes = 30);
TimeSeries parse_profile_csv(std::istream& in, SeriesKind kind, int expected_step_minutes = 30);

/// Values are written with 9 decimal places.
void write_profile_csv(std::ostream& out, const TimeSeries& series);
void write_profile_csv(const std::filesystem::path& path, const TimeSeries& series);

enum class ProfileKind { load, solar };

struct SynthOptions {
    Timestamp start = std::chrono::sys_days{std::chrono::year{2017} / 1 / 1};
    int step_minutes = 30;
    double scale = 1.0;              // solar: peak kW on a clear day; load: mean-ish kW
    double daylight_start_hour = 7.0;
    double daylight_end_hour = 17.0;
};

/// Deterministic synthetic profile.
///
/// Solar: `scale * clearness(day) * sin^2(pi * (h - start) / (end - start))`
/// inside the daylight window, zero outside; clearness is drawn once per day
/// from U(0.4, 1.0) and each daylight slot gets a multiplicative N(1, 0.05)
/// jitter (clamped at 0).
///
/// Load: `scale * (0.35 + 0.55 exp(-((h-7.5)/1.2)^2) + 1.1 exp(-((h-18.5)/1.8)^2))`
/// plus N(0, 0.08 * scale) noise, clamped at 0.05 * scale.
TimeSeries synthesize_profiles(std::uint64_t seed, int days, ProfileKind kind,
                               const SynthOptions& options = {});

/// Community-level inputs: one load and one solar series per participant, the
/// wholesale price seen at the substation, and the ESP tariffs.
struct ScenarioData {
    std::vector<TimeSeries> loads;
    std::vector<TimeSeries> solar;
    TimeSeries wholesale;
    double esp_import_price = 0.05;
    double esp_export_price = 0.03;

    std::size_t horizon() const noexcept { return wholesale.size(); }
};

/// Truncates every series to the shortest length. Throws AlignmentError when
/// starts or steps differ, ValidationError when the ESP prices are inconsistent.
ScenarioData align(const ScenarioData& scenario);

} // namespace gridtrade
