#include "gridtrade/profiles.hpp"

#include "gridtrade/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace gridtrade {

namespace {

int read_digits(std::string_view text, std::size_t pos, std::size_t count) {
    if (pos + count > text.size()) {
        throw ParseError("timestamp too short: '" + std::string(text) + "'");
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + count, value);
    if (ec != std::errc{} || ptr != text.data() + pos + count) {
        throw ParseError("bad digits in timestamp: '" + std::string(text) + "'");
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, std::string_view allowed) {
    if (pos >= text.size() || allowed.find(text[pos]) == std::string_view::npos) {
        throw ParseError("unexpected character in timestamp: '" + std::string(text) + "'");
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

void TimeSeries::validate(SeriesKind kind) const {
    if (step_minutes <= 0) {
        throw ValidationError("step_minutes must be positive");
    }
    if (values.empty()) {
        throw ValidationError("time series is empty");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ValidationError("non-finite value at slot " + std::to_string(i));
        }
        if (kind == SeriesKind::power && values[i] < 0.0) {
            throw ValidationError("negative power value at slot " + std::to_string(i));
        }
    }
}

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    text = trim(text);
    const int y = read_digits(text, 0, 4);
    expect_char(text, 4, "-");
    const int mo = read_digits(text, 5, 2);
    expect_char(text, 7, "-");
    const int d = read_digits(text, 8, 2);
    expect_char(text, 10, "T ");
    const int hh = read_digits(text, 11, 2);
    expect_char(text, 13, ":");
    const int mm = read_digits(text, 14, 2);
    std::size_t pos = 16;
    int ss = 0;
    if (pos < text.size() && text[pos] == ':') {
        ss = read_digits(text, pos + 1, 2);
        pos += 3;
    }
    int offset_minutes = 0;
    if (pos < text.size()) {
        if (text[pos] == 'Z') {
            ++pos;
        } else if (text[pos] == '+' || text[pos] == '-') {
            const int sign = text[pos] == '+' ? 1 : -1;
            const int oh = read_digits(text, pos + 1, 2);
            expect_char(text, pos + 3, ":");
            const int om = read_digits(text, pos + 4, 2);
            offset_minutes = sign * (oh * 60 + om);
            pos += 6;
        }
    }
    if (pos != text.size()) {
        throw ParseError("trailing characters in timestamp: '" + std::string(text) + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
        throw ParseError("invalid calendar value in timestamp: '" + std::string(text) + "'");
    }
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

TimeSeries parse_profile_csv(std::istream& in, SeriesKind kind, int expected_step_minutes) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError("missing header row", 1);
    }
    ++line_no;
    if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) {
        line.erase(0, 3); // UTF-8 BOM
    }
    if (trim(line) != "timestamp,value") {
        throw ParseError("header must be 'timestamp,value'", line_no);
    }

    TimeSeries series;
    std::vector<Timestamp> stamps;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
            throw ParseError("expected two columns", line_no);
        }
        Timestamp ts;
        try {
            ts = parse_timestamp(row.substr(0, comma));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
        const std::string_view num = trim(row.substr(comma + 1));
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
        if (ec != std::errc{} || ptr != num.data() + num.size()) {
            throw ParseError("malformed value '" + std::string(num) + "'", line_no);
        }
        if (!stamps.empty() && ts <= stamps.back()) {
            throw SpacingError("timestamps not strictly increasing at line " + std::to_string(line_no));
        }
        stamps.push_back(ts);
        series.values.push_back(value);
    }
    if (stamps.empty()) {
        throw ValidationError("profile has no data rows");
    }
    series.start = stamps.front();
    series.step_minutes = expected_step_minutes > 0 ? expected_step_minutes : 30;
    if (stamps.size() >= 2) {
        const auto step = stamps[1] - stamps[0];
        if (step.count() % 60 != 0) {
            throw SpacingError("step is not a whole number of minutes");
        }
        if (expected_step_minutes > 0 && step != std::chrono::minutes(expected_step_minutes)) {
            throw SpacingError("expected " + std::to_string(expected_step_minutes) +
                               "-minute spacing, found " + std::to_string(step.count() / 60));
        }
        for (std::size_t i = 2; i < stamps.size(); ++i) {
            if (stamps[i] - stamps[i - 1] != step) {
                throw SpacingError("non-uniform spacing before data row " + std::to_string(i + 1));
            }
        }
        series.step_minutes = static_cast<int>(step.count() / 60);
    }
    series.validate(kind);
    return series;
}

TimeSeries load_profile_csv(const std::filesystem::path& path, SeriesKind kind,
                            int expected_step_minutes) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open profile '" + path.string() + "'");
    }
    return parse_profile_csv(in, kind, expected_step_minutes);
}

void write_profile_csv(std::ostream& out, const TimeSeries& series) {
    out << "timestamp,value\n";
    char buf[64];
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f", series.values[i]);
        out << format_timestamp(series.time_at(i)) << ',' << buf << '\n';
    }
}

void write_profile_csv(const std::filesystem::path& path, const TimeSeries& series) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write profile '" + path.string() + "'");
    }
    write_profile_csv(out, series);
}

TimeSeries synthesize_profiles(std::uint64_t seed, int days, ProfileKind kind,
                               const SynthOptions& options) {
    if (days < 1) {
        throw ValidationError("days must be >= 1");
    }
    if (options.step_minutes <= 0 || (24 * 60) % options.step_minutes != 0) {
        throw ValidationError("step_minutes must divide a day");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> clearness_dist(0.4, 1.0);

    const int slots_per_day = 24 * 60 / options.step_minutes;
    TimeSeries series;
    series.start = options.start;
    series.step_minutes = options.step_minutes;
    series.values.reserve(static_cast<std::size_t>(days) * slots_per_day);

    const double rise = options.daylight_start_hour;
    const double set = options.daylight_end_hour;
    for (int day = 0; day < days; ++day) {
        const double clearness = clearness_dist(rng);
        for (int s = 0; s < slots_per_day; ++s) {
            const double hour = s * options.step_minutes / 60.0;
            double value = 0.0;
            if (kind == ProfileKind::solar) {
                if (hour > rise && hour < set) {
                    const double shape = std::sin(std::numbers::pi * (hour - rise) / (set - rise));
                    value = options.scale * clearness * shape * shape * (1.0 + 0.05 * gauss(rng));
                    value = std::max(value, 0.0);
                }
            } else {
                const double morning = (hour - 7.5) / 1.2;
                const double evening = (hour - 18.5) / 1.8;
                const double shape = 0.35 + 0.55 * std::exp(-morning * morning) +
                                     1.1 * std::exp(-evening * evening);
                value = options.scale * shape + 0.08 * options.scale * gauss(rng);
                value = std::max(value, 0.05 * options.scale);
            }
            series.values.push_back(value);
        }
    }
    return series;
}

ScenarioData align(const ScenarioData& scenario) {
    if (scenario.esp_import_price < scenario.esp_export_price || scenario.esp_export_price < 0.0) {
        throw ValidationError("ESP prices must satisfy import >= export >= 0");
    }
    if (scenario.loads.size() != scenario.solar.size()) {
        throw AlignmentError("load and solar series counts differ");
    }
    std::vector<const TimeSeries*> all;
    all.push_back(&scenario.wholesale);
    for (const auto& s : scenario.loads) all.push_back(&s);
    for (const auto& s : scenario.solar) all.push_back(&s);

    std::size_t length = all.front()->size();
    for (const TimeSeries* s : all) {
        if (s->step_minutes != all.front()->step_minutes) {
            throw AlignmentError("series have different step sizes");
        }
        if (s->start != all.front()->start) {
            throw AlignmentError("series have different start timestamps");
        }
        length = std::min(length, s->size());
    }

    ScenarioData out = scenario;
    auto cut = [length](TimeSeries& s) { s.values.resize(length); };
    cut(out.wholesale);
    for (auto& s : out.loads) cut(s);
    for (auto& s : out.solar) cut(s);
    return out;
}

} // namespace gridtrade
