#include "gridtrade/manifest.hpp"

#include "gridtrade/errors.hpp"
#include "gridtrade/profiles.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

namespace gridtrade {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
        if (!keys.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

// A series is resolved in two passes: sized sources first, then constants
// that stretch to the horizon.
struct SeriesRef {
    TimeSeries series;
    bool constant = false;
    double constant_value = 0.0;
};

class SeriesLoader {
public:
    SeriesLoader(std::filesystem::path base, Timestamp start) : base_(std::move(base)), start_(start) {}

    SeriesRef load(const json& spec, SeriesKind kind, const std::string& where) const {
        SeriesRef out;
        if (spec.is_number()) {
            out.constant = true;
            out.constant_value = spec.get<double>();
            return out;
        }
        if (!spec.is_object()) throw ValidationError(where + ": series must be an object or a number");
        if (spec.contains("csv")) {
            reject_unknown(spec, {"csv"}, where);
            out.series = load_profile_csv(base_ / spec.at("csv").get<std::string>(), kind);
        } else if (spec.contains("synth")) {
            reject_unknown(spec, {"synth", "seed", "days", "scale"}, where);
            const std::string what = spec.at("synth").get<std::string>();
            if (what != "load" && what != "solar") throw ValidationError(where + ": synth must be 'load' or 'solar'");
            SynthOptions opts;
            opts.start = start_;
            opts.scale = spec.value("scale", 1.0);
            out.series = synthesize_profiles(spec.value("seed", std::uint64_t{0}), spec.value("days", 1),
                                             what == "load" ? ProfileKind::load : ProfileKind::solar, opts);
        } else if (spec.contains("values")) {
            reject_unknown(spec, {"values"}, where);
            out.series.start = start_;
            out.series.values = spec.at("values").get<std::vector<double>>();
            out.series.validate(kind);
        } else if (spec.contains("constant")) {
            reject_unknown(spec, {"constant"}, where);
            out.constant = true;
            out.constant_value = spec.at("constant").get<double>();
        } else {
            throw ValidationError(where + ": series needs one of csv, synth, values, constant");
        }
        if (out.constant && kind == SeriesKind::power && out.constant_value < 0.0) {
            throw ValidationError(where + ": negative power");
        }
        return out;
    }

private:
    std::filesystem::path base_;
    Timestamp start_;
};

std::vector<double> resolve(const SeriesRef& ref, std::size_t horizon) {
    if (ref.constant) return std::vector<double>(horizon, ref.constant_value);
    return std::vector<double>(ref.series.values.begin(),
                               ref.series.values.begin() + static_cast<std::ptrdiff_t>(horizon));
}

Hyperparams hyperparams_from_json(const json& t) {
    reject_unknown(t,
                   {"episodes", "batch_size", "gamma", "actor_lr", "critic_lr", "tau", "hidden_width", "hidden_layers",
                    "buffer_capacity", "ou_theta", "ou_sigma", "ou_sigma_final", "episode_slots", "episode_mode",
                    "reward_scale"},
                   "training");
    Hyperparams hp;
    hp.episodes = t.value("episodes", hp.episodes);
    hp.batch_size = t.value("batch_size", hp.batch_size);
    hp.gamma = t.value("gamma", hp.gamma);
    hp.actor_lr = t.value("actor_lr", hp.actor_lr);
    hp.critic_lr = t.value("critic_lr", hp.critic_lr);
    hp.tau = t.value("tau", hp.tau);
    hp.hidden_width = t.value("hidden_width", hp.hidden_width);
    hp.hidden_layers = t.value("hidden_layers", hp.hidden_layers);
    hp.buffer_capacity = t.value("buffer_capacity", hp.buffer_capacity);
    hp.ou_theta = t.value("ou_theta", hp.ou_theta);
    hp.ou_sigma = t.value("ou_sigma", hp.ou_sigma);
    hp.ou_sigma_final = t.value("ou_sigma_final", hp.ou_sigma_final);
    hp.episode_slots = t.value("episode_slots", hp.episode_slots);
    hp.reward_scale = t.value("reward_scale", hp.reward_scale);
    const std::string mode = t.value("episode_mode", std::string("sequential"));
    if (mode == "sequential") {
        hp.episode_mode = EpisodeMode::sequential;
    } else if (mode == "random") {
        hp.episode_mode = EpisodeMode::random;
    } else {
        throw ValidationError("episode_mode must be 'sequential' or 'random'");
    }
    hp.validate();
    return hp;
}

} // namespace

BatterySpec battery_from_json(const json& b) {
    reject_unknown(b,
                   {"capacity_kwh", "soc_min", "soc_max", "b_min_kw", "b_max_kw", "round_trip_efficiency", "price",
                    "life_cycles", "depth_of_discharge", "initial_soc"},
                   "battery");
    BatterySpec s;
    s.capacity_kwh = b.value("capacity_kwh", s.capacity_kwh);
    s.soc_min = b.value("soc_min", s.soc_min);
    s.soc_max = b.value("soc_max", s.soc_max);
    s.b_min_kw = b.value("b_min_kw", s.b_min_kw);
    s.b_max_kw = b.value("b_max_kw", s.b_max_kw);
    s.round_trip_efficiency = b.value("round_trip_efficiency", s.round_trip_efficiency);
    s.price_per_kwh = b.value("price", s.price_per_kwh);
    s.life_cycles = b.value("life_cycles", s.life_cycles);
    s.depth_of_discharge = b.value("depth_of_discharge", s.depth_of_discharge);
    s.initial_soc = b.value("initial_soc", s.initial_soc);
    s.validate();
    return s;
}

std::vector<std::string> Manifest::agent_ids() const {
    std::vector<std::string> out;
    for (std::size_t i : community->agent_indices()) out.push_back(community->participants[i].id);
    return out;
}

Manifest manifest_from_json(const json& doc, const std::filesystem::path& base_dir) {
    try {
        reject_unknown(doc,
                       {"schema", "name", "description", "seed", "start", "network", "dnt_enabled", "pricing",
                        "wholesale", "participants", "evaluation", "training"},
                       "manifest");
        if (doc.value("schema", 0) != 1) throw ParseError("manifest must declare \"schema\": 1");

        Manifest m;
        m.community = std::make_shared<Community>();
        Community& c = *m.community;
        m.seed = doc.value("seed", std::uint64_t{0});
        c.dnt_enabled = doc.value("dnt_enabled", true);

        // A start given in the manifest anchors synthetic and inline series;
        // otherwise the first CSV found decides.
        Timestamp start = SynthOptions{}.start;
        if (doc.contains("start")) start = parse_timestamp(doc.at("start").get<std::string>());

        if (!doc.contains("participants") || !doc.at("participants").is_array() || doc.at("participants").empty()) {
            throw ValidationError("manifest needs a non-empty participants array");
        }

        SeriesLoader loader(base_dir, start);
        std::vector<SeriesRef> refs; // loads, pvs, wholesale, buy, sell in that order
        std::set<std::string> ids;
        for (const json& p : doc.at("participants")) {
            reject_unknown(p, {"id", "bus", "load", "pv", "battery"}, "participant");
            Participant part;
            part.id = p.at("id").get<std::string>();
            if (part.id.empty() || !ids.insert(part.id).second) {
                throw ValidationError("participant ids must be unique and non-empty");
            }
            part.bus = p.value("bus", 1);
            if (p.contains("battery") && !p.at("battery").is_null()) part.battery = battery_from_json(p.at("battery"));
            refs.push_back(loader.load(p.at("load"), SeriesKind::power, part.id + ".load"));
            refs.push_back(p.contains("pv") ? loader.load(p.at("pv"), SeriesKind::power, part.id + ".pv")
                                            : loader.load(json(0.0), SeriesKind::power, part.id + ".pv"));
            c.participants.push_back(std::move(part));
        }
        const bool has_wholesale = doc.contains("wholesale");
        refs.push_back(has_wholesale ? loader.load(doc.at("wholesale"), SeriesKind::price, "wholesale")
                                     : loader.load(json(0.0), SeriesKind::price, "wholesale"));

        const json pricing = doc.value("pricing", json::object());
        reject_unknown(pricing, {"mode", "lambda_b", "lambda_s", "lambda", "buy", "sell"}, "pricing");
        c.pricing.bounds.esp_import = pricing.value("lambda_b", c.pricing.bounds.esp_import);
        c.pricing.bounds.esp_export = pricing.value("lambda_s", c.pricing.bounds.esp_export);
        c.pricing.bounds.compensation = pricing.value("lambda", c.pricing.bounds.compensation);
        const std::string mode = pricing.value("mode", std::string("sdr"));
        if (mode == "exogenous") {
            c.pricing.mode = PricingMode::exogenous;
            refs.push_back(loader.load(pricing.at("buy"), SeriesKind::price, "pricing.buy"));
            refs.push_back(loader.load(pricing.at("sell"), SeriesKind::price, "pricing.sell"));
        } else if (mode != "sdr") {
            throw ValidationError("pricing mode must be 'sdr' or 'exogenous'");
        }

        std::optional<Timestamp> anchor;
        std::size_t horizon = std::numeric_limits<std::size_t>::max();
        for (const SeriesRef& r : refs) {
            if (r.constant) continue;
            if (anchor && *anchor != r.series.start) throw AlignmentError("series start times differ");
            if (r.series.step_minutes != 30) throw AlignmentError("series must use 30-minute slots");
            anchor = r.series.start;
            horizon = std::min(horizon, r.series.size());
        }
        if (!anchor) throw ValidationError("at least one series must set the horizon (csv, synth or values)");
        if (horizon == 0) throw ValidationError("empty horizon");

        std::size_t k = 0;
        for (Participant& part : c.participants) {
            part.load_kw = resolve(refs[k++], horizon);
            part.pv_kw = resolve(refs[k++], horizon);
        }
        c.wholesale = resolve(refs[k++], horizon);
        if (c.pricing.mode == PricingMode::exogenous) {
            c.pricing.buy = resolve(refs[k++], horizon);
            c.pricing.sell = resolve(refs[k++], horizon);
        }

        if (doc.contains("network") && !doc.at("network").is_null()) {
            m.network_path = base_dir / doc.at("network").get<std::string>();
            c.network = std::make_shared<const RadialNetwork>(parse_network(*m.network_path));
            if (!has_wholesale) throw ValidationError("a network requires a wholesale price series");
        }
        c.validate();
        if (c.agent_indices().empty()) throw ValidationError("no participant has a battery");

        const json eval = doc.value("evaluation", json::object());
        reject_unknown(eval, {"start_slot", "slots"}, "evaluation");
        m.eval_start = eval.value("start_slot", std::size_t{0});
        m.eval_slots = eval.value("slots", horizon - std::min(m.eval_start, horizon));
        if (m.eval_start >= horizon || m.eval_slots == 0 || m.eval_start + m.eval_slots > horizon) {
            throw ValidationError("evaluation window lies outside the horizon");
        }

        m.hyperparams = hyperparams_from_json(doc.value("training", json::object()));
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path.string() + "': " + e.what());
    }
    Manifest m = manifest_from_json(doc, path.parent_path());
    m.source = path;
    return m;
}

} // namespace gridtrade
