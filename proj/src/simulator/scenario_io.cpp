#include <algorithm>
#include <cstdio>
#include <initializer_list>
#include <string_view>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "parkmon/errors.hpp"
#include "parkmon/simulator.hpp"

namespace parkmon {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte_pos) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min(byte_pos > 0 ? byte_pos - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// A misspelt key would otherwise be ignored and the default used in silence.
void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, const std::string& where,
                         std::vector<std::string>& v) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            v.push_back(where + "." + it.key() + ": unknown key");
    }
}

// Reads optional fields, recording type mismatches instead of stopping.
class FieldReader {
public:
    explicit FieldReader(std::vector<std::string>& violations) : v_(violations) {}

    template <class T>
    void get(const json& j, const char* key, T& out, const std::string& where) {
        if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            v_.push_back(where + "." + key + ": wrong type");
        }
    }

    void fail(const std::string& msg) { v_.push_back(msg); }
    void unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
        reject_unknown_keys(j, known, where, v_);
    }

private:
    std::vector<std::string>& v_;
};

std::optional<std::uint32_t> parse_device_id(const std::string& s) {
    if (s.size() != 8) return std::nullopt;
    std::uint32_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
        else return std::nullopt;
    }
    return v;
}

SessionPlan read_plan(const json& j, const std::string& where, FieldReader& rd) {
    SessionPlan p;
    if (!j.is_object()) {
        rd.fail(where + ": must be an object");
        return p;
    }
    rd.unknown(j, {"start_t", "spans", "location"}, where);
    rd.get(j, "start_t", p.start_t, where);
    if (j.contains("spans")) {
        const auto& spans = j.at("spans");
        if (!spans.is_array()) {
            rd.fail(where + ".spans: must be an array");
        } else {
            for (const auto& sp : spans) {
                if (!sp.is_array() || sp.size() != 2 || !sp[0].is_number() || !sp[1].is_number()) {
                    rd.fail(where + ".spans: each span must be [offset_s, len_s]");
                    continue;
                }
                p.active_spans.push_back({sp[0].get<double>(), sp[1].get<double>()});
            }
        }
    }
    std::string loc = "elsewhere";
    rd.get(j, "location", loc, where);
    if (auto l = location_from_string(loc)) {
        p.location = *l;
    } else {
        rd.fail(where + ".location: expected 'at_bar' or 'elsewhere'");
    }
    return p;
}

void read_detector(const json& d, DetectorConfig& c, FieldReader& rd) {
    rd.unknown(d,
               {"sample_rate_hz", "window_len", "eval_period_s", "calm_timeout_s", "min_session_s", "threshold_factor",
                "baseline_alpha", "variance_floor", "full_scale_mg"},
               "detector");
    rd.get(d, "sample_rate_hz", c.sample_rate_hz, "detector");
    rd.get(d, "window_len", c.window_len, "detector");
    rd.get(d, "eval_period_s", c.eval_period_s, "detector");
    rd.get(d, "calm_timeout_s", c.calm_timeout_s, "detector");
    rd.get(d, "min_session_s", c.min_session_s, "detector");
    rd.get(d, "threshold_factor", c.threshold_factor, "detector");
    rd.get(d, "baseline_alpha", c.baseline_alpha, "detector");
    rd.get(d, "variance_floor", c.variance_floor, "detector");
    rd.get(d, "full_scale_mg", c.full_scale_mg, "detector");
}

nlohmann::ordered_json plan_to_json(const SessionPlan& p) {
    nlohmann::ordered_json spans = nlohmann::ordered_json::array();
    for (const auto& sp : p.active_spans) spans.push_back({sp.offset_s, sp.len_s});
    nlohmann::ordered_json j;
    j["start_t"] = p.start_t;
    j["spans"] = spans;
    j["location"] = std::string(to_string(p.location));
    return j;
}

}  // namespace

Scenario scenario_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw ScenarioParseError("scenario JSON syntax error at line " + std::to_string(line) + ", column " +
                                     std::to_string(col) + ": " + e.what(),
                                 line, col);
    }

    std::vector<std::string> v;
    FieldReader rd(v);
    Scenario s;
    if (!j.is_object()) throw ValidationError({"scenario must be a JSON object"});

    rd.unknown(j,
               {"days", "seed", "start_utc", "day_profiles", "harvest_profile", "channel", "detector", "vibration",
                "battery", "sensors"},
               "scenario");
    rd.get(j, "days", s.days, "scenario");
    rd.get(j, "seed", s.seed, "scenario");
    if (j.contains("start_utc")) {
        std::string ts;
        rd.get(j, "start_utc", ts, "scenario");
        if (auto t = parse_rfc3339(ts)) s.start_utc = *t;
        else v.push_back("scenario.start_utc: not an RFC 3339 timestamp");
    }

    if (j.contains("day_profiles")) {
        const auto& arr = j.at("day_profiles");
        if (!arr.is_array()) v.push_back("scenario.day_profiles: must be an array");
        else {
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string where = "day_profiles[" + std::to_string(i) + "]";
                DayProfile p;
                rd.unknown(arr[i], {"name", "hourly_rate", "mean_len_s", "sd_len_s", "at_bar_prob", "break_prob"}, where);
                rd.get(arr[i], "name", p.name, where);
                if (arr[i].contains("hourly_rate")) {
                    std::vector<double> rates;
                    rd.get(arr[i], "hourly_rate", rates, where);
                    if (rates.size() != 24) v.push_back(where + ".hourly_rate: needs 24 entries");
                    else std::copy(rates.begin(), rates.end(), p.hourly_rate.begin());
                }
                rd.get(arr[i], "mean_len_s", p.mean_len_s, where);
                rd.get(arr[i], "sd_len_s", p.sd_len_s, where);
                rd.get(arr[i], "at_bar_prob", p.at_bar_prob, where);
                rd.get(arr[i], "break_prob", p.break_prob, where);
                s.day_profiles.push_back(std::move(p));
            }
        }
    }

    if (j.contains("harvest_profile")) {
        const auto& h = j.at("harvest_profile");
        rd.unknown(h, {"sun_intervals", "net_rate_j_per_h"}, "harvest_profile");
        if (h.contains("sun_intervals")) {
            std::vector<std::pair<double, double>> iv;
            rd.get(h, "sun_intervals", iv, "harvest_profile");
            s.harvest.sun_intervals = iv;
        }
        rd.get(h, "net_rate_j_per_h", s.harvest.net_surplus_rate_j_per_h, "harvest_profile");
    }
    if (j.contains("channel")) {
        rd.unknown(j.at("channel"), {"loss_prob", "latency_s"}, "channel");
        rd.get(j.at("channel"), "loss_prob", s.channel.loss_prob, "channel");
        rd.get(j.at("channel"), "latency_s", s.channel.latency_s, "channel");
    }
    if (j.contains("detector")) read_detector(j.at("detector"), s.detector, rd);
    if (j.contains("vibration")) {
        const auto& d = j.at("vibration");
        rd.unknown(d, {"amplitude_mg", "tau_s", "freq_hz", "axis", "gravity_mg"}, "vibration");
        rd.get(d, "amplitude_mg", s.vibration.amplitude_mg, "vibration");
        rd.get(d, "tau_s", s.vibration.tau_s, "vibration");
        rd.get(d, "freq_hz", s.vibration.freq_hz, "vibration");
        rd.get(d, "axis", s.vibration.axis, "vibration");
        rd.get(d, "gravity_mg", s.vibration.gravity_mg, "vibration");
    }
    if (j.contains("battery")) {
        const auto& d = j.at("battery");
        rd.unknown(d, {"capacity_mah", "nominal_v", "cutoff_v", "full_v"}, "battery");
        rd.get(d, "capacity_mah", s.battery.capacity_mAh, "battery");
        rd.get(d, "nominal_v", s.battery.nominal_v, "battery");
        rd.get(d, "cutoff_v", s.battery.cutoff_v, "battery");
        rd.get(d, "full_v", s.battery.full_v, "battery");
    }

    if (!j.contains("sensors") || !j.at("sensors").is_array()) {
        v.push_back("scenario.sensors: required array");
    } else {
        const auto& arr = j.at("sensors");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = "sensors[" + std::to_string(i) + "]";
            const auto& sj = arr[i];
            SensorSpec spec;
            rd.unknown(sj, {"id", "name", "profiles", "quiet_std_mg", "initial_soc", "uplink_period_s", "sessions"}, where);
            std::string id;
            rd.get(sj, "id", id, where);
            if (auto parsed = parse_device_id(id)) spec.id = *parsed;
            else v.push_back(where + ".id: must be 8 hex characters");
            rd.get(sj, "name", spec.name, where);
            rd.get(sj, "profiles", spec.profile_cycle, where);
            rd.get(sj, "quiet_std_mg", spec.quiet_std_mg, where);
            rd.get(sj, "initial_soc", spec.initial_soc, where);
            if (sj.is_object() && sj.contains("uplink_period_s") && !sj.at("uplink_period_s").is_null()) {
                double period = 0.0;
                rd.get(sj, "uplink_period_s", period, where);
                spec.uplink_period_s = period;
            }
            if (sj.is_object() && sj.contains("sessions")) {
                const auto& ss = sj.at("sessions");
                if (!ss.is_array()) v.push_back(where + ".sessions: must be an array");
                else {
                    for (std::size_t k = 0; k < ss.size(); ++k) {
                        spec.sessions.push_back(read_plan(ss[k], where + ".sessions[" + std::to_string(k) + "]", rd));
                    }
                }
            }
            s.sensors.push_back(std::move(spec));
        }
    }

    if (!v.empty()) throw ValidationError(std::move(v));
    s.validate();
    return s;
}

DetectorConfig detector_config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw ScenarioParseError("detector config syntax error at line " + std::to_string(line) + ", column " +
                                     std::to_string(col) + ": " + e.what(),
                                 line, col);
    }
    std::vector<std::string> v;
    FieldReader rd(v);
    DetectorConfig c;
    if (!j.is_object()) throw ValidationError({"detector config must be a JSON object"});
    read_detector(j, c, rd);
    if (!v.empty()) throw ValidationError(std::move(v));
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ValidationError({std::string("detector: ") + e.what()});
    }
    return c;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"cannot open scenario file " + path});
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_json(ss.str());
}

std::string scenario_to_json(const Scenario& s) {
    nlohmann::ordered_json j;
    j["days"] = s.days;
    j["seed"] = s.seed;
    j["start_utc"] = format_rfc3339(s.start_utc);
    j["day_profiles"] = nlohmann::ordered_json::array();
    for (const auto& p : s.day_profiles) {
        nlohmann::ordered_json pj;
        pj["name"] = p.name;
        pj["hourly_rate"] = std::vector<double>(p.hourly_rate.begin(), p.hourly_rate.end());
        pj["mean_len_s"] = p.mean_len_s;
        pj["sd_len_s"] = p.sd_len_s;
        pj["at_bar_prob"] = p.at_bar_prob;
        pj["break_prob"] = p.break_prob;
        j["day_profiles"].push_back(pj);
    }
    j["harvest_profile"] = nlohmann::ordered_json::parse(s.harvest.to_json());
    j["channel"] = {{"loss_prob", s.channel.loss_prob}, {"latency_s", s.channel.latency_s}};
    nlohmann::ordered_json d;
    d["sample_rate_hz"] = s.detector.sample_rate_hz;
    d["window_len"] = s.detector.window_len;
    d["eval_period_s"] = s.detector.eval_period_s;
    d["calm_timeout_s"] = s.detector.calm_timeout_s;
    d["min_session_s"] = s.detector.min_session_s;
    d["threshold_factor"] = s.detector.threshold_factor;
    d["baseline_alpha"] = s.detector.baseline_alpha;
    d["variance_floor"] = s.detector.variance_floor;
    d["full_scale_mg"] = s.detector.full_scale_mg;
    j["detector"] = d;
    nlohmann::ordered_json vib;
    vib["amplitude_mg"] = s.vibration.amplitude_mg;
    vib["tau_s"] = s.vibration.tau_s;
    vib["freq_hz"] = s.vibration.freq_hz;
    vib["axis"] = s.vibration.axis;
    vib["gravity_mg"] = s.vibration.gravity_mg;
    j["vibration"] = vib;
    nlohmann::ordered_json bat;
    bat["capacity_mah"] = s.battery.capacity_mAh;
    bat["nominal_v"] = s.battery.nominal_v;
    bat["cutoff_v"] = s.battery.cutoff_v;
    bat["full_v"] = s.battery.full_v;
    j["battery"] = bat;
    j["sensors"] = nlohmann::ordered_json::array();
    for (const auto& sp : s.sensors) {
        nlohmann::ordered_json sj;
        sj["id"] = device_id_hex(sp.id);
        sj["name"] = sp.name;
        sj["profiles"] = sp.profile_cycle;
        sj["quiet_std_mg"] = sp.quiet_std_mg;
        sj["initial_soc"] = sp.initial_soc;
        sj["uplink_period_s"] = sp.uplink_period_s ? nlohmann::ordered_json(*sp.uplink_period_s) : nullptr;
        sj["sessions"] = nlohmann::ordered_json::array();
        for (const auto& p : sp.sessions) sj["sessions"].push_back(plan_to_json(p));
        j["sensors"].push_back(sj);
    }
    return j.dump(2);
}

Scenario default_week_scenario() {
    Scenario s;
    s.days = 7;
    s.seed = 2024;
    DayProfile weekday{"weekday",
                       {0, 0, 0, 0, 0, 0, 2, 4, 5, 5, 6, 10, 14, 12, 6, 6, 8, 14, 20, 22, 18, 12, 6, 2},
                       25.0, 10.0, 0.4, 0.3};
    DayProfile saturday{"saturday",
                        {0, 0, 0, 0, 0, 0, 0, 1, 2, 4, 5, 8, 10, 9, 5, 5, 6, 9, 13, 14, 11, 7, 3, 1},
                        25.0, 10.0, 0.4, 0.3};
    DayProfile sunday{"sunday",
                      {0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 4, 7, 9, 8, 5, 5, 6, 8, 12, 12, 9, 6, 2, 0},
                      25.0, 10.0, 0.4, 0.3};
    s.day_profiles = {weekday, saturday, sunday};
    const std::vector<std::string> week = {"weekday", "weekday", "weekday", "weekday",
                                           "weekday", "saturday", "sunday"};
    // 4.5 h of sun around midday.
    s.harvest.sun_intervals = {{36000.0, 52200.0}};
    s.channel.latency_s = 2.0;
    const double noise[3] = {2.0, 2.5, 3.0};
    const char* names[3] = {"park-north", "park-lake", "park-west"};
    for (std::uint32_t i = 0; i < 3; ++i) {
        SensorSpec sp;
        sp.id = 0x5a3e0001u + i;
        sp.name = names[i];
        sp.profile_cycle = week;
        sp.quiet_std_mg = noise[i];
        s.sensors.push_back(sp);
    }
    return s;
}

}  // namespace parkmon
