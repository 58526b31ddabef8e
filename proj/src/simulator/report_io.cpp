#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "parkmon/errors.hpp"
#include "parkmon/simulator.hpp"

namespace parkmon {

namespace {

using ojson = nlohmann::ordered_json;

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

template <class T>
ojson opt(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

ojson bucket_json(const HourlyBucket& b) {
    ojson j;
    j["bucket_start"] = format_rfc3339(b.bucket_start);
    j["total_active_s"] = b.total_active_s;
    j["session_count"] = b.session_count;
    j["presence_count"] = b.presence_count;
    return j;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

}  // namespace

std::string report_to_json(const SimReport& r) {
    ojson j;
    j["seed"] = r.seed;
    j["start_utc"] = format_rfc3339(r.start_utc);
    j["horizon_s"] = r.horizon_s;

    ojson sum;
    sum["expected_sessions"] = r.summary.expected;
    sum["matched"] = r.summary.matched;
    sum["missed"] = r.summary.missed;
    sum["spurious"] = r.summary.spurious;
    sum["mean_abs_error_s"] = r.summary.mean_abs_error_s;
    sum["max_abs_error_s"] = r.summary.max_abs_error_s;
    sum["presence_correct"] = r.summary.presence_correct;
    sum["emitted"] = r.emitted.size();
    sum["delivered"] = r.delivered.size();
    j["summary"] = sum;

    j["energy"] = ojson::array();
    for (const auto& l : r.ledgers) {
        ojson e;
        e["device_id"] = device_id_hex(l.sensor_id);
        e["initial_j"] = l.initial_j;
        e["harvested_j"] = l.harvested_j;
        e["consumed_j"] = l.consumed_j;
        e["spilled_j"] = l.spilled_j;
        e["unmet_j"] = l.unmet_j;
        e["final_j"] = l.final_j;
        e["residual_j"] = l.residual_j();
        e["uplinks"] = l.uplinks;
        e["keepalives"] = l.keepalives;
        e["presence_checks"] = l.presence_checks;
        e["depleted_s"] = l.depleted_s;
        j["energy"].push_back(e);
    }

    j["ground_truth"] = ojson::array();
    for (const auto& g : r.ground_truth) {
        ojson e;
        e["device_id"] = device_id_hex(g.sensor_id);
        e["start_t_s"] = g.start_t;
        e["end_t_s"] = g.end_t;
        e["duration_s"] = g.duration_s;
        e["location"] = std::string(to_string(g.location));
        e["merged_from"] = g.merged_from;
        e["expected"] = g.expected;
        j["ground_truth"].push_back(e);
    }

    j["delivered"] = ojson::array();
    for (const auto& d : r.delivered) {
        ojson e;
        e["device_id"] = d.envelope.device_id;
        e["received_at"] = format_rfc3339(d.envelope.received_at);
        e["end_t_s"] = d.record.end_t;
        e["duration_s"] = d.record.duration_s;
        e["presence"] = d.record.presence;
        e["break_count"] = d.record.break_count;
        e["battery_mv"] = opt(d.battery_mv);
        e["payload_b64"] = d.envelope.payload_b64;
        j["delivered"].push_back(e);
    }

    j["accuracy"] = ojson::array();
    for (const auto& a : r.accuracy) {
        ojson e;
        e["device_id"] = device_id_hex(a.sensor_id);
        e["truth_start_t_s"] = opt(a.truth_start_t);
        e["truth_duration_s"] = opt(a.truth_duration_s);
        e["detected_duration_s"] = opt(a.detected_duration_s);
        e["error_s"] = opt(a.error_s);
        e["presence_truth"] = opt(a.presence_truth);
        e["presence_detected"] = opt(a.presence_detected);
        j["accuracy"].push_back(e);
    }

    j["delivered_hourly"] = ojson::object();
    for (const auto& [id, buckets] : r.delivered_hourly) {
        ojson arr = ojson::array();
        for (const auto& b : buckets) arr.push_back(bucket_json(b));
        j["delivered_hourly"][id] = arr;
    }
    j["delivered_hourly_all"] = ojson::array();
    for (const auto& b : r.delivered_hourly_all) j["delivered_hourly_all"].push_back(bucket_json(b));

    j["battery_trace"] = ojson::array();
    for (const auto& b : r.battery_trace) {
        ojson e;
        e["device_id"] = device_id_hex(b.sensor_id);
        e["t_s"] = b.t_s;
        e["charge_j"] = b.charge_j;
        e["voltage_v"] = b.voltage_v;
        e["depleted"] = b.depleted;
        j["battery_trace"].push_back(e);
    }
    return j.dump(2);
}

void write_report(const SimReport& r, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());

    open_out(dir / "report.json") << report_to_json(r) << '\n';

    {
        auto out = open_out(dir / "ground_truth.csv");
        out << "device_id,start_t_s,end_t_s,duration_s,location,merged_from,expected\n";
        for (const auto& g : r.ground_truth) {
            out << device_id_hex(g.sensor_id) << ',' << fixed(g.start_t, 1) << ',' << fixed(g.end_t, 1) << ','
                << fixed(g.duration_s, 1) << ',' << to_string(g.location) << ',' << g.merged_from << ','
                << (g.expected ? 1 : 0) << '\n';
        }
    }
    {
        auto out = open_out(dir / "delivered.csv");
        out << "device_id,received_at,end_t_s,duration_s,presence,break_count,battery_mv,payload_b64\n";
        for (const auto& d : r.delivered) {
            out << d.envelope.device_id << ',' << format_rfc3339(d.envelope.received_at) << ',' << d.record.end_t
                << ',' << d.record.duration_s << ',' << (d.record.presence ? 1 : 0) << ',' << d.record.break_count
                << ',' << (d.battery_mv ? std::to_string(*d.battery_mv) : "") << ',' << d.envelope.payload_b64
                << '\n';
        }
    }
    {
        auto out = open_out(dir / "battery_trace.csv");
        out << "device_id,t_s,charge_j,voltage_v,depleted\n";
        for (const auto& b : r.battery_trace) {
            out << device_id_hex(b.sensor_id) << ',' << fixed(b.t_s, 0) << ',' << fixed(b.charge_j, 6) << ','
                << fixed(b.voltage_v, 6) << ',' << (b.depleted ? 1 : 0) << '\n';
        }
    }
    {
        auto out = open_out(dir / "accuracy.csv");
        out << "device_id,truth_start_t_s,truth_duration_s,detected_duration_s,error_s,presence_truth,"
               "presence_detected\n";
        auto cell = [](const auto& v, int digits) -> std::string {
            if (!v) return "";
            if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) return fixed(*v, digits);
            else if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, bool>) return *v ? "1" : "0";
            else return std::to_string(*v);
        };
        for (const auto& a : r.accuracy) {
            out << device_id_hex(a.sensor_id) << ',' << cell(a.truth_start_t, 1) << ',' << cell(a.truth_duration_s, 1)
                << ',' << cell(a.detected_duration_s, 0) << ',' << cell(a.error_s, 1) << ','
                << cell(a.presence_truth, 0) << ',' << cell(a.presence_detected, 0) << '\n';
        }
    }
    {
        auto out = open_out(dir / "uplinks.jsonl");
        for (const auto& d : r.delivered) out << envelope_to_json(d.envelope) << '\n';
    }
}

}  // namespace parkmon
