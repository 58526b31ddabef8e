#pragma once

// Lock-step (0.2 s tick) simulation of park sensor nodes: synthetic vibration
// traces from visitor schedules, the activity detector, battery and harvest
// accounting, and a lossy uplink channel delivering webhook envelopes.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "parkmon/energy_model.hpp"
#include "parkmon/sensor_core.hpp"
#include "parkmon/time.hpp"
#include "parkmon/uplink_codec.hpp"

namespace parkmon {

enum class Location { AtSensorBar, Elsewhere };

std::string_view to_string(Location loc);
std::optional<Location> location_from_string(std::string_view s);

struct ActiveSpan {
    double offset_s = 0.0;
    double len_s = 0.0;
};

// One visitor's planned exercise session; spans are separated by rest breaks
// shorter than the calm timeout, so the whole plan is one ground-truth session.
struct SessionPlan {
    double start_t = 0.0;
    std::vector<ActiveSpan> active_spans;
    Location location = Location::Elsewhere;

    double duration_s() const;  // first span start to last span end
    double end_t() const { return start_t + duration_s(); }
    std::size_t rep_count() const;
    // Violations appended with `where` as prefix.
    void collect_violations(const std::string& where, std::int64_t calm_timeout_s,
                            std::vector<std::string>& out) const;
};

struct DayProfile {
    std::string name;
    std::array<double, 24> hourly_rate{};  // expected sessions starting in each hour
    double mean_len_s = 25.0;
    double sd_len_s = 10.0;
    double at_bar_prob = 0.5;   // share of sessions on the instrumented bar
    double break_prob = 0.3;    // chance a session >= 30 s contains one rest break
};

struct ChannelModel {
    double loss_prob = 0.0;
    double latency_s = 0.0;
};

// Damped sinusoid added to one axis for every repetition.
struct VibrationModel {
    double amplitude_mg = 200.0;
    double tau_s = 0.4;
    double freq_hz = 1.3;
    int axis = 0;  // 0=x 1=y 2=z
    double gravity_mg = 1000.0;  // static offset on z

    double tail_s() const { return 8.0 * tau_s; }
};

// Repetition onsets, one per second inside each active span, in plan order.
std::vector<double> rep_onsets(const SessionPlan& plan);

// Generates the sample at tick k (t = k / rate). Ticks must be requested in
// increasing order; the noise stream is a pure function of the seed.
class VibrationSynth {
public:
    VibrationSynth(std::vector<double> onsets, double quiet_std_mg, std::uint64_t seed, VibrationModel model = {},
                   double sample_rate_hz = 5.0, double full_scale_mg = 2000.0);

    AccelSample sample(std::int64_t tick);

private:
    std::vector<double> onsets_;
    double quiet_std_;
    VibrationModel model_;
    double rate_;
    double full_scale_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_{0.0, 1.0};
    std::size_t lo_ = 0;  // first onset possibly still ringing
    std::size_t hi_ = 0;  // first onset not yet started
};

struct SynthOptions {
    double duration_s = 0.0;  // 0: plan end + 60 s
    VibrationModel vibration;
    double sample_rate_hz = 5.0;
    double full_scale_mg = 2000.0;
};

std::vector<AccelSample> synth_vibration(const SessionPlan& plan, double quiet_std_mg, std::uint64_t seed,
                                         const SynthOptions& opts = {});

// Poisson session counts per hour, truncated-normal lengths (>= 10 s).
std::vector<SessionPlan> schedule_day(const DayProfile& profile, std::uint64_t seed);

struct SensorSpec {
    std::uint32_t id = 0;
    std::string name;
    std::vector<std::string> profile_cycle;  // day d uses profile_cycle[d % size]
    double quiet_std_mg = 2.0;
    std::optional<double> uplink_period_s;   // fixed transmission slots; none = send on finalization
    double initial_soc = 0.75;
    std::vector<SessionPlan> sessions;       // explicit plans, in addition to scheduled ones
};

struct Scenario {
    std::vector<SensorSpec> sensors;
    std::vector<DayProfile> day_profiles;
    HarvestProfile harvest;
    ChannelModel channel;
    std::int64_t days = 1;
    std::uint64_t seed = 1;
    UtcTime start_utc = from_millis(1730678400000);  // 2024-11-04T00:00:00Z, a Monday
    DetectorConfig detector;
    VibrationModel vibration;
    BatteryParams battery;

    // Throws ValidationError carrying every violation.
    void validate() const;
    const DayProfile* find_profile(std::string_view name) const;
    double horizon_s() const;  // days plus a drain tail so late sessions finalize
};

class ScenarioParseError : public Error {
public:
    ScenarioParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what), line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// Syntax errors throw ScenarioParseError; schema and value problems are
// collected into one ValidationError.
Scenario scenario_from_json(std::string_view text);
Scenario load_scenario(const std::string& path);
DetectorConfig detector_config_from_json(std::string_view text);
std::string scenario_to_json(const Scenario& s);
Scenario default_week_scenario();

struct GroundTruthSession {
    std::uint32_t sensor_id = 0;
    double start_t = 0.0;
    double end_t = 0.0;
    double duration_s = 0.0;
    Location location = Location::Elsewhere;  // of the earliest merged plan
    std::size_t merged_from = 1;
    bool expected = true;  // long enough that the detector must report it
};

struct EmittedSession {
    SessionRecord record;
    std::optional<std::uint16_t> battery_mv;
    double tx_t = 0.0;
    bool delivered = false;
};

struct DeliveredUplink {
    std::uint32_t sensor_id = 0;
    SessionRecord record;
    std::optional<std::uint16_t> battery_mv;
    double tx_t = 0.0;
    double receive_t = 0.0;
    UplinkEnvelope envelope;
};

struct BatterySample {
    std::uint32_t sensor_id = 0;
    double t_s = 0.0;
    double charge_j = 0.0;
    double voltage_v = 0.0;
    bool depleted = false;
};

struct AccuracyRow {
    std::uint32_t sensor_id = 0;
    std::optional<std::size_t> truth_index;  // into SimReport::ground_truth
    std::optional<std::size_t> emitted_index;  // into SimReport::emitted
    std::optional<double> truth_start_t;
    std::optional<double> truth_duration_s;
    std::optional<std::int64_t> detected_duration_s;
    std::optional<double> error_s;
    std::optional<bool> presence_truth;
    std::optional<bool> presence_detected;
};

struct AccuracySummary {
    std::size_t expected = 0;
    std::size_t matched = 0;
    std::size_t missed = 0;
    std::size_t spurious = 0;
    double mean_abs_error_s = 0.0;
    double max_abs_error_s = 0.0;
    std::size_t presence_correct = 0;
};

struct EnergyLedger {
    std::uint32_t sensor_id = 0;
    double initial_j = 0.0;
    double harvested_j = 0.0;
    double consumed_j = 0.0;
    double spilled_j = 0.0;
    double unmet_j = 0.0;
    double final_j = 0.0;
    std::size_t uplinks = 0;
    std::size_t keepalives = 0;
    std::size_t presence_checks = 0;
    double depleted_s = 0.0;

    double residual_j() const { return final_j - (initial_j + harvested_j - consumed_j - spilled_j + unmet_j); }
};

struct HourlyBucket {
    UtcTime bucket_start;
    std::int64_t total_active_s = 0;
    std::int64_t session_count = 0;
    std::int64_t presence_count = 0;
};

struct SimReport {
    std::uint64_t seed = 0;
    UtcTime start_utc;
    double horizon_s = 0.0;
    std::vector<GroundTruthSession> ground_truth;
    std::vector<EmittedSession> emitted;
    std::vector<DeliveredUplink> delivered;
    std::vector<BatterySample> battery_trace;
    std::vector<AccuracyRow> accuracy;
    AccuracySummary summary;
    std::vector<EnergyLedger> ledgers;
    // Delivered sessions bucketed by (received_at - duration), the same
    // timestamping rule the ingestion service applies.
    std::map<std::string, std::vector<HourlyBucket>> delivered_hourly;  // device_id -> buckets
    std::vector<HourlyBucket> delivered_hourly_all;
};

SimReport run_sim(const Scenario& scenario);

std::string report_to_json(const SimReport& r);
// Writes report.json, ground_truth.csv, delivered.csv, battery_trace.csv,
// accuracy.csv and uplinks.jsonl (one webhook body per line).
void write_report(const SimReport& r, const std::string& out_dir);

}  // namespace parkmon
