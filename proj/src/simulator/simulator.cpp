#include "parkmon/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "parkmon/errors.hpp"

namespace parkmon {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent streams per (sensor, day, purpose).
enum class Stream : std::uint64_t { Schedule = 1, Noise = 2, Channel = 3, Presence = 4 };

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t sensor, std::uint64_t day, Stream s) {
    return splitmix64(splitmix64(splitmix64(seed) ^ (sensor + 1)) ^ (day + 1) * 0x100000001b3ULL ^
                      static_cast<std::uint64_t>(s));
}

}  // namespace

std::string_view to_string(Location loc) {
    return loc == Location::AtSensorBar ? "at_bar" : "elsewhere";
}

std::optional<Location> location_from_string(std::string_view s) {
    if (s == "at_bar") return Location::AtSensorBar;
    if (s == "elsewhere") return Location::Elsewhere;
    return std::nullopt;
}

double SessionPlan::duration_s() const {
    if (active_spans.empty()) return 0.0;
    double end = 0.0;
    for (const auto& sp : active_spans) end = std::max(end, sp.offset_s + sp.len_s);
    return end - active_spans.front().offset_s;
}

std::size_t SessionPlan::rep_count() const { return rep_onsets(*this).size(); }

void SessionPlan::collect_violations(const std::string& where, std::int64_t calm_timeout_s,
                                     std::vector<std::string>& out) const {
    if (!(start_t >= 0.0)) out.push_back(where + ": start_t must be >= 0");
    if (active_spans.empty()) {
        out.push_back(where + ": needs at least one active span");
        return;
    }
    for (std::size_t i = 0; i < active_spans.size(); ++i) {
        const auto& sp = active_spans[i];
        if (!(sp.offset_s >= 0.0)) out.push_back(where + ": span " + std::to_string(i) + " offset must be >= 0");
        if (!(sp.len_s >= 1.0)) out.push_back(where + ": span " + std::to_string(i) + " must last >= 1 s");
        if (i > 0) {
            const auto& prev = active_spans[i - 1];
            const double gap = sp.offset_s - (prev.offset_s + prev.len_s);
            if (gap < 0.0) out.push_back(where + ": spans " + std::to_string(i - 1) + "/" + std::to_string(i) +
                                         " overlap or are unordered");
            if (gap >= static_cast<double>(calm_timeout_s))
                out.push_back(where + ": break before span " + std::to_string(i) + " reaches the calm timeout");
        }
    }
}

std::vector<double> rep_onsets(const SessionPlan& plan) {
    std::vector<double> out;
    for (const auto& sp : plan.active_spans) {
        for (double k = 0.0; k < sp.len_s; k += 1.0) out.push_back(plan.start_t + sp.offset_s + k);
    }
    return out;
}

VibrationSynth::VibrationSynth(std::vector<double> onsets, double quiet_std_mg, std::uint64_t seed,
                               VibrationModel model, double sample_rate_hz, double full_scale_mg)
    : onsets_(std::move(onsets)),
      quiet_std_(quiet_std_mg),
      model_(model),
      rate_(sample_rate_hz),
      full_scale_(full_scale_mg),
      rng_(seed) {
    std::sort(onsets_.begin(), onsets_.end());
}

AccelSample VibrationSynth::sample(std::int64_t tick) {
    AccelSample s;
    s.t = static_cast<double>(tick) / rate_;
    double axes[3] = {quiet_std_ * noise_(rng_), quiet_std_ * noise_(rng_),
                      model_.gravity_mg + quiet_std_ * noise_(rng_)};

    const double tail = model_.tail_s();
    while (hi_ < onsets_.size() && onsets_[hi_] <= s.t + 1e-9) ++hi_;
    while (lo_ < hi_ && onsets_[lo_] + tail <= s.t) ++lo_;
    double burst = 0.0;
    for (std::size_t i = lo_; i < hi_; ++i) {
        const double dt = s.t - onsets_[i];
        if (dt < 0.0 || dt >= tail) continue;
        burst += model_.amplitude_mg * std::exp(-dt / model_.tau_s) *
                 std::sin(2.0 * std::numbers::pi * model_.freq_hz * dt);
    }
    axes[std::clamp(model_.axis, 0, 2)] += burst;

    s.ax = std::clamp(axes[0], -full_scale_, full_scale_);
    s.ay = std::clamp(axes[1], -full_scale_, full_scale_);
    s.az = std::clamp(axes[2], -full_scale_, full_scale_);
    return s;
}

std::vector<AccelSample> synth_vibration(const SessionPlan& plan, double quiet_std_mg, std::uint64_t seed,
                                         const SynthOptions& opts) {
    if (!(quiet_std_mg > 0.0)) throw DomainError("quiet_std_mg must be > 0");
    const double duration = opts.duration_s > 0.0 ? opts.duration_s : plan.end_t() + 60.0;
    VibrationSynth synth(rep_onsets(plan), quiet_std_mg, seed, opts.vibration, opts.sample_rate_hz,
                         opts.full_scale_mg);
    const auto ticks = static_cast<std::int64_t>(std::llround(duration * opts.sample_rate_hz));
    std::vector<AccelSample> out;
    out.reserve(static_cast<std::size_t>(ticks));
    for (std::int64_t k = 0; k < ticks; ++k) out.push_back(synth.sample(k));
    return out;
}

std::vector<SessionPlan> schedule_day(const DayProfile& profile, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> len_dist(profile.mean_len_s, profile.sd_len_s);
    std::uniform_int_distribution<int> tick_in_hour(0, 3600 * 5 - 1);
    std::bernoulli_distribution at_bar(std::clamp(profile.at_bar_prob, 0.0, 1.0));
    std::bernoulli_distribution has_break(std::clamp(profile.break_prob, 0.0, 1.0));

    std::vector<SessionPlan> out;
    for (int h = 0; h < 24; ++h) {
        const double rate = profile.hourly_rate[static_cast<std::size_t>(h)];
        if (!(rate > 0.0)) continue;
        std::poisson_distribution<int> count_dist(rate);
        const int n = count_dist(rng);
        for (int i = 0; i < n; ++i) {
            SessionPlan p;
            p.start_t = h * 3600.0 + tick_in_hour(rng) / 5.0;
            double len = 0.0;
            for (int tries = 0; tries < 1000 && len < 10.0; ++tries) len = std::round(len_dist(rng));
            len = std::max(len, 10.0);
            p.location = at_bar(rng) ? Location::AtSensorBar : Location::Elsewhere;
            if (len >= 30.0 && has_break(rng)) {
                // One rest break inside the session, both sides at least 5 s.
                std::uniform_int_distribution<int> brk_dist(5, std::min(25, static_cast<int>(len) - 10));
                const int brk = brk_dist(rng);
                std::uniform_int_distribution<int> first_dist(5, static_cast<int>(len) - brk - 5);
                const int first = first_dist(rng);
                p.active_spans = {{0.0, static_cast<double>(first)},
                                  {static_cast<double>(first + brk), len - first - brk}};
            } else {
                p.active_spans = {{0.0, len}};
            }
            out.push_back(std::move(p));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SessionPlan& a, const SessionPlan& b) { return a.start_t < b.start_t; });
    return out;
}

const DayProfile* Scenario::find_profile(std::string_view name) const {
    for (const auto& p : day_profiles) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

double Scenario::horizon_s() const {
    double max_period = 0.0;
    for (const auto& s : sensors) max_period = std::max(max_period, s.uplink_period_s.value_or(0.0));
    double explicit_end = 0.0;
    for (const auto& s : sensors) {
        for (const auto& p : s.sessions) explicit_end = std::max(explicit_end, p.end_t());
    }
    // Scheduled sessions may start late on the last day and run past midnight.
    double end = std::max(static_cast<double>(days) * kSecondsPerDay + 3600.0, explicit_end);
    const double drain = static_cast<double>(detector.calm_timeout_s) + max_period + channel.latency_s + 60.0;
    return std::ceil((end + drain) / 60.0) * 60.0;
}

void Scenario::validate() const {
    std::vector<std::string> v;
    if (days < 1) v.push_back("days must be >= 1");
    if (sensors.empty()) v.push_back("at least one sensor is required");
    try {
        detector.validate();
    } catch (const ConfigError& e) {
        v.push_back(std::string("detector: ") + e.what());
    }
    try {
        harvest.validate();
    } catch (const DomainError& e) {
        v.push_back(std::string("harvest_profile: ") + e.what());
    }
    try {
        battery.validate();
    } catch (const DomainError& e) {
        v.push_back(std::string("battery: ") + e.what());
    }
    if (!(channel.loss_prob >= 0.0 && channel.loss_prob <= 1.0)) v.push_back("channel.loss_prob must be in [0,1]");
    if (!(channel.latency_s >= 0.0)) v.push_back("channel.latency_s must be >= 0");
    if (!(vibration.amplitude_mg >= 0.0)) v.push_back("vibration.amplitude_mg must be >= 0");
    if (!(vibration.tau_s > 0.0)) v.push_back("vibration.tau_s must be > 0");
    if (!(vibration.freq_hz > 0.0)) v.push_back("vibration.freq_hz must be > 0");
    if (vibration.axis < 0 || vibration.axis > 2) v.push_back("vibration.axis must be 0, 1 or 2");

    for (std::size_t i = 0; i < day_profiles.size(); ++i) {
        const auto& p = day_profiles[i];
        const std::string where = "day_profiles[" + std::to_string(i) + "]";
        if (p.name.empty()) v.push_back(where + ": name is required");
        for (std::size_t j = 0; j < i; ++j) {
            if (day_profiles[j].name == p.name) v.push_back(where + ": duplicate name '" + p.name + "'");
        }
        for (std::size_t h = 0; h < 24; ++h) {
            if (!(p.hourly_rate[h] >= 0.0) || !std::isfinite(p.hourly_rate[h]))
                v.push_back(where + ": hourly_rate[" + std::to_string(h) + "] must be >= 0");
        }
        if (!(p.mean_len_s > 0.0)) v.push_back(where + ": mean_len_s must be > 0");
        if (!(p.sd_len_s >= 0.0)) v.push_back(where + ": sd_len_s must be >= 0");
        if (!(p.at_bar_prob >= 0.0 && p.at_bar_prob <= 1.0)) v.push_back(where + ": at_bar_prob must be in [0,1]");
        if (!(p.break_prob >= 0.0 && p.break_prob <= 1.0)) v.push_back(where + ": break_prob must be in [0,1]");
    }

    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const auto& s = sensors[i];
        const std::string where = "sensors[" + std::to_string(i) + "]";
        for (std::size_t j = 0; j < i; ++j) {
            if (sensors[j].id == s.id) v.push_back(where + ": duplicate id " + device_id_hex(s.id));
        }
        for (const auto& name : s.profile_cycle) {
            if (!find_profile(name)) v.push_back(where + ": unknown day profile '" + name + "'");
        }
        if (!(s.quiet_std_mg > 0.0)) v.push_back(where + ": quiet_std_mg must be > 0");
        if (s.uplink_period_s && !(*s.uplink_period_s >= 1.0))
            v.push_back(where + ": uplink_period_s must be >= 1");
        if (!(s.initial_soc >= 0.0 && s.initial_soc <= 1.0)) v.push_back(where + ": initial_soc must be in [0,1]");
        for (std::size_t k = 0; k < s.sessions.size(); ++k) {
            s.sessions[k].collect_violations(where + ".sessions[" + std::to_string(k) + "]", detector.calm_timeout_s,
                                             v);
        }
    }
    if (!v.empty()) throw ValidationError(std::move(v));
}

namespace {

struct SensorRun {
    std::vector<GroundTruthSession> truth;
    std::vector<EmittedSession> emitted;
    std::vector<DeliveredUplink> delivered;
    std::vector<BatterySample> trace;
    EnergyLedger ledger;
    std::vector<Location> plan_locations;
};

void add_flow(EnergyLedger& l, const EnergyFlow& f) {
    l.harvested_j += f.harvested_j;
    l.consumed_j += f.consumed_j;
    l.spilled_j += f.spilled_j;
    l.unmet_j += f.unmet_j;
}

std::vector<GroundTruthSession> merge_truth(std::uint32_t sensor_id, std::vector<SessionPlan> plans,
                                            const DetectorConfig& cfg) {
    std::stable_sort(plans.begin(), plans.end(), [](const SessionPlan& a, const SessionPlan& b) {
        return a.start_t + a.active_spans.front().offset_s < b.start_t + b.active_spans.front().offset_s;
    });
    // The variance window lags real motion by about half its length, so gaps up
    // to calm timeout + that lag look continuous to the detector.
    const double merge_gap = static_cast<double>(cfg.calm_timeout_s) + 0.5 * static_cast<double>(cfg.window_len) * cfg.sample_period_s();
    std::vector<GroundTruthSession> out;
    for (const auto& p : plans) {
        const double start = p.start_t + p.active_spans.front().offset_s;
        const double end = p.end_t();
        if (!out.empty() && start - out.back().end_t < merge_gap) {
            auto& g = out.back();
            g.end_t = std::max(g.end_t, end);
            g.duration_s = g.end_t - g.start_t;
            ++g.merged_from;
            continue;
        }
        GroundTruthSession g;
        g.sensor_id = sensor_id;
        g.start_t = start;
        g.end_t = end;
        g.duration_s = end - start;
        g.location = p.location;
        out.push_back(g);
    }
    for (auto& g : out) g.expected = g.duration_s >= static_cast<double>(cfg.min_session_s);
    return out;
}

// ToF model: a person is in range if a plan on the instrumented bar is
// underway (allowing for the 2 s window lag); someone elsewhere in the park is
// seen at 2.5-5 m; nobody gives an invalid reading.
ToFReading tof_reading(const std::vector<SessionPlan>& plans, double now, std::mt19937_64& rng) {
    bool any = false;
    bool at_bar = false;
    for (const auto& p : plans) {
        const double start = p.start_t + p.active_spans.front().offset_s;
        if (start > now + 1.0) break;
        if (now >= start - 1.0 && now <= p.end_t() + 3.0) {
            any = true;
            at_bar = at_bar || p.location == Location::AtSensorBar;
        }
    }
    ToFReading r;
    if (at_bar) {
        r.valid = true;
        r.range_m = std::uniform_real_distribution<double>(0.4, 1.8)(rng);
    } else if (any) {
        r.valid = true;
        r.range_m = std::uniform_real_distribution<double>(2.5, 5.0)(rng);
    }
    return r;
}

SensorRun run_sensor(const Scenario& sc, std::size_t index) {
    const SensorSpec& spec = sc.sensors[index];
    const DetectorConfig& cfg = sc.detector;
    const double horizon = sc.horizon_s();
    SensorRun run;

    std::vector<SessionPlan> plans = spec.sessions;
    if (!spec.profile_cycle.empty()) {
        for (std::int64_t d = 0; d < sc.days; ++d) {
            const DayProfile* prof = sc.find_profile(spec.profile_cycle[static_cast<std::size_t>(d) %
                                                                        spec.profile_cycle.size()]);
            auto day = schedule_day(*prof, derive_seed(sc.seed, index, static_cast<std::uint64_t>(d), Stream::Schedule));
            for (auto& p : day) {
                p.start_t += static_cast<double>(d) * kSecondsPerDay;
                plans.push_back(std::move(p));
            }
        }
    }
    std::stable_sort(plans.begin(), plans.end(), [](const SessionPlan& a, const SessionPlan& b) {
        return a.start_t + a.active_spans.front().offset_s < b.start_t + b.active_spans.front().offset_s;
    });
    run.truth = merge_truth(spec.id, plans, cfg);

    std::vector<double> onsets;
    for (const auto& p : plans) {
        auto o = rep_onsets(p);
        onsets.insert(onsets.end(), o.begin(), o.end());
    }
    VibrationSynth synth(std::move(onsets), spec.quiet_std_mg, derive_seed(sc.seed, index, 0, Stream::Noise),
                         sc.vibration, cfg.sample_rate_hz, cfg.full_scale_mg);
    std::mt19937_64 channel_rng(derive_seed(sc.seed, index, 0, Stream::Channel));
    std::mt19937_64 tof_rng(derive_seed(sc.seed, index, 0, Stream::Presence));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ActivityDetector det(cfg, spec.id);
    BatteryState battery = BatteryState::at_soc(sc.battery, spec.initial_soc);
    run.ledger.sensor_id = spec.id;
    run.ledger.initial_j = battery.charge_j;

    std::vector<EmittedSession> pending;  // slot mode queue
    const std::string device_id = device_id_hex(spec.id);

    auto transmit = [&](EmittedSession e, double now) {
        add_flow(run.ledger, draw_energy_in_place(battery, kUplinkIncrementalEnergyJ, sc.harvest.in_sun(now)));
        ++run.ledger.uplinks;
        e.tx_t = now;
        e.delivered = !(unit(channel_rng) < sc.channel.loss_prob);
        // Link metrics are drawn whether or not the frame survives, so the
        // stream stays aligned across loss settings.
        const double rssi = std::round(-115.0 + 30.0 * unit(channel_rng));
        const double snr = std::round(2.0 * (-5.0 + 15.0 * unit(channel_rng))) / 2.0;
        if (e.delivered) {
            DeliveredUplink d;
            d.sensor_id = spec.id;
            d.record = e.record;
            d.battery_mv = e.battery_mv;
            d.tx_t = now;
            d.receive_t = now + sc.channel.latency_s;
            d.envelope.device_id = device_id;
            d.envelope.received_at =
                sc.start_utc + std::chrono::milliseconds{std::llround(d.receive_t * 1000.0)};
            const auto frame = encode_frame(e.record, e.battery_mv);
            d.envelope.payload_b64 = base64_encode(frame);
            d.envelope.rssi_dbm = rssi;
            d.envelope.snr_db = snr;
            run.delivered.push_back(std::move(d));
        }
        run.emitted.push_back(std::move(e));
    };

    const auto ticks_per_eval = static_cast<std::int64_t>(std::llround(cfg.sample_rate_hz)) * cfg.eval_period_s;
    const auto total_ticks = static_cast<std::int64_t>(std::llround(horizon * cfg.sample_rate_hz));
    const auto ticks_per_second = static_cast<std::int64_t>(std::llround(cfg.sample_rate_hz));
    bool operating = !battery.depleted;
    const auto slot = spec.uplink_period_s ? static_cast<std::int64_t>(std::llround(*spec.uplink_period_s)) : 0;

    for (std::int64_t k = 0; k <= total_ticks; ++k) {
        const AccelSample s = synth.sample(k);  // keep the noise stream aligned even while off
        if (operating) det.push_sample(s);
        if (k % ticks_per_second != 0) continue;
        const std::int64_t now = k / ticks_per_second;

        if (now > 0) {
            // Sampling load over the second that just ended.
            const bool sun = sc.harvest.in_sun(static_cast<double>(now) - 0.5);
            add_flow(run.ledger,
                     step_energy_in_place(battery, operating ? kSamplingPowerMw : 0.0, 1.0, sun, sc.harvest));
            if (!operating) run.ledger.depleted_s += 1.0;
        }

        if (operating && battery.depleted) {
            operating = false;
            det.reset();
        } else if (!operating && !battery.depleted) {
            operating = true;
            det.reset();
        }

        if (operating && k % ticks_per_eval == 0 && det.state().window.full()) {
            EvalOutcome out = det.evaluate_second(now);
            if (out.session_started) {
                det.presence_cascade(tof_reading(plans, static_cast<double>(now), tof_rng));
                add_flow(run.ledger, draw_energy_in_place(battery, presence_check_energy_j(),
                                                          sc.harvest.in_sun(static_cast<double>(now))));
                ++run.ledger.presence_checks;
            }
            if (out.emitted) {
                EmittedSession e;
                e.record = *out.emitted;
                e.battery_mv = static_cast<std::uint16_t>(std::lround(voltage_of_charge(battery) * 1000.0));
                if (slot > 0) {
                    pending.push_back(e);
                } else {
                    transmit(e, static_cast<double>(now));
                }
            }
        }

        if (slot > 0 && now > 0 && now % slot == 0 && operating) {
            if (pending.empty()) {
                add_flow(run.ledger,
                         draw_energy_in_place(battery, kUplinkIncrementalEnergyJ,
                                              sc.harvest.in_sun(static_cast<double>(now))));
                ++run.ledger.keepalives;
            } else {
                for (auto& e : pending) transmit(std::move(e), static_cast<double>(now));
                pending.clear();
            }
        }

        if (now % 60 == 0) {
            run.trace.push_back({spec.id, static_cast<double>(now), battery.charge_j, voltage_of_charge(battery),
                                 battery.depleted});
        }
    }
    run.ledger.final_j = battery.charge_j;
    return run;
}

void match_accuracy(SimReport& r, const DetectorConfig& cfg, std::size_t truth_begin, std::uint32_t sensor_id,
                    const std::vector<std::size_t>& emitted_for_sensor) {
    // Detected span reconstructed from the record: the session finalized
    // calm_timeout_s after its last active second.
    struct Span {
        double first;
        double last_end;
    };
    std::vector<Span> det;
    for (std::size_t idx : emitted_for_sensor) {
        const auto& rec = r.emitted[idx].record;
        const double last = static_cast<double>(rec.end_t - cfg.calm_timeout_s);
        det.push_back({last - static_cast<double>(rec.duration_s - cfg.eval_period_s),
                       last + static_cast<double>(cfg.eval_period_s)});
    }
    std::vector<bool> used(det.size(), false);
    const double slack = static_cast<double>(cfg.window_len) / cfg.sample_rate_hz + cfg.eval_period_s;

    for (std::size_t ti = truth_begin; ti < r.ground_truth.size(); ++ti) {
        const auto& g = r.ground_truth[ti];
        std::optional<std::size_t> hit;
        for (std::size_t j = 0; j < det.size(); ++j) {
            if (used[j]) continue;
            if (det[j].first <= g.end_t + slack && det[j].last_end >= g.start_t - slack) {
                hit = j;
                break;
            }
        }
        if (!hit && !g.expected) continue;
        AccuracyRow row;
        row.sensor_id = sensor_id;
        row.truth_index = ti;
        row.truth_start_t = g.start_t;
        row.truth_duration_s = g.duration_s;
        row.presence_truth = g.location == Location::AtSensorBar;
        if (hit) {
            used[*hit] = true;
            const auto& e = r.emitted[emitted_for_sensor[*hit]];
            row.emitted_index = emitted_for_sensor[*hit];
            row.detected_duration_s = e.record.duration_s;
            row.error_s = static_cast<double>(e.record.duration_s) - g.duration_s;
            row.presence_detected = e.record.presence;
        }
        r.accuracy.push_back(row);
    }
    for (std::size_t j = 0; j < det.size(); ++j) {
        if (used[j]) continue;
        const auto& e = r.emitted[emitted_for_sensor[j]];
        AccuracyRow row;
        row.sensor_id = sensor_id;
        row.emitted_index = emitted_for_sensor[j];
        row.detected_duration_s = e.record.duration_s;
        row.presence_detected = e.record.presence;
        r.accuracy.push_back(row);
    }
}

std::vector<HourlyBucket> empty_hours(UtcTime start, std::size_t n) {
    std::vector<HourlyBucket> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].bucket_start = start + std::chrono::hours{static_cast<long>(i)};
    return out;
}

void add_to_hour(std::vector<HourlyBucket>& buckets, UtcTime start, const DeliveredUplink& d) {
    const auto start_at = d.envelope.received_at - std::chrono::seconds{d.record.duration_s};
    const auto ms = (start_at - start).count();
    const auto idx = ms >= 0 ? static_cast<std::size_t>(ms / 3600000) : buckets.size();
    if (idx >= buckets.size()) return;
    buckets[idx].total_active_s += d.record.duration_s;
    buckets[idx].session_count += 1;
    buckets[idx].presence_count += d.record.presence ? 1 : 0;
}

}  // namespace

SimReport run_sim(const Scenario& sc) {
    sc.validate();
    SimReport r;
    r.seed = sc.seed;
    r.start_utc = sc.start_utc;
    r.horizon_s = sc.horizon_s();
    const auto hours = static_cast<std::size_t>(std::ceil(r.horizon_s / 3600.0));
    r.delivered_hourly_all = empty_hours(sc.start_utc, hours);

    for (std::size_t i = 0; i < sc.sensors.size(); ++i) {
        SensorRun run = run_sensor(sc, i);
        const std::size_t truth_begin = r.ground_truth.size();
        r.ground_truth.insert(r.ground_truth.end(), run.truth.begin(), run.truth.end());

        std::vector<std::size_t> emitted_idx;
        for (auto& e : run.emitted) {
            emitted_idx.push_back(r.emitted.size());
            r.emitted.push_back(std::move(e));
        }
        match_accuracy(r, sc.detector, truth_begin, sc.sensors[i].id, emitted_idx);

        auto& hourly = r.delivered_hourly[device_id_hex(sc.sensors[i].id)];
        hourly = empty_hours(sc.start_utc, hours);
        for (auto& d : run.delivered) {
            add_to_hour(hourly, sc.start_utc, d);
            add_to_hour(r.delivered_hourly_all, sc.start_utc, d);
            r.delivered.push_back(std::move(d));
        }
        r.battery_trace.insert(r.battery_trace.end(), run.trace.begin(), run.trace.end());
        r.ledgers.push_back(run.ledger);
    }

    std::stable_sort(r.delivered.begin(), r.delivered.end(), [](const DeliveredUplink& a, const DeliveredUplink& b) {
        return a.envelope.received_at < b.envelope.received_at;
    });

    double abs_sum = 0.0;
    for (const auto& g : r.ground_truth) r.summary.expected += g.expected ? 1 : 0;
    for (const auto& row : r.accuracy) {
        if (row.truth_index && row.emitted_index) {
            ++r.summary.matched;
            abs_sum += std::abs(*row.error_s);
            r.summary.max_abs_error_s = std::max(r.summary.max_abs_error_s, std::abs(*row.error_s));
            if (*row.presence_truth == *row.presence_detected) ++r.summary.presence_correct;
        } else if (row.truth_index) {
            ++r.summary.missed;
        } else {
            ++r.summary.spurious;
        }
    }
    if (r.summary.matched > 0) r.summary.mean_abs_error_s = abs_sum / static_cast<double>(r.summary.matched);
    return r;
}

}  // namespace parkmon
