#include "parkmon/energy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "parkmon/errors.hpp"
#include "parkmon/sensor_core.hpp"

namespace parkmon {

double avg_power_mw(PowerMode mode) {
    switch (mode) {
        case PowerMode::Sampling: return kSamplingPowerMw;
        case PowerMode::SamplingAndTransmission: return kSamplingAndTransmissionPowerMw;
        case PowerMode::PresenceDetection: return kPresenceDetectionPowerMw;
        case PowerMode::Application: return kApplicationPowerMw;
    }
    throw DomainError("unknown power mode " + std::to_string(static_cast<int>(mode)));
}

std::string_view to_string(PowerMode mode) {
    switch (mode) {
        case PowerMode::Sampling: return "sampling";
        case PowerMode::SamplingAndTransmission: return "sampling_and_transmission";
        case PowerMode::PresenceDetection: return "presence_detection";
        case PowerMode::Application: return "application";
    }
    throw DomainError("unknown power mode " + std::to_string(static_cast<int>(mode)));
}

std::optional<PowerMode> power_mode_from_string(std::string_view name) {
    for (PowerMode m : {PowerMode::Sampling, PowerMode::SamplingAndTransmission, PowerMode::PresenceDetection,
                        PowerMode::Application}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

double duty_cycle_power_mw(double uplinks_per_day) {
    if (!(uplinks_per_day >= 0.0)) throw DomainError("uplinks_per_day must be >= 0");
    return kSamplingPowerMw + uplinks_per_day * kUplinkIncrementalEnergyJ * 1000.0 / kSecondsPerDay;
}

double presence_check_energy_j() { return kPresenceDetectionPowerMw * kPresenceSensingS / 1000.0; }

void BatteryParams::validate() const {
    if (!(capacity_mAh > 0.0)) throw DomainError("battery capacity must be > 0");
    if (!(nominal_v > 0.0)) throw DomainError("nominal voltage must be > 0");
    if (!(cutoff_v > 0.0 && full_v > cutoff_v)) throw DomainError("need 0 < cutoff_v < full_v");
    if (!(recover_fraction >= 0.0 && recover_fraction < 1.0)) throw DomainError("recover_fraction must be in [0,1)");
}

BatteryState BatteryState::at_soc(const BatteryParams& p, double soc) {
    p.validate();
    if (!(soc >= 0.0 && soc <= 1.0)) throw DomainError("state of charge must be in [0,1]");
    BatteryState b;
    b.params = p;
    b.charge_j = soc * p.capacity_j();
    b.depleted = b.charge_j <= 0.0;
    return b;
}

void HarvestProfile::validate() const {
    if (!(net_surplus_rate_j_per_h >= 0.0) || !std::isfinite(net_surplus_rate_j_per_h))
        throw DomainError("net surplus rate must be >= 0");
    auto sorted = sun_intervals;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto [a, b] = sorted[i];
        if (!(a >= 0.0 && b <= kSecondsPerDay && a < b))
            throw DomainError("sun interval must satisfy 0 <= start < end <= 86400");
        if (i > 0 && sorted[i - 1].second > a) throw DomainError("sun intervals overlap");
    }
}

bool HarvestProfile::in_sun(double t_s) const {
    double tod = std::fmod(t_s, kSecondsPerDay);
    if (tod < 0.0) tod += kSecondsPerDay;
    for (const auto& [a, b] : sun_intervals) {
        if (tod >= a && tod < b) return true;
    }
    return false;
}

double HarvestProfile::sun_hours() const {
    double s = 0.0;
    for (const auto& [a, b] : sun_intervals) s += b - a;
    return s / 3600.0;
}

HarvestProfile HarvestProfile::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("harvest profile: ") + e.what());
    }
    HarvestProfile p;
    try {
        if (j.contains("sun_intervals")) {
            for (const auto& iv : j.at("sun_intervals")) {
                if (!iv.is_array() || iv.size() != 2) throw DomainError("sun interval must be [start_s, end_s]");
                p.sun_intervals.emplace_back(iv[0].get<double>(), iv[1].get<double>());
            }
        }
        if (j.contains("net_rate_j_per_h")) p.net_surplus_rate_j_per_h = j.at("net_rate_j_per_h").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("harvest profile: ") + e.what());
    }
    p.validate();
    return p;
}

HarvestProfile HarvestProfile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open harvest profile " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string HarvestProfile::to_json() const {
    nlohmann::json j;
    j["sun_intervals"] = nlohmann::json::array();
    for (const auto& [a, b] : sun_intervals) j["sun_intervals"].push_back({a, b});
    j["net_rate_j_per_h"] = net_surplus_rate_j_per_h;
    return j.dump();
}

double battery_runtime_days(double capacity_mAh, double nominal_v, double avg_power_mw) {
    if (!(capacity_mAh > 0.0)) throw DomainError("capacity must be > 0");
    if (!(nominal_v > 0.0)) throw DomainError("nominal voltage must be > 0");
    if (!(avg_power_mw > 0.0)) throw DomainError("average power must be > 0");
    const double energy_j = capacity_mAh * 3.6 * nominal_v;
    return energy_j / (avg_power_mw / 1000.0) / kSecondsPerDay;
}

namespace {

EnergyFlow apply(BatteryState& b, double consumed, double harvested) {
    EnergyFlow f;
    f.consumed_j = consumed;
    f.harvested_j = harvested;
    const double cap = b.params.capacity_j();
    const double raw = b.charge_j - consumed + harvested;
    if (raw > cap) {
        f.spilled_j = raw - cap;
        b.charge_j = cap;
    } else if (raw < 0.0) {
        f.unmet_j = -raw;
        b.charge_j = 0.0;
    } else {
        b.charge_j = raw;
    }
    if (b.charge_j <= 0.0) {
        b.depleted = true;
    } else if (b.depleted && b.charge_j > b.params.recover_fraction * cap) {
        b.depleted = false;
    }
    return f;
}

}  // namespace

EnergyFlow step_energy_in_place(BatteryState& b, double load_mw, double dt_s, bool harvesting,
                                const HarvestProfile& profile) {
    if (!(dt_s > 0.0)) throw DomainError("dt_s must be > 0");
    if (!(load_mw >= 0.0)) throw DomainError("load must be >= 0");
    const double consumed = load_mw * dt_s / 1000.0;
    const double harvested = harvesting ? profile.net_surplus_rate_j_per_h * dt_s / 3600.0 + consumed : 0.0;
    return apply(b, consumed, harvested);
}

BatteryState step_energy(BatteryState b, double load_mw, double dt_s, bool harvesting,
                         const HarvestProfile& profile) {
    step_energy_in_place(b, load_mw, dt_s, harvesting, profile);
    return b;
}

EnergyFlow draw_energy_in_place(BatteryState& b, double energy_j, bool harvesting) {
    if (!(energy_j >= 0.0)) throw DomainError("energy draw must be >= 0");
    return apply(b, energy_j, harvesting ? energy_j : 0.0);
}

double daily_balance_j(const HarvestProfile& profile, double load_mw) {
    if (!(load_mw >= 0.0)) throw DomainError("load must be >= 0");
    const double sun_h = profile.sun_hours();
    return sun_h * profile.net_surplus_rate_j_per_h - (24.0 - sun_h) * load_mw * 3.6;
}

double voltage_of_charge(const BatteryState& b) {
    const double cap = b.params.capacity_j();
    const double frac = std::clamp(b.charge_j / cap, 0.0, 1.0);
    return b.params.cutoff_v + (b.params.full_v - b.params.cutoff_v) * frac;
}

double session_energy_j(std::span<const ModeSpan> schedule) {
    double total = 0.0;
    for (const auto& [mode, seconds] : schedule) {
        if (!(seconds >= 0.0)) throw DomainError("mode duration must be >= 0");
        total += avg_power_mw(mode) * seconds / 1000.0;
    }
    return total;
}

}  // namespace parkmon
