#include <gtest/gtest.h>

#include <random>

#include "parkmon/energy_model.hpp"
#include "parkmon/errors.hpp"

using namespace parkmon;

namespace {

HarvestProfile sun_for(double hours, double rate = 28.7) {
    HarvestProfile p;
    if (hours > 0) p.sun_intervals = {{36000.0, 36000.0 + hours * 3600.0}};
    p.net_surplus_rate_j_per_h = rate;
    return p;
}

}  // namespace

TEST(PowerModes, TableValues) {
    EXPECT_DOUBLE_EQ(avg_power_mw(PowerMode::Sampling), 0.712);
    EXPECT_DOUBLE_EQ(avg_power_mw(PowerMode::SamplingAndTransmission), 4.194);
    EXPECT_DOUBLE_EQ(avg_power_mw(PowerMode::PresenceDetection), 6.951);
    EXPECT_DOUBLE_EQ(avg_power_mw(PowerMode::Application), 1.147);
    EXPECT_THROW(avg_power_mw(static_cast<PowerMode>(9)), DomainError);
}

TEST(PowerModes, NamesRoundTrip) {
    for (auto m : {PowerMode::Sampling, PowerMode::SamplingAndTransmission, PowerMode::PresenceDetection,
                   PowerMode::Application})
        EXPECT_EQ(power_mode_from_string(to_string(m)), m);
    EXPECT_FALSE(power_mode_from_string("turbo"));
}

TEST(PowerModes, DutyCycleReproducesApplicationMode) {
    // 180 uplinks a day at one minute of transmit-mode excess each.
    EXPECT_NEAR(duty_cycle_power_mw(180), 1.147, 5e-4);
    EXPECT_NEAR(duty_cycle_power_mw(144), 0.712 + 144 * 3.482 * 60 / 86400.0, 1e-12);
    EXPECT_DOUBLE_EQ(duty_cycle_power_mw(0), 0.712);
    EXPECT_THROW(duty_cycle_power_mw(-1), DomainError);
}

TEST(Runtime, TableFigure) { EXPECT_NEAR(battery_runtime_days(330, 3.9, 1.147), 46.75, 0.05); }

TEST(Runtime, SamplingOnly) { EXPECT_NEAR(battery_runtime_days(330, 3.9, 0.712), 75.32, 0.005); }

TEST(Runtime, DegenerateInputs) {
    EXPECT_THROW(battery_runtime_days(0, 3.9, 1.147), DomainError);
    EXPECT_THROW(battery_runtime_days(330, 3.9, 0), DomainError);
    EXPECT_THROW(battery_runtime_days(330, -1, 1.0), DomainError);
}

TEST(Runtime, Homogeneous) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 1000.0);
    for (int i = 0; i < 1000; ++i) {
        const double c = u(rng), v = u(rng) / 100, p = u(rng) / 100;
        const double d = battery_runtime_days(c, v, p);
        EXPECT_NEAR(battery_runtime_days(2 * c, v, p), 2 * d, 1e-9 * d);
        EXPECT_NEAR(battery_runtime_days(c, v, 2 * p), d / 2, 1e-9 * d);
    }
}

TEST(StepEnergy, HourInSunGainsNetRateWhateverTheLoad) {
    for (double load : {0.0, 1.147, 6.951}) {
        auto b = BatteryState::at_soc({}, 0.5);
        const double c0 = b.charge_j;
        b = step_energy(b, load, 3600, true, sun_for(4.5));
        EXPECT_NEAR(b.charge_j - c0, 28.7, 1e-9);
    }
}

TEST(StepEnergy, HourDarkAtApplicationPower) {
    auto b = BatteryState::at_soc({}, 0.5);
    const double c0 = b.charge_j;
    b = step_energy(b, 1.147, 3600, false, sun_for(4.5));
    EXPECT_NEAR(b.charge_j - c0, -4.1292, 1e-9);
}

TEST(StepEnergy, ZeroStepIsPreconditionError) {
    auto b = BatteryState::at_soc({}, 0.5);
    EXPECT_THROW(step_energy(b, 1.0, 0.0, false, {}), DomainError);
    EXPECT_THROW(step_energy(b, 1.0, -1.0, false, {}), DomainError);
}

TEST(StepEnergy, ClampsAndFlagsDepletionWithHysteresis) {
    auto b = BatteryState::at_soc({}, 1e-6);
    auto f = step_energy_in_place(b, 1.147, 3600, false, {});
    EXPECT_EQ(b.charge_j, 0.0);
    EXPECT_TRUE(b.depleted);
    EXPECT_GT(f.unmet_j, 0.0);
    const double cap = b.params.capacity_j();
    // Recharge to just under 5%: still flagged.
    while (b.charge_j + 28.7 <= 0.05 * cap) step_energy_in_place(b, 1.0, 3600, true, sun_for(1));
    EXPECT_TRUE(b.depleted);
    step_energy_in_place(b, 1.0, 3600, true, sun_for(1));
    step_energy_in_place(b, 1.0, 3600, true, sun_for(1));
    EXPECT_FALSE(b.depleted);

    auto full = BatteryState::at_soc({}, 1.0);
    f = step_energy_in_place(full, 1.0, 3600, true, sun_for(1));
    EXPECT_DOUBLE_EQ(full.charge_j, cap);
    EXPECT_NEAR(f.spilled_j, 28.7, 1e-9);
}

TEST(StepEnergy, ConservationOverRandomHorizon) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> load(0.3, 7.0), dt(0.2, 120.0);
    std::bernoulli_distribution sun(0.3);
    const auto prof = sun_for(4.5);
    auto b = BatteryState::at_soc({}, 0.5);
    const double c0 = b.charge_j;
    double h = 0, c = 0, s = 0, u = 0;
    for (int i = 0; i < 200000; ++i) {
        auto f = step_energy_in_place(b, load(rng), dt(rng), sun(rng), prof);
        h += f.harvested_j;
        c += f.consumed_j;
        s += f.spilled_j;
        u += f.unmet_j;
        if (i % 1000 == 0) draw_energy_in_place(b, 0.2, false);
        if (i % 1000 == 0) c += 0.2;
    }
    EXPECT_NEAR(b.charge_j, c0 + h - c - s + u, 1e-6);
    EXPECT_GE(b.charge_j, 0.0);
    EXPECT_LE(b.charge_j, b.params.capacity_j());
}

TEST(DailyBalance, DerivedFieldLoadIsSolvedThenVerified) {
    // Solve 4.5 h * 28.7 J/h - 19.5 h * 3600 s * P = 9.9 J for P.
    const double p_mw = (4.5 * 28.7 - 9.9) / (19.5 * 3600.0) * 1000.0;
    EXPECT_NEAR(p_mw, 1.699, 5e-4);
    EXPECT_NEAR(p_mw, kBalanceImpliedFieldPowerMw, 5e-4);
    EXPECT_NEAR(daily_balance_j(sun_for(4.5), kBalanceImpliedFieldPowerMw), 9.9, 0.5);
}

TEST(DailyBalance, NoSunAndAllSun) {
    EXPECT_NEAR(daily_balance_j(sun_for(0), 1.147), -99.1, 0.05);
    HarvestProfile all;
    all.sun_intervals = {{0.0, 86400.0}};
    EXPECT_NEAR(daily_balance_j(all, 1.147), 688.8, 1e-9);
}

TEST(DailyBalance, MatchesIntegratedDay) {
    const auto prof = sun_for(4.5);
    auto b = BatteryState::at_soc({}, 0.5);
    const double c0 = b.charge_j;
    for (int t = 0; t < 86400; ++t) step_energy_in_place(b, 1.699, 1.0, prof.in_sun(t), prof);
    EXPECT_NEAR(b.charge_j - c0, daily_balance_j(prof, 1.699), 1e-6);
}

TEST(FiveDayRun, FieldModeLoadStaysWithinTwoPercent) {
    // 13.5 h of sun over 5 days; the 10-minute uplink node draws 1.0602 mW.
    const double load = duty_cycle_power_mw(144);
    const double start = BatteryState::at_soc({}, 0.75).charge_j;
    const double delta = 13.5 * 28.7 - (120.0 - 13.5) * 3.6 * load;
    EXPECT_LT(std::abs(delta) / start, 0.02);
}

TEST(FiveDayRun, BalanceImpliedLoadDrainsBeyondTwoPercent) {
    // Recorded as a known conflict: the 1.699 mW load that reproduces the
    // 9.9 J daily surplus at 4.5 h of sun cannot also hold the 5-day,
    // 13.5 h-sun run level; it loses about 264 J.
    const double start = BatteryState::at_soc({}, 0.75).charge_j;
    const double delta = 13.5 * 28.7 - (120.0 - 13.5) * 3.6 * kBalanceImpliedFieldPowerMw;
    EXPECT_NEAR(delta, -263.95, 0.01);
    EXPECT_GT(std::abs(delta) / start, 0.07);
}

TEST(Voltage, EndpointsAndMidpoint) {
    BatteryParams p;
    EXPECT_DOUBLE_EQ(voltage_of_charge(BatteryState::at_soc(p, 0.0)), 3.0);
    EXPECT_DOUBLE_EQ(voltage_of_charge(BatteryState::at_soc(p, 1.0)), 4.2);
    EXPECT_NEAR(voltage_of_charge(BatteryState::at_soc(p, 0.75)), 3.9, 1e-12);
}

TEST(Voltage, MonotoneAndBounded) {
    BatteryState b = BatteryState::at_soc({}, 0.0);
    double prev = 0.0;
    for (int i = -10; i <= 1010; ++i) {
        b.charge_j = b.params.capacity_j() * i / 1000.0;
        const double v = voltage_of_charge(b);
        EXPECT_GE(v, prev);
        EXPECT_GE(v, 3.0);
        EXPECT_LE(v, 4.2);
        prev = v;
    }
}

TEST(SessionEnergy, Compositions) {
    const std::vector<ModeSpan> tof{{PowerMode::PresenceDetection, 0.08}};
    EXPECT_NEAR(session_energy_j(tof), 0.000556, 1e-6);
    EXPECT_NEAR(presence_check_energy_j(), 0.00055608, 1e-12);
    EXPECT_EQ(session_energy_j({}), 0.0);
    const std::vector<ModeSpan> day{{PowerMode::Sampling, 86400}};
    EXPECT_NEAR(session_energy_j(day), 61.5, 0.05);
    const std::vector<ModeSpan> bad{{static_cast<PowerMode>(42), 1.0}};
    EXPECT_THROW(session_energy_j(bad), DomainError);
    const std::vector<ModeSpan> neg{{PowerMode::Sampling, -1.0}};
    EXPECT_THROW(session_energy_j(neg), DomainError);
}

TEST(Harvest, JsonRoundTripAndValidation) {
    auto p = HarvestProfile::from_json(R"({"sun_intervals":[[36000,52200]],"net_rate_j_per_h":28.7})");
    EXPECT_NEAR(p.sun_hours(), 4.5, 1e-12);
    EXPECT_TRUE(p.in_sun(36000));
    EXPECT_FALSE(p.in_sun(52200));
    EXPECT_TRUE(p.in_sun(86400 * 3 + 40000));
    auto q = HarvestProfile::from_json(p.to_json());
    EXPECT_EQ(q.sun_intervals, p.sun_intervals);
    EXPECT_THROW(HarvestProfile::from_json(R"({"sun_intervals":[[0,10],[5,20]]})"), DomainError);
    EXPECT_THROW(HarvestProfile::from_json(R"({"sun_intervals":[[0,90000]]})"), DomainError);
    EXPECT_THROW(HarvestProfile::from_json(R"({"net_rate_j_per_h":-1})"), DomainError);
    EXPECT_THROW(HarvestProfile::from_json("{"), DomainError);
}
