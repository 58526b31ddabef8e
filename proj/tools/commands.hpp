#pragma once

#include <optional>
#include <string>

namespace parkmon::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct SimulateArgs {
    std::string scenario_path;  // empty: built-in 7-day, 3-sensor scenario
    std::string out_dir = "sim-out";
    std::optional<std::uint64_t> seed;
};

struct ReplayTraceArgs {
    std::string csv_path;
    std::string config_path;
};

struct EnergyReportArgs {
    double capacity_mah = 330.0;
    double nominal_v = 3.9;
    double power_mw = 1.147;
    std::optional<double> load_mw;  // defaults to power_mw
    double sun_hours = 4.5;
    double net_rate_j_per_h = 28.7;
    std::string harvest_path;
    std::string format = "text";
};

struct ServeArgs {
    std::string listen = "127.0.0.1:8080";
    std::string data_dir = "./parkmon-data";
    std::string log_level = "info";
};

struct ReplayUplinksArgs {
    std::string log_path;
    std::string server_url = "http://127.0.0.1:8080";
    bool fast = false;
    int retries = 5;
    int retry_delay_ms = 200;
};

int cmd_simulate(const SimulateArgs& a);
int cmd_replay_trace(const ReplayTraceArgs& a);
int cmd_energy_report(const EnergyReportArgs& a);
int cmd_serve(const ServeArgs& a);
int cmd_replay_uplinks(const ReplayUplinksArgs& a);

}  // namespace parkmon::cli
