#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace parkmon::cli;

    CLI::App app{"parkmon: workout-park activity sensor simulation, ingestion and energy tools"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the report JSON and CSV tables");
    simulate->add_option("scenario", sim.scenario_path, "Scenario JSON (default: built-in 7-day, 3-sensor week)");
    simulate->add_option("--config", sim.scenario_path, "Scenario JSON (same as the positional argument)");
    simulate->add_option("--out,-o", sim.out_dir, "Output directory")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Override the scenario seed");

    ReplayTraceArgs trace;
    auto* replay_trace = app.add_subcommand("replay-trace", "Run the detector over a t_s,ax_mg,ay_mg,az_mg CSV");
    replay_trace->add_option("csv", trace.csv_path, "Trace CSV")->required();
    replay_trace->add_option("--config", trace.config_path, "Detector config JSON");

    EnergyReportArgs energy;
    auto* energy_report = app.add_subcommand("energy-report", "Print power modes, runtime and daily energy balance");
    energy_report->add_option("--capacity-mah", energy.capacity_mah, "Battery capacity")->capture_default_str();
    energy_report->add_option("--voltage", energy.nominal_v, "Average battery voltage")->capture_default_str();
    energy_report->add_option("--power-mw", energy.power_mw, "Average load for runtime")->capture_default_str();
    energy_report->add_option("--load-mw", energy.load_mw, "Load for the daily balance (default: --power-mw)");
    energy_report->add_option("--sun-hours", energy.sun_hours, "Sun hours per day")->capture_default_str();
    energy_report->add_option("--net-rate", energy.net_rate_j_per_h, "Net stored energy per sun hour, J/h")
        ->capture_default_str();
    energy_report->add_option("--harvest", energy.harvest_path, "Harvest profile JSON (overrides --sun-hours/--net-rate)");
    energy_report->add_option("--format", energy.format, "text or json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the ingestion/query HTTP service");
    serve_cmd->add_option("--listen", serve.listen, "host:port")->envname("PARKMON_LISTEN")->capture_default_str();
    serve_cmd->add_option("--data-dir", serve.data_dir, "Event store directory")
        ->envname("PARKMON_DATA_DIR")
        ->capture_default_str();
    serve_cmd->add_option("--log-level", serve.log_level, "trace|debug|info|warn|error|off")
        ->envname("PARKMON_LOG_LEVEL")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
        ->capture_default_str();

    ReplayUplinksArgs up;
    auto* replay_uplinks = app.add_subcommand("replay-uplinks", "POST a recorded uplink log to a running service");
    replay_uplinks->add_option("log", up.log_path, "uplinks.jsonl from simulate")->required();
    replay_uplinks->add_option("--server", up.server_url, "Service base URL")->capture_default_str();
    replay_uplinks->add_flag("--fast", up.fast, "Do not reproduce the original delivery spacing");
    replay_uplinks->add_option("--retries", up.retries, "Attempts per uplink on connection/5xx failure")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    replay_uplinks->add_option("--retry-delay-ms", up.retry_delay_ms, "Delay between attempts")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*simulate) return cmd_simulate(sim);
    if (*replay_trace) return cmd_replay_trace(trace);
    if (*energy_report) return cmd_energy_report(energy);
    if (*serve_cmd) return cmd_serve(serve);
    if (*replay_uplinks) return cmd_replay_uplinks(up);
    return kExitUsage;
}
