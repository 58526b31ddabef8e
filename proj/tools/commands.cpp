#include "commands.hpp"

#include <chrono>
#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "parkmon/energy_model.hpp"
#include "parkmon/errors.hpp"
#include "parkmon/ingestion.hpp"
#include "parkmon/sensor_core.hpp"
#include "parkmon/simulator.hpp"

namespace parkmon::cli {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

int cmd_simulate(const SimulateArgs& a) {
    Scenario sc;
    try {
        sc = a.scenario_path.empty() ? default_week_scenario() : load_scenario(a.scenario_path);
        if (a.seed) sc.seed = *a.seed;
        sc.validate();
    } catch (const ScenarioParseError& e) {
        std::cerr << "error: " << a.scenario_path << ":" << e.line() << ":" << e.column() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: invalid scenario\n";
        for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
        return kExitUsage;
    }

    try {
        const SimReport r = run_sim(sc);
        write_report(r, a.out_dir);
        std::printf("sensors=%zu days=%lld seed=%llu expected=%zu matched=%zu missed=%zu spurious=%zu "
                    "delivered=%zu mean_abs_error_s=%.3f\n",
                    sc.sensors.size(), static_cast<long long>(sc.days), static_cast<unsigned long long>(sc.seed),
                    r.summary.expected, r.summary.matched, r.summary.missed, r.summary.spurious, r.delivered.size(),
                    r.summary.mean_abs_error_s);
        std::printf("wrote %s/{report.json,ground_truth.csv,delivered.csv,battery_trace.csv,accuracy.csv,"
                    "uplinks.jsonl}\n",
                    a.out_dir.c_str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_replay_trace(const ReplayTraceArgs& a) {
    DetectorConfig cfg;
    try {
        if (!a.config_path.empty()) cfg = detector_config_from_json(read_file(a.config_path));
    } catch (const ScenarioParseError& e) {
        std::cerr << "error: " << a.config_path << ":" << e.line() << ":" << e.column() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    std::ifstream in(a.csv_path);
    if (!in) {
        std::cerr << "error: cannot open " << a.csv_path << '\n';
        return kExitUsage;
    }

    ActivityDetector det(cfg);
    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            header_seen = true;
            if (line != "t_s,ax_mg,ay_mg,az_mg") {
                std::cerr << "error: row 1: expected header t_s,ax_mg,ay_mg,az_mg\n";
                return kExitUsage;
            }
            continue;
        }
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        AccelSample s;
        if (cells.size() != 4 || !parse_double(cells[0], s.t) || !parse_double(cells[1], s.ax) ||
            !parse_double(cells[2], s.ay) || !parse_double(cells[3], s.az)) {
            std::cerr << "error: row " << row << ": expected 4 numeric fields, got '" << line << "'\n";
            return kExitUsage;
        }
        try {
            det.push_sample(s);
            std::int64_t now = 0;
            if (!det.state().window.full() || !is_eval_instant(s.t, cfg, now)) continue;
            const EvalOutcome o = det.evaluate_second(now);
            if (o.session_started) det.presence_cascade(ToFReading{});
            if (o.emitted) {
                std::printf("%lld,%lld,%d,%lld\n", static_cast<long long>(o.emitted->end_t),
                            static_cast<long long>(o.emitted->duration_s), o.emitted->presence ? 1 : 0,
                            static_cast<long long>(o.emitted->break_count));
            }
        } catch (const Error& e) {
            std::cerr << "error: row " << row << ": " << e.what() << '\n';
            return kExitUsage;
        }
    }
    return kExitOk;
}

int cmd_energy_report(const EnergyReportArgs& a) {
    HarvestProfile harvest;
    double runtime = 0.0;
    try {
        if (!a.harvest_path.empty()) {
            harvest = HarvestProfile::load(a.harvest_path);
        } else {
            if (!(a.sun_hours >= 0.0 && a.sun_hours <= 24.0)) throw DomainError("--sun-hours must be in [0, 24]");
            if (a.sun_hours > 0.0) harvest.sun_intervals = {{0.0, a.sun_hours * 3600.0}};
            harvest.net_surplus_rate_j_per_h = a.net_rate_j_per_h;
            harvest.validate();
        }
        runtime = battery_runtime_days(a.capacity_mah, a.nominal_v, a.power_mw);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    const double load = a.load_mw.value_or(a.power_mw);
    const double balance = daily_balance_j(harvest, load);
    const double capacity_j = a.capacity_mah * 3.6 * a.nominal_v;
    const PowerMode modes[] = {PowerMode::Sampling, PowerMode::SamplingAndTransmission, PowerMode::PresenceDetection,
                               PowerMode::Application};

    if (a.format == "json") {
        nlohmann::ordered_json j;
        j["modes"] = nlohmann::ordered_json::array();
        for (PowerMode m : modes) j["modes"].push_back({{"mode", std::string(to_string(m))}, {"avg_power_mw", avg_power_mw(m)}});
        j["capacity_mah"] = a.capacity_mah;
        j["nominal_v"] = a.nominal_v;
        j["capacity_j"] = capacity_j;
        j["power_mw"] = a.power_mw;
        j["runtime_days"] = runtime;
        j["sun_hours"] = harvest.sun_hours();
        j["net_rate_j_per_h"] = harvest.net_surplus_rate_j_per_h;
        j["load_mw"] = load;
        j["daily_balance_j"] = balance;
        std::cout << j.dump(2) << '\n';
        return kExitOk;
    }

    std::printf("%-28s %12s\n", "mode", "avg_power_mw");
    for (PowerMode m : modes) std::printf("%-28s %12.3f\n", std::string(to_string(m)).c_str(), avg_power_mw(m));
    std::printf("\nbattery            %.0f mAh @ %.2f V = %.1f J\n", a.capacity_mah, a.nominal_v, capacity_j);
    std::printf("runtime            %.2f days at %.3f mW\n", runtime, a.power_mw);
    std::printf("harvest            %.2f h sun/day at %.1f J/h\n", harvest.sun_hours(),
                harvest.net_surplus_rate_j_per_h);
    std::printf("daily balance      %+.1f J at %.3f mW\n", balance, load);
    return kExitOk;
}

int cmd_serve(const ServeArgs& a) {
    spdlog::set_level(spdlog::level::from_str(a.log_level));
    const auto colon = a.listen.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "error: --listen must be host:port\n";
        return kExitUsage;
    }
    const std::string host = a.listen.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(a.listen.substr(colon + 1));
    } catch (const std::exception&) {
        std::cerr << "error: bad port in --listen\n";
        return kExitUsage;
    }

    try {
        std::filesystem::create_directories(a.data_dir);
        EventStore store(std::make_unique<FileEventLog>((std::filesystem::path(a.data_dir) / "events.jsonl").string()));
        IngestionService service(store);
        HttpServer server(service);
        const int bound = server.bind(host, port);
        if (bound < 0) {
            spdlog::error("cannot bind {}", a.listen);
            return kExitRuntime;
        }
        // Signals are taken synchronously on a watcher thread; the server's
        // worker threads inherit the blocked mask.
        sigset_t sigs;
        sigemptyset(&sigs);
        sigaddset(&sigs, SIGINT);
        sigaddset(&sigs, SIGTERM);
        sigaddset(&sigs, SIGUSR1);
        pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
        std::thread watcher([&] {
            int sig = 0;
            sigwait(&sigs, &sig);
            if (sig != SIGUSR1) spdlog::info("signal {}, shutting down", sig);
            server.stop();
        });
        spdlog::info("listening on {}:{} data_dir={} events={}", host, bound, a.data_dir, store.size());
        server.listen();
        pthread_kill(watcher.native_handle(), SIGUSR1);  // no-op if it already returned
        watcher.join();
        spdlog::info("stopped");
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_replay_uplinks(const ReplayUplinksArgs& a) {
    std::ifstream in(a.log_path);
    if (!in) {
        std::cerr << "error: cannot open " << a.log_path << '\n';
        return kExitUsage;
    }
    std::vector<std::string> lines;
    std::vector<std::optional<UtcTime>> times;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        std::optional<UtcTime> t;
        try {
            t = parse_envelope(line).envelope.received_at;
        } catch (const EnvelopeError&) {
            // Sent as-is; the service reports why it rejects it.
        }
        lines.push_back(line);
        times.push_back(t);
    }

    httplib::Client client(a.server_url);
    client.set_connection_timeout(2);
    client.set_read_timeout(10);
    std::size_t created = 0, duplicates = 0, rejected = 0;
    std::optional<UtcTime> prev;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!a.fast && prev && times[i] && *times[i] > *prev) {
            std::this_thread::sleep_for(*times[i] - *prev);
        }
        if (times[i]) prev = times[i];

        bool done = false;
        for (int attempt = 1; attempt <= a.retries && !done; ++attempt) {
            auto res = client.Post("/v1/uplink", lines[i], "application/json");
            if (res && res->status < 500) {
                done = true;
                if (res->status == 201) ++created;
                else if (res->status == 200) ++duplicates;
                else {
                    ++rejected;
                    std::cerr << "line " << i + 1 << ": rejected (" << res->status << "): " << res->body << '\n';
                }
            } else if (attempt < a.retries) {
                std::this_thread::sleep_for(std::chrono::milliseconds(a.retry_delay_ms));
            }
        }
        if (!done) {
            std::cerr << "error: line " << i + 1 << ": server " << a.server_url << " unreachable after " << a.retries
                      << " attempts\n";
            return kExitRuntime;
        }
    }
    std::printf("posted=%zu created=%zu duplicate=%zu rejected=%zu\n", lines.size(), created, duplicates, rejected);
    return rejected > 0 ? kExitRuntime : kExitOk;
}

}  // namespace parkmon::cli
