// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "parkmon/energy_model.hpp"
#include "parkmon/ingestion.hpp"
#include "parkmon/sensor_core.hpp"
#include "parkmon/simulator.hpp"
#include "parkmon/uplink_codec.hpp"

using namespace parkmon;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kRuntimeDays = 46.75, kRuntimeTol = 0.05;
constexpr double kSurplusJ = 9.9, kSurplusTol = 0.5;
constexpr double kFieldLoadMw = 1.699, kFieldLoadTol = 5e-4;
constexpr double kWeekChargeTol = 0.02;
constexpr double kMeanDurationErrS = 2.8;
constexpr int kAccuracySessions = 100;
constexpr int kCodecCases = 100000;
constexpr int kVarianceWindows = 10000;
constexpr double kVarianceRelTol = 1e-9;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs < budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s  %-26s %s  [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
                budget_s, in_budget ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string capture(const std::string& cmd, int& code) {
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("popen failed");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int st = ::pclose(p);
    code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return out;
}

Outcome battery_runtime() {
    int code = 0;
    const auto text = capture(std::string(PARKMON_BIN) + " energy-report --capacity-mah 330 --voltage 3.9 --power-mw 1.147", code);
    const auto js = capture(std::string(PARKMON_BIN) + " energy-report --format json", code);
    const double days = nlohmann::json::parse(js).at("runtime_days").get<double>();
    const bool printed = text.find("46.75 days") != std::string::npos;
    return {code == 0 && printed && std::abs(days - kRuntimeDays) <= kRuntimeTol,
            fmt("runtime %.4f days (want %.2f +- %.2f), printed \"46.75 days\": %s", days, kRuntimeDays, kRuntimeTol,
                printed ? "yes" : "no")};
}

Outcome energy_balance() {
    // Solve sun_h * rate - (24 - sun_h) * 3600 s * P = surplus for P first.
    const double p_mw = (4.5 * 28.7 - kSurplusJ) / ((24.0 - 4.5) * 3600.0) * 1000.0;
    HarvestProfile h;
    h.sun_intervals = {{36000.0, 36000.0 + 4.5 * 3600.0}};
    h.net_surplus_rate_j_per_h = 28.7;
    const double bal = daily_balance_j(h, kBalanceImpliedFieldPowerMw);
    const bool ok = std::abs(p_mw - kFieldLoadMw) <= kFieldLoadTol &&
                    std::abs(kBalanceImpliedFieldPowerMw - p_mw) <= kFieldLoadTol &&
                    std::abs(bal - kSurplusJ) <= kSurplusTol;
    return {ok, fmt("solved load %.4f mW (want %.3f), daily_balance %.3f J (want %.1f +- %.1f)", p_mw, kFieldLoadMw,
                    bal, kSurplusJ, kSurplusTol)};
}

Outcome self_sustaining_week() {
    // Field node: 10-minute transmission slots, 2.7 h of sun a day (13.5 h
    // over the run), ordinary park traffic.
    Scenario sc;
    DayProfile day;
    day.name = "field";
    day.hourly_rate = {0, 0, 0, 0, 0, 0, 1, 2, 2, 2, 3, 5, 7, 6, 3, 3, 4, 7, 10, 11, 9, 6, 3, 1};
    sc.day_profiles = {day};
    SensorSpec s;
    s.id = 0x5a3e0008;
    s.name = "field";
    s.profile_cycle = {"field"};
    s.uplink_period_s = 600;
    s.initial_soc = 0.75;
    sc.sensors = {s};
    sc.days = 5;
    sc.seed = 8;
    sc.harvest.sun_intervals = {{38880.0, 48600.0}};
    const auto r = run_sim(sc);
    const double start = r.battery_trace.front().charge_j;
    double end = -1;
    for (const auto& b : r.battery_trace)
        if (b.t_s == 5 * 86400.0) end = b.charge_j;
    const double rel = (end - start) / start;
    const double sun_h = 5 * sc.harvest.sun_hours();
    const auto& l = r.ledgers.front();
    return {end >= 0 && std::abs(rel) <= kWeekChargeTol && std::abs(sun_h - 13.5) < 1e-9,
            fmt("end/start charge %+.3f%% (want within +-%.0f%%), %.1f h sun, %zu uplinks + %zu keep-alives, "
                "%zu presence checks",
                100 * rel, 100 * kWeekChargeTol, sun_h, l.uplinks, l.keepalives, l.presence_checks)};
}

Outcome detection_accuracy() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(10, 30), rest(5, 8);
    std::uniform_real_distribution<double> jitter(0.0, 20.0);
    std::bernoulli_distribution with_break(0.3);
    Scenario sc;
    SensorSpec s;
    s.id = 0x5a3e00a0;
    s.name = "desk";
    double t = 60.0;
    for (int i = 0; i < kAccuracySessions; ++i) {
        SessionPlan p;
        p.start_t = t + jitter(rng);
        p.location = i % 2 ? Location::AtSensorBar : Location::Elsewhere;
        const int L = len(rng);
        if (L >= 20 && with_break(rng)) {
            const int r = rest(rng);
            const int a = (L - r) / 2;
            p.active_spans = {{0.0, double(a)}, {double(a + r), double(L - a - r)}};
        } else {
            p.active_spans = {{0.0, double(L)}};
        }
        s.sessions.push_back(p);
        t += 120.0;
    }
    sc.sensors = {s};
    sc.days = 1;
    sc.seed = 100;
    const auto r = run_sim(sc);
    const bool all = r.summary.expected == std::size_t(kAccuracySessions) &&
                     r.summary.matched == std::size_t(kAccuracySessions) && r.summary.spurious == 0 &&
                     r.delivered.size() == std::size_t(kAccuracySessions);

    // 24 h of pure noise at default config, at three quiet levels.
    Scenario quiet;
    for (std::uint32_t k = 0; k < 3; ++k) {
        SensorSpec q;
        q.id = 0x5a3e00b0 + k;
        q.quiet_std_mg = 2.0 + 1.5 * k;
        quiet.sensors.push_back(q);
    }
    quiet.days = 1;
    quiet.seed = 101;
    const auto n = run_sim(quiet);
    return {all && r.summary.mean_abs_error_s <= kMeanDurationErrS && n.emitted.empty(),
            fmt("%zu/%d detected, %zu spurious, mean |err| %.3f s (want <= %.1f), max %.1f s, presence %zu/%zu; "
                "noise 24 h x 3 sensors: %zu sessions (want 0)",
                r.summary.matched, kAccuracySessions, r.summary.spurious, r.summary.mean_abs_error_s,
                kMeanDurationErrS, r.summary.max_abs_error_s, r.summary.presence_correct, r.summary.matched,
                n.emitted.size())};
}

Outcome segmentation_rules() {
    DetectorConfig cfg;
    auto drive = [&](const std::vector<bool>& flags) {
        SegmenterState seg;
        std::vector<SessionRecord> out;
        for (std::size_t i = 0; i < flags.size(); ++i) {
            auto st = segment_step(seg, cfg, std::int64_t(i), flags[i], 1);
            if (st.emitted) out.push_back(*st.emitted);
        }
        return out;
    };
    int cases = 0, bad = 0;
    // Gap grid: two bursts, gap 1..60 calm seconds.
    for (int a = 10; a <= 30; a += 5)
        for (int gap = 1; gap <= 60; ++gap) {
            std::vector<bool> f(std::size_t(a), true);
            f.insert(f.end(), std::size_t(gap), false);
            f.insert(f.end(), std::size_t(a), true);
            f.insert(f.end(), 40, false);
            const auto recs = drive(f);
            const std::size_t want = gap < 35 ? 1 : 2;
            ++cases;
            if (recs.size() != want || (want == 1 && recs[0].duration_s != 2 * a + gap)) ++bad;
        }
    // Length grid: one burst of 1..60 s.
    for (int L = 1; L <= 60; ++L) {
        std::vector<bool> f(3, false);
        f.insert(f.end(), std::size_t(L), true);
        f.insert(f.end(), 40, false);
        const auto recs = drive(f);
        ++cases;
        if (L < 10 ? !recs.empty() : (recs.size() != 1 || recs[0].duration_s != L)) ++bad;
    }
    // Random streams against the reference segmentation.
    std::mt19937_64 rng(35);
    std::uniform_int_distribution<int> run_len(1, 45);
    std::bernoulli_distribution p(0.4);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<bool> f;
        while (f.size() < 2000) f.insert(f.end(), std::size_t(run_len(rng)), p(rng));
        const auto got = drive(f);
        const auto want = oracle::segment_flags(f);
        ++cases;
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i)
            same = got[i].duration_s == want[i].duration_s && got[i].end_t == want[i].end_t &&
                   got[i].break_count == want[i].break_count;
        if (!same) ++bad;
    }
    auto pair_with_gap = [](int gap) {
        std::vector<bool> f(20, true);
        f.insert(f.end(), std::size_t(gap), false);
        f.insert(f.end(), 10, true);
        f.insert(f.end(), 40, false);
        return f;
    };
    const auto merge34 = drive(pair_with_gap(34));
    const auto split35 = drive(pair_with_gap(35));
    return {bad == 0 && merge34.size() == 1 && split35.size() == 2,
            fmt("%d grid/random cases, %d mismatches; 34 s gap -> %zu record, 35 s gap -> %zu records", cases, bad,
                merge34.size(), split35.size())};
}

Outcome codec() {
    std::mt19937_64 rng(25);
    std::uniform_int_distribution<int> dur(10, 65535), brk(0, 255), mv(0, 65535), len(0, 8), byte(0, 255);
    std::bernoulli_distribution coin(0.5);
    int roundtrip_bad = 0;
    for (int i = 0; i < kCodecCases; ++i) {
        SessionRecord r;
        r.duration_s = dur(rng);
        r.presence = coin(rng);
        r.break_count = brk(rng);
        std::optional<std::uint16_t> b;
        if (coin(rng)) b = std::uint16_t(mv(rng));
        const auto bytes = encode_frame(r, b);
        const auto f = decode_frame(bytes);
        if (f.duration_s != r.duration_s || f.presence != r.presence || f.break_count != r.break_count ||
            f.battery_mv != b || encode_frame(f) != bytes)
            ++roundtrip_bad;
    }
    int accepted = 0, rejected = 0, escaped = 0;
    for (int i = 0; i < kCodecCases; ++i) {
        std::vector<std::uint8_t> b(std::size_t(len(rng)));
        for (auto& x : b) x = std::uint8_t(byte(rng));
        if (!b.empty() && coin(rng)) b[0] = std::uint8_t(0x10 | (b[0] & 0x0F));
        try {
            const auto f = decode_frame(b);
            if (encode_frame(f) != b) ++escaped;
            ++accepted;
        } catch (const DecodeError&) {
            ++rejected;
        } catch (...) {
            ++escaped;
        }
    }
    return {roundtrip_bad == 0 && escaped == 0,
            fmt("%d roundtrips, %d mismatches; %d random strings: %d valid, %d rejected, %d other outcomes",
                kCodecCases, roundtrip_bad, kCodecCases, accepted, rejected, escaped)};
}

Outcome end_to_end() {
    const auto sc = default_week_scenario();
    const auto report = run_sim(sc);
    const auto dir = fs::temp_directory_path() / ("parkmon_accept_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log_path = (dir / "events.jsonl").string();

    spdlog::set_level(spdlog::level::warn);
    EventStore store(std::make_unique<FileEventLog>(log_path));
    IngestionService svc(store);
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    if (port <= 0) return {false, "bind failed"};
    std::thread th([&] { server.listen(); });

    httplib::Client cli("127.0.0.1", port);
    auto replay = [&](int& created, int& dup, int& other) {
        created = dup = other = 0;
        for (const auto& d : report.delivered) {
            auto res = cli.Post("/v1/uplink", envelope_to_json(d.envelope), "application/json");
            if (!res) ++other;
            else if (res->status == 201) ++created;
            else if (res->status == 200) ++dup;
            else ++other;
        }
    };
    const std::string from = format_rfc3339(sc.start_utc);
    const std::size_t hours = report.delivered_hourly_all.size();
    const std::string to = format_rfc3339(sc.start_utc + std::chrono::hours{hours});
    auto hourly = [&](const std::string& sensor) {
        std::string q = "/v1/activities?bucket=hour&from=" + from +
                        "&to=" + to;
        if (!sensor.empty()) q += "&sensor=" + sensor;
        auto res = cli.Get(q);
        if (!res || res->status != 200) throw std::runtime_error("query failed: " + q);
        return nlohmann::json::parse(res->body).at("buckets");
    };
    auto mismatches = [&](const nlohmann::json& got, const std::vector<HourlyBucket>& want) {
        std::size_t bad = got.size() == want.size() ? 0 : 1;
        for (std::size_t i = 0; !bad && i < want.size(); ++i) {
            bad += got[i]["bucket_start"] != format_rfc3339(want[i].bucket_start) ||
                   got[i]["total_active_s"] != want[i].total_active_s ||
                   got[i]["session_count"] != want[i].session_count ||
                   got[i]["presence_count"] != want[i].presence_count;
        }
        return bad;
    };

    int c1, d1, o1, c2, d2, o2;
    replay(c1, d1, o1);
    std::size_t bad = mismatches(hourly(""), report.delivered_hourly_all);
    for (const auto& [dev, want] : report.delivered_hourly) bad += mismatches(hourly(dev), want);
    std::ifstream in1(log_path);
    std::stringstream before;
    before << in1.rdbuf();
    const auto sensors_before = cli.Get("/v1/sensors")->body;

    replay(c2, d2, o2);
    std::size_t bad2 = mismatches(hourly(""), report.delivered_hourly_all);
    std::ifstream in2(log_path);
    std::stringstream after;
    after << in2.rdbuf();
    const bool unchanged = before.str() == after.str() && cli.Get("/v1/sensors")->body == sensors_before;

    server.stop();
    th.join();
    fs::remove_all(dir);

    std::int64_t total = 0;
    for (const auto& b : report.delivered_hourly_all) total += b.total_active_s;
    const auto n = report.delivered.size();
    const bool ok = std::size_t(c1) == n && o1 == 0 && bad == 0 && c2 == 0 && std::size_t(d2) == n && o2 == 0 &&
                    bad2 == 0 && unchanged;
    return {ok, fmt("%zu uplinks from %zu sensors over %zu h (%lld active s); pass 1: %d created, %zu bucket "
                    "mismatches; pass 2: %d created, %d duplicate, store %s",
                    n, report.delivered_hourly.size(), hours, static_cast<long long>(total), c1, bad, c2, d2,
                    unchanged ? "unchanged" : "CHANGED")};
}

Outcome variance_oracle() {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> centre(-1500, 1500), spread(0.01, 400);
    double worst = 0;
    for (int i = 0; i < kVarianceWindows; ++i) {
        const double cx = centre(rng), cy = centre(rng), cz = centre(rng), sd = spread(rng);
        std::normal_distribution<double> n(0.0, sd);
        SampleWindow w(10);
        std::vector<AccelSample> v;
        // Pre-fill so the ring has wrapped before the window under test.
        const int extra = i % 10;
        for (int k = 0; k < 10 + extra; ++k) {
            AccelSample s{0.2 * k, cx + n(rng), cy + n(rng), cz + n(rng)};
            w.push(s);
            v.push_back(s);
        }
        const std::vector<AccelSample> last(v.end() - 10, v.end());
        const double want = oracle::two_pass_variance(last);
        worst = std::max(worst, std::abs(window_variance(w) - want) / want);
    }
    return {worst <= kVarianceRelTol,
            fmt("%d windows, worst relative error %.2e (want <= %.0e)", kVarianceWindows, worst, kVarianceRelTol)};
}

}  // namespace

int main() {
    criterion("battery_runtime", 1, battery_runtime);
    criterion("energy_balance_identity", 1, energy_balance);
    criterion("self_sustaining_week", 30, self_sustaining_week);
    criterion("detection_accuracy", 60, detection_accuracy);
    criterion("segmentation_rules", 60, segmentation_rules);
    criterion("codec", 60, codec);
    criterion("end_to_end_pipeline", 120, end_to_end);
    criterion("variance_oracle", 60, variance_oracle);
    std::printf("%s: %d failing\n", failures ? "FAILED" : "ALL PASS", failures);
    return failures ? 1 : 0;
}
