#include "parkmon/ingestion.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace parkmon {

using ojson = nlohmann::ordered_json;

std::optional<BucketKind> bucket_from_string(std::string_view s) {
    if (s == "raw") return BucketKind::Raw;
    if (s == "hour") return BucketKind::Hour;
    if (s == "day") return BucketKind::Day;
    return std::nullopt;
}

std::string_view to_string(BucketKind b) {
    switch (b) {
        case BucketKind::Raw: return "raw";
        case BucketKind::Hour: return "hour";
        case BucketKind::Day: return "day";
    }
    return "raw";
}

std::string idempotency_key(const UplinkEnvelope& env) {
    return env.device_id + '|' + std::to_string(to_millis(env.received_at)) + '|' + env.payload_b64;
}

namespace {

ojson event_json(const ActivityEvent& e) {
    ojson j;
    j["event_id"] = e.event_id;
    j["sensor_id"] = e.sensor_id;
    j["received_at"] = format_rfc3339(e.received_at);
    j["start_at"] = format_rfc3339(e.start_at);
    j["duration_s"] = e.duration_s;
    j["presence"] = e.presence;
    j["break_count"] = e.break_count;
    j["battery_mv"] = e.battery_mv ? ojson(*e.battery_mv) : ojson(nullptr);
    return j;
}

}  // namespace

std::string event_to_json_line(const ActivityEvent& e) {
    ojson j = event_json(e);
    j["key"] = e.idempotency_key;
    return j.dump();
}

ActivityEvent event_from_json_line(std::string_view line) {
    const auto j = nlohmann::json::parse(line);
    ActivityEvent e;
    e.event_id = j.at("event_id").get<std::uint64_t>();
    e.sensor_id = j.at("sensor_id").get<std::string>();
    const auto rx = parse_rfc3339(j.at("received_at").get<std::string>());
    const auto st = parse_rfc3339(j.at("start_at").get<std::string>());
    if (!rx || !st) throw StorageError("bad timestamp in event log");
    e.received_at = *rx;
    e.start_at = *st;
    e.duration_s = j.at("duration_s").get<std::int64_t>();
    e.presence = j.at("presence").get<bool>();
    e.break_count = j.at("break_count").get<std::int64_t>();
    if (!j.at("battery_mv").is_null()) e.battery_mv = j.at("battery_mv").get<std::uint16_t>();
    e.idempotency_key = j.at("key").get<std::string>();
    return e;
}

FileEventLog::FileEventLog(std::string path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StorageError("cannot open event log " + path_ + ": " + std::strerror(errno));
}

FileEventLog::~FileEventLog() {
    if (fd_ >= 0) ::close(fd_);
}

std::vector<ActivityEvent> FileEventLog::load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw StorageError("cannot read event log " + path_);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();

    std::vector<ActivityEvent> out;
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (pos < data.size()) {
        const std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail
        const std::string_view line(data.data() + pos, nl - pos);
        try {
            out.push_back(event_from_json_line(line));
        } catch (const std::exception& e) {
            // Only the final line can be a crash artifact; anything earlier is corruption.
            if (nl + 1 < data.size()) throw StorageError("corrupt event log line at byte " + std::to_string(pos));
            break;
        }
        pos = nl + 1;
        good_end = pos;
    }
    if (good_end != data.size()) {
        if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0)
            throw StorageError("cannot truncate torn event log tail: " + std::string(std::strerror(errno)));
    }
    return out;
}

void FileEventLog::append(const ActivityEvent& e) {
    const std::string line = event_to_json_line(e) + '\n';
    std::size_t off = 0;
    while (off < line.size()) {
        const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StorageError(std::string("event log write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw StorageError(std::string("event log fsync failed: ") + std::strerror(errno));
}

EventStore::EventStore(std::unique_ptr<EventLog> log) : log_(std::move(log)) {
    for (auto& e : log_->load()) {
        next_id_ = std::max(next_id_, e.event_id + 1);
        by_key_.emplace(e.idempotency_key, e.event_id);
        auto [it, fresh] = sensors_.try_emplace(e.sensor_id);
        auto& s = it->second;
        if (fresh) {
            s.sensor_id = e.sensor_id;
            s.first_seen = e.received_at;
            s.last_seen = e.received_at;
        }
        s.first_seen = std::min(s.first_seen, e.received_at);
        if (e.received_at >= s.last_seen) {
            s.last_seen = e.received_at;
            if (e.battery_mv) s.last_battery_mv = e.battery_mv;
        }
        ++s.event_count;
        events_.push_back(std::move(e));
    }
}

IngestResult EventStore::ingest(const ParsedEnvelope& env) {
    const std::string key = idempotency_key(env.envelope);
    std::unique_lock gate(turnstile_);
    std::unique_lock lock(mu_);
    gate.unlock();
    if (auto it = by_key_.find(key); it != by_key_.end()) return {it->second, true};

    ActivityEvent e;
    e.event_id = next_id_;
    e.sensor_id = env.envelope.device_id;
    e.received_at = env.envelope.received_at;
    e.duration_s = env.frame.duration_s;
    e.start_at = e.received_at - std::chrono::seconds{e.duration_s};
    e.presence = env.frame.presence;
    e.break_count = env.frame.break_count;
    e.battery_mv = env.frame.battery_mv;
    e.idempotency_key = key;

    log_->append(e);  // throws before any in-memory change

    ++next_id_;
    by_key_.emplace(key, e.event_id);
    auto [it, fresh] = sensors_.try_emplace(e.sensor_id);
    auto& s = it->second;
    if (fresh) {
        s.sensor_id = e.sensor_id;
        s.first_seen = e.received_at;
        s.last_seen = e.received_at;
    }
    s.first_seen = std::min(s.first_seen, e.received_at);
    if (e.received_at >= s.last_seen) {
        s.last_seen = e.received_at;
        if (e.battery_mv) s.last_battery_mv = e.battery_mv;
    }
    ++s.event_count;
    events_.push_back(std::move(e));
    return {events_.back().event_id, false};
}

std::shared_lock<std::shared_mutex> EventStore::read_lock() const {
    { std::lock_guard gate(turnstile_); }
    return std::shared_lock(mu_);
}

void EventStore::check_query_locked(const ActivityQuery& q) const {
    if (!(q.from < q.to)) throw QueryError("'from' must be earlier than 'to'");
    if (q.to - q.from > std::chrono::hours{24 * kMaxQueryRangeDays})
        throw QueryError("range exceeds " + std::to_string(kMaxQueryRangeDays) + " days");
    if (q.sensor && !sensors_.contains(*q.sensor)) throw QueryError("unknown sensor '" + *q.sensor + "'");
}

void EventStore::check_query(const ActivityQuery& q) const {
    auto lock = read_lock();
    check_query_locked(q);
}

std::vector<ActivityEvent> EventStore::query_raw(const ActivityQuery& q) const {
    auto lock = read_lock();
    check_query_locked(q);
    std::vector<ActivityEvent> out;
    for (const auto& e : events_) {
        if (q.sensor && e.sensor_id != *q.sensor) continue;
        if (e.start_at >= q.from && e.start_at < q.to) out.push_back(e);
    }
    std::sort(out.begin(), out.end(), [](const ActivityEvent& a, const ActivityEvent& b) {
        return a.start_at != b.start_at ? a.start_at < b.start_at : a.event_id < b.event_id;
    });
    return out;
}

std::vector<AggregateBucket> EventStore::query_buckets(const ActivityQuery& q) const {
    auto lock = read_lock();
    check_query_locked(q);
    const std::chrono::milliseconds step = q.bucket == BucketKind::Day ? std::chrono::milliseconds{86400000}
                                                                       : std::chrono::milliseconds{3600000};
    const auto span = (q.to - q.from).count();
    const auto n = static_cast<std::size_t>((span + step.count() - 1) / step.count());
    std::vector<AggregateBucket> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].bucket_start = q.from + step * static_cast<long>(i);
    for (const auto& e : events_) {
        if (q.sensor && e.sensor_id != *q.sensor) continue;
        if (e.start_at < q.from || e.start_at >= q.to) continue;
        auto& b = out[static_cast<std::size_t>((e.start_at - q.from).count() / step.count())];
        b.total_active_s += e.duration_s;
        b.session_count += 1;
        b.presence_count += e.presence ? 1 : 0;
    }
    return out;
}

std::vector<SensorSummary> EventStore::list_sensors() const {
    auto lock = read_lock();
    std::vector<SensorSummary> out;
    out.reserve(sensors_.size());
    for (const auto& [id, s] : sensors_) out.push_back(s);
    return out;
}

std::size_t EventStore::size() const {
    auto lock = read_lock();
    return events_.size();
}

namespace {

HttpResponse json_response(int status, const ojson& j) { return {status, j.dump()}; }

HttpResponse error_response(int status, std::string_view kind, const std::string& detail) {
    ojson j;
    j["error"] = std::string(kind);
    j["detail"] = detail;
    return json_response(status, j);
}

std::string_view envelope_kind(EnvelopeErrc c) {
    switch (c) {
        case EnvelopeErrc::Json: return "malformed_json";
        case EnvelopeErrc::Schema: return "invalid_envelope";
        case EnvelopeErrc::Payload: return "invalid_payload";
    }
    return "invalid_envelope";
}

}  // namespace

HttpResponse IngestionService::post_uplink(const std::string& body) {
    ParsedEnvelope env;
    try {
        env = parse_envelope(body);
    } catch (const EnvelopeError& e) {
        ojson j;
        j["error"] = std::string(envelope_kind(e.code()));
        j["detail"] = e.what();
        if (e.frame_code()) j["frame_error"] = std::string(to_string(*e.frame_code()));
        return json_response(400, j);
    }
    try {
        const IngestResult r = store_.ingest(env);
        ojson j;
        j["event_id"] = r.event_id;
        j["duplicate"] = r.duplicate;
        return json_response(r.duplicate ? 200 : 201, j);
    } catch (const StorageError& e) {
        return error_response(500, "storage", e.what());
    }
}

HttpResponse IngestionService::get_sensors() const {
    ojson arr = ojson::array();
    for (const auto& s : store_.list_sensors()) {
        ojson j;
        j["sensor_id"] = s.sensor_id;
        j["first_seen"] = format_rfc3339(s.first_seen);
        j["last_seen"] = format_rfc3339(s.last_seen);
        j["event_count"] = s.event_count;
        j["last_battery_mv"] = s.last_battery_mv ? ojson(*s.last_battery_mv) : ojson(nullptr);
        arr.push_back(j);
    }
    ojson j;
    j["sensors"] = arr;
    return json_response(200, j);
}

HttpResponse IngestionService::get_activities(const std::map<std::string, std::string>& params) const {
    ActivityQuery q;
    auto param = [&](const char* key) -> std::optional<std::string> {
        auto it = params.find(key);
        if (it == params.end() || it->second.empty()) return std::nullopt;
        return it->second;
    };
    const auto from = param("from");
    const auto to = param("to");
    if (!from || !to) return error_response(400, "invalid_query", "'from' and 'to' are required");
    const auto f = parse_rfc3339(*from);
    const auto t = parse_rfc3339(*to);
    if (!f || !t) return error_response(400, "invalid_query", "'from'/'to' must be RFC 3339 timestamps");
    q.from = *f;
    q.to = *t;
    q.sensor = param("sensor");
    if (const auto b = param("bucket")) {
        const auto kind = bucket_from_string(*b);
        if (!kind) return error_response(400, "invalid_query", "unknown bucket '" + *b + "'");
        q.bucket = *kind;
    }

    try {
        ojson j;
        j["bucket"] = std::string(to_string(q.bucket));
        j["sensor"] = q.sensor ? ojson(*q.sensor) : ojson(nullptr);
        j["from"] = format_rfc3339(q.from);
        j["to"] = format_rfc3339(q.to);
        if (q.bucket == BucketKind::Raw) {
            ojson arr = ojson::array();
            for (const auto& e : store_.query_raw(q)) arr.push_back(event_json(e));
            j["events"] = arr;
        } else {
            ojson arr = ojson::array();
            for (const auto& b : store_.query_buckets(q)) {
                ojson bj;
                bj["bucket_start"] = format_rfc3339(b.bucket_start);
                bj["total_active_s"] = b.total_active_s;
                bj["session_count"] = b.session_count;
                bj["presence_count"] = b.presence_count;
                arr.push_back(bj);
            }
            j["buckets"] = arr;
        }
        return json_response(200, j);
    } catch (const QueryError& e) {
        return error_response(400, "invalid_query", e.what());
    }
}

}  // namespace parkmon
