#pragma once

// Uplink ingestion: durable activity-event store plus the webhook and query
// handlers served over HTTP.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "parkmon/errors.hpp"
#include "parkmon/time.hpp"
#include "parkmon/uplink_codec.hpp"

namespace parkmon {

struct ActivityEvent {
    std::uint64_t event_id = 0;
    std::string sensor_id;
    UtcTime received_at;
    UtcTime start_at;  // received_at - duration_s
    std::int64_t duration_s = 0;
    bool presence = false;
    std::int64_t break_count = 0;
    std::optional<std::uint16_t> battery_mv;
    std::string idempotency_key;

    bool operator==(const ActivityEvent&) const = default;
};

struct AggregateBucket {
    UtcTime bucket_start;
    std::int64_t total_active_s = 0;
    std::int64_t session_count = 0;
    std::int64_t presence_count = 0;

    bool operator==(const AggregateBucket&) const = default;
};

struct SensorSummary {
    std::string sensor_id;
    UtcTime first_seen;
    UtcTime last_seen;
    std::int64_t event_count = 0;
    std::optional<std::uint16_t> last_battery_mv;

    bool operator==(const SensorSummary&) const = default;
};

enum class BucketKind { Raw, Hour, Day };

std::optional<BucketKind> bucket_from_string(std::string_view s);
std::string_view to_string(BucketKind b);

struct ActivityQuery {
    std::optional<std::string> sensor;
    UtcTime from;
    UtcTime to;
    BucketKind bucket = BucketKind::Raw;
};

inline constexpr std::int64_t kMaxQueryRangeDays = 370;

class StorageError : public Error {
public:
    using Error::Error;
};

// Client-side problem with a query (maps to HTTP 400).
class QueryError : public Error {
public:
    using Error::Error;
};

// Append-only persistence. append() must not return until the event is
// durable; on failure it throws StorageError and the event is not stored.
class EventLog {
public:
    virtual ~EventLog() = default;
    virtual std::vector<ActivityEvent> load() = 0;
    virtual void append(const ActivityEvent& e) = 0;
};

// JSON-lines file, fsync'd per append. A torn final line (a crash mid-write,
// never acknowledged) is truncated away on load.
class FileEventLog : public EventLog {
public:
    explicit FileEventLog(std::string path);
    ~FileEventLog() override;
    FileEventLog(const FileEventLog&) = delete;
    FileEventLog& operator=(const FileEventLog&) = delete;

    std::vector<ActivityEvent> load() override;
    void append(const ActivityEvent& e) override;

private:
    std::string path_;
    int fd_ = -1;
};

class MemoryEventLog : public EventLog {
public:
    std::vector<ActivityEvent> load() override { return events_; }
    void append(const ActivityEvent& e) override { events_.push_back(e); }

private:
    std::vector<ActivityEvent> events_;
};

std::string event_to_json_line(const ActivityEvent& e);
ActivityEvent event_from_json_line(std::string_view line);

struct IngestResult {
    std::uint64_t event_id = 0;
    bool duplicate = false;
};

// Thread-safe: ingests serialize on one lock, queries share it and so always
// see a whole number of ingests. A waiting ingest holds the turnstile, which
// stops new queries from queueing ahead of it (the platform rwlock prefers
// readers and would otherwise starve writers under steady query load).
class EventStore {
public:
    explicit EventStore(std::unique_ptr<EventLog> log);

    IngestResult ingest(const ParsedEnvelope& env);

    std::vector<ActivityEvent> query_raw(const ActivityQuery& q) const;
    std::vector<AggregateBucket> query_buckets(const ActivityQuery& q) const;
    std::vector<SensorSummary> list_sensors() const;
    std::size_t size() const;

    // Throws QueryError for an inverted/oversized range or unknown sensor.
    void check_query(const ActivityQuery& q) const;

private:
    void check_query_locked(const ActivityQuery& q) const;

    std::unique_ptr<EventLog> log_;
    std::shared_lock<std::shared_mutex> read_lock() const;

    mutable std::mutex turnstile_;
    mutable std::shared_mutex mu_;
    std::vector<ActivityEvent> events_;
    std::unordered_map<std::string, std::uint64_t> by_key_;
    std::map<std::string, SensorSummary> sensors_;
    std::uint64_t next_id_ = 1;
};

std::string idempotency_key(const UplinkEnvelope& env);

struct HttpResponse {
    int status = 200;
    std::string body;
};

// Transport-independent request handling; the HTTP server is a thin shim.
class IngestionService {
public:
    explicit IngestionService(EventStore& store) : store_(store) {}

    HttpResponse post_uplink(const std::string& body);
    HttpResponse get_sensors() const;
    HttpResponse get_activities(const std::map<std::string, std::string>& params) const;

private:
    EventStore& store_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::string data_dir = "./parkmon-data";
};

class HttpServer {
public:
    explicit HttpServer(IngestionService& service);
    ~HttpServer();

    // Binds and returns the port; listen() then blocks until stop().
    int bind(const std::string& host, int port);
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace parkmon
