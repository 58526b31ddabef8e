#pragma once

// Activity detection on the sensor node: a 5 Hz accelerometer stream is kept
// in a short ring buffer, evaluated once per second for elevated variance,
// and segmented into exercise sessions that end after a calm timeout.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace parkmon {

struct AccelSample {
    double t = 0.0;   // seconds, monotonic
    double ax = 0.0;  // milli-g
    double ay = 0.0;
    double az = 0.0;
};

struct DetectorConfig {
    double sample_rate_hz = 5.0;
    std::size_t window_len = 10;
    std::int64_t eval_period_s = 1;
    std::int64_t calm_timeout_s = 35;
    std::int64_t min_session_s = 10;
    double threshold_factor = 5.0;
    double baseline_alpha = 0.05;
    double variance_floor = 4.0;    // (milli-g)^2
    double full_scale_mg = 2000.0;
    std::int64_t break_min_gap_s = 5;

    // Throws ConfigError listing the first broken constraint.
    void validate() const;

    double sample_period_s() const { return 1.0 / sample_rate_hz; }
};

// Fixed-capacity ring of the most recent samples, oldest evicted first.
class SampleWindow {
public:
    static constexpr std::size_t kMaxCapacity = 32;

    explicit SampleWindow(std::size_t capacity = 10);

    void push(const AccelSample& s);
    void clear() noexcept { size_ = 0; head_ = 0; }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return size_; }
    bool full() const noexcept { return size_ == capacity_; }
    bool empty() const noexcept { return size_ == 0; }

    // i = 0 is the oldest retained sample.
    const AccelSample& operator[](std::size_t i) const;
    const AccelSample& newest() const { return (*this)[size_ - 1]; }

private:
    std::array<AccelSample, kMaxCapacity> buf_{};
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;  // slot of the oldest sample
};

// Sum of per-axis population variances (trace of the covariance), computed
// in a single streaming pass. Throws InsufficientData unless the window is full.
double window_variance(const SampleWindow& w);

enum class Phase { Idle, Active };

struct SessionRecord {
    std::uint32_t sensor_id = 0;
    std::int64_t duration_s = 0;
    bool presence = false;
    std::int64_t break_count = 0;
    std::int64_t end_t = 0;  // local monotonic second of finalization

    bool operator==(const SessionRecord&) const = default;
};

// Pure segmentation of the per-second active flag into sessions. Separated
// from the variance test so the timing rules can be driven directly.
struct SegmenterState {
    Phase phase = Phase::Idle;
    std::int64_t first_active_t = 0;
    std::int64_t last_active_t = 0;
    std::int64_t break_count = 0;
    bool presence = false;
};

struct SegmentStep {
    bool session_started = false;
    std::optional<SessionRecord> emitted;
};

SegmentStep segment_step(SegmenterState& seg, const DetectorConfig& cfg, std::int64_t now, bool active,
                         std::uint32_t sensor_id);

struct DetectorState {
    SampleWindow window{10};
    SegmenterState seg;
    double baseline_var = 0.0;
    bool baseline_seeded = false;
    bool have_last_sample = false;
    double last_sample_t = 0.0;
    bool have_last_eval = false;
    std::int64_t last_eval_t = 0;

    Phase phase() const noexcept { return seg.phase; }
};

struct EvalOutcome {
    bool active = false;
    double variance = 0.0;
    bool session_started = false;  // Idle -> Active happened this second
    std::optional<SessionRecord> emitted;
};

struct ToFReading {
    double range_m = 0.0;
    bool valid = false;
};

struct PresenceResult {
    bool presence = false;
    double active_sensing_s = 0.0;
};

inline constexpr double kPresenceRangeM = 2.0;
inline constexpr double kPresenceSensingS = 0.08;

// Stateful wrapper around the detector transition functions; this is what the
// simulator runs per sensor.
class ActivityDetector {
public:
    explicit ActivityDetector(DetectorConfig cfg = {}, std::uint32_t sensor_id = 0);

    // Throws StreamDiscontinuity on a repeated/gapped timestamp and
    // DomainError on an axis beyond full scale. Never changes phase.
    void push_sample(const AccelSample& s);

    // Call every eval_period_s once the window is full.
    EvalOutcome evaluate_second(std::int64_t now);

    // Only meaningful right after a session_started outcome; marks the
    // running session with the presence result.
    PresenceResult presence_cascade(const ToFReading& tof);

    void reset();

    const DetectorState& state() const noexcept { return state_; }
    const DetectorConfig& config() const noexcept { return cfg_; }
    std::uint32_t sensor_id() const noexcept { return sensor_id_; }

private:
    DetectorConfig cfg_;
    std::uint32_t sensor_id_;
    DetectorState state_;
};

// Value-semantic forms of the transitions (state in, state out).
DetectorState make_detector_state(const DetectorConfig& cfg);
DetectorState push_sample(DetectorState state, const DetectorConfig& cfg, const AccelSample& s);
std::pair<DetectorState, EvalOutcome> evaluate_second(DetectorState state, const DetectorConfig& cfg,
                                                      std::int64_t now, std::uint32_t sensor_id = 0);
PresenceResult presence_cascade(DetectorState& state, const ToFReading& tof);

// Runs a fresh detector over one contiguous stream, evaluating at every whole
// evaluation period once the window is full. No ToF sensor, so presence is false.
std::vector<SessionRecord> detect_sessions(std::span<const AccelSample> samples, const DetectorConfig& cfg = {},
                                           std::uint32_t sensor_id = 0);

// True when t lands on an evaluation instant; `now` receives the second.
bool is_eval_instant(double t, const DetectorConfig& cfg, std::int64_t& now);

}  // namespace parkmon
