#include "parkmon/sensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parkmon/errors.hpp"

namespace parkmon {

void DetectorConfig::validate() const {
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be > 0");
    if (window_len < 2 || window_len > SampleWindow::kMaxCapacity)
        throw ConfigError("window_len must be in [2, " + std::to_string(SampleWindow::kMaxCapacity) + "]");
    if (eval_period_s < 1) throw ConfigError("eval_period_s must be >= 1");
    if (static_cast<double>(window_len) / sample_rate_hz + 1e-9 < static_cast<double>(eval_period_s))
        throw ConfigError("window must span at least one evaluation period");
    if (calm_timeout_s <= min_session_s) throw ConfigError("calm_timeout_s must exceed min_session_s");
    if (min_session_s < 1) throw ConfigError("min_session_s must be >= 1");
    if (!(threshold_factor > 1.0)) throw ConfigError("threshold_factor must be > 1");
    if (!(baseline_alpha > 0.0 && baseline_alpha <= 1.0)) throw ConfigError("baseline_alpha must be in (0, 1]");
    if (!(variance_floor > 0.0)) throw ConfigError("variance_floor must be > 0");
    if (!(full_scale_mg > 0.0)) throw ConfigError("full_scale_mg must be > 0");
    if (break_min_gap_s < 2) throw ConfigError("break_min_gap_s must be >= 2");
}

SampleWindow::SampleWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0 || capacity > kMaxCapacity) throw ConfigError("window capacity out of range");
}

void SampleWindow::push(const AccelSample& s) {
    if (size_ < capacity_) {
        buf_[(head_ + size_) % capacity_] = s;
        ++size_;
    } else {
        buf_[head_] = s;
        head_ = (head_ + 1) % capacity_;
    }
}

const AccelSample& SampleWindow::operator[](std::size_t i) const {
    return buf_[(head_ + i) % capacity_];
}

double window_variance(const SampleWindow& w) {
    if (!w.full()) throw InsufficientData("window holds " + std::to_string(w.size()) + " of " +
                                          std::to_string(w.capacity()) + " samples");
    // Welford update per axis.
    double mean[3] = {0.0, 0.0, 0.0};
    double m2[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) {
        const AccelSample& s = w[i];
        const double x[3] = {s.ax, s.ay, s.az};
        const double n = static_cast<double>(i + 1);
        for (int a = 0; a < 3; ++a) {
            const double delta = x[a] - mean[a];
            mean[a] += delta / n;
            m2[a] += delta * (x[a] - mean[a]);
        }
    }
    return (m2[0] + m2[1] + m2[2]) / static_cast<double>(w.size());
}

SegmentStep segment_step(SegmenterState& seg, const DetectorConfig& cfg, std::int64_t now, bool active,
                         std::uint32_t sensor_id) {
    SegmentStep out;
    if (seg.phase == Phase::Idle) {
        if (active) {
            seg.phase = Phase::Active;
            seg.first_active_t = now;
            seg.last_active_t = now;
            seg.break_count = 0;
            seg.presence = false;
            out.session_started = true;
        }
        return out;
    }

    if (active) {
        if (now - seg.last_active_t >= cfg.break_min_gap_s) ++seg.break_count;
        seg.last_active_t = now;
    } else if (now - seg.last_active_t >= cfg.calm_timeout_s) {
        const std::int64_t duration = seg.last_active_t - seg.first_active_t + cfg.eval_period_s;
        if (duration >= cfg.min_session_s) {
            out.emitted = SessionRecord{sensor_id, duration, seg.presence, seg.break_count, now};
        }
        seg = SegmenterState{};
    }
    return out;
}

namespace {

DetectorState fresh_state(const DetectorConfig& cfg) {
    DetectorState s;
    s.window = SampleWindow{cfg.window_len};
    return s;
}

void push_into(DetectorState& st, const DetectorConfig& cfg, const AccelSample& s) {
    if (st.have_last_sample) {
        const double dt = s.t - st.last_sample_t;
        if (std::abs(dt - cfg.sample_period_s()) > 1e-6) {
            throw StreamDiscontinuity("sample at t=" + std::to_string(s.t) + " does not follow t=" +
                                      std::to_string(st.last_sample_t) + " by one sampling period");
        }
    }
    if (!std::isfinite(s.ax) || !std::isfinite(s.ay) || !std::isfinite(s.az) ||
        std::abs(s.ax) > cfg.full_scale_mg || std::abs(s.ay) > cfg.full_scale_mg ||
        std::abs(s.az) > cfg.full_scale_mg) {
        throw DomainError("sample at t=" + std::to_string(s.t) + " exceeds full-scale range");
    }
    st.window.push(s);
    st.have_last_sample = true;
    st.last_sample_t = s.t;
}

EvalOutcome evaluate_into(DetectorState& st, const DetectorConfig& cfg, std::int64_t now, std::uint32_t id) {
    if (!st.window.full()) throw InsufficientData("evaluation before the sample window is full");
    if (st.have_last_eval && now <= st.last_eval_t)
        throw StreamDiscontinuity("evaluation time " + std::to_string(now) + " is not after " +
                                  std::to_string(st.last_eval_t));

    EvalOutcome out;
    out.variance = window_variance(st.window);
    if (!st.baseline_seeded) {
        st.baseline_var = std::max(cfg.variance_floor, out.variance);
        st.baseline_seeded = true;
    }
    const double threshold = std::max(cfg.variance_floor, cfg.threshold_factor * st.baseline_var);
    out.active = out.variance > threshold;

    const bool was_idle = st.seg.phase == Phase::Idle;
    SegmentStep step = segment_step(st.seg, cfg, now, out.active, id);
    out.session_started = step.session_started;
    out.emitted = step.emitted;

    // Baseline tracks quiet seconds only; frozen for the whole session.
    if (was_idle && !out.active) {
        st.baseline_var = std::max(cfg.variance_floor,
                                   (1.0 - cfg.baseline_alpha) * st.baseline_var + cfg.baseline_alpha * out.variance);
    }
    st.have_last_eval = true;
    st.last_eval_t = now;
    return out;
}

}  // namespace

ActivityDetector::ActivityDetector(DetectorConfig cfg, std::uint32_t sensor_id)
    : cfg_(cfg), sensor_id_(sensor_id) {
    cfg_.validate();
    state_ = fresh_state(cfg_);
}

void ActivityDetector::push_sample(const AccelSample& s) { push_into(state_, cfg_, s); }

EvalOutcome ActivityDetector::evaluate_second(std::int64_t now) {
    return evaluate_into(state_, cfg_, now, sensor_id_);
}

PresenceResult ActivityDetector::presence_cascade(const ToFReading& tof) {
    return parkmon::presence_cascade(state_, tof);
}

void ActivityDetector::reset() { state_ = fresh_state(cfg_); }

DetectorState make_detector_state(const DetectorConfig& cfg) {
    cfg.validate();
    return fresh_state(cfg);
}

DetectorState push_sample(DetectorState state, const DetectorConfig& cfg, const AccelSample& s) {
    push_into(state, cfg, s);
    return state;
}

std::pair<DetectorState, EvalOutcome> evaluate_second(DetectorState state, const DetectorConfig& cfg,
                                                      std::int64_t now, std::uint32_t sensor_id) {
    EvalOutcome out = evaluate_into(state, cfg, now, sensor_id);
    return {std::move(state), out};
}

PresenceResult presence_cascade(DetectorState& state, const ToFReading& tof) {
    PresenceResult r;
    r.presence = tof.valid && std::isfinite(tof.range_m) && tof.range_m >= 0.0 && tof.range_m <= kPresenceRangeM;
    r.active_sensing_s = kPresenceSensingS;
    if (state.seg.phase == Phase::Active) state.seg.presence = r.presence;
    return r;
}

bool is_eval_instant(double t, const DetectorConfig& cfg, std::int64_t& now) {
    const double r = std::round(t);
    if (std::abs(t - r) > 1e-6) return false;
    now = static_cast<std::int64_t>(r);
    return now % cfg.eval_period_s == 0;
}

std::vector<SessionRecord> detect_sessions(std::span<const AccelSample> samples, const DetectorConfig& cfg,
                                           std::uint32_t sensor_id) {
    ActivityDetector det(cfg, sensor_id);
    std::vector<SessionRecord> out;
    for (const auto& s : samples) {
        det.push_sample(s);
        std::int64_t now = 0;
        if (!det.state().window.full() || !is_eval_instant(s.t, cfg, now)) continue;
        EvalOutcome o = det.evaluate_second(now);
        if (o.session_started) det.presence_cascade(ToFReading{});
        if (o.emitted) out.push_back(*o.emitted);
    }
    return out;
}

}  // namespace parkmon
