#pragma once
// Independent reference implementations the tests compare against. Kept
// deliberately naive: no shared code with src/.

#include <cstdint>
#include <random>
#include <vector>

#include "parkmon/sensor_core.hpp"

namespace oracle {

// Two-pass population variance summed over the three axes.
inline double two_pass_variance(const std::vector<parkmon::AccelSample>& w) {
    const double n = static_cast<double>(w.size());
    double mx = 0, my = 0, mz = 0;
    for (const auto& s : w) {
        mx += s.ax;
        my += s.ay;
        mz += s.az;
    }
    mx /= n;
    my /= n;
    mz /= n;
    double vx = 0, vy = 0, vz = 0;
    for (const auto& s : w) {
        vx += (s.ax - mx) * (s.ax - mx);
        vy += (s.ay - my) * (s.ay - my);
        vz += (s.az - mz) * (s.az - mz);
    }
    return (vx + vy + vz) / n;
}

struct Expected {
    std::int64_t end_t;
    std::int64_t duration_s;
    std::int64_t break_count;
};

// Per-second activity flags (index = second) to the records the segmentation
// rules imply: sessions split once calm_timeout calm seconds have passed, a break is a re-activation >= break_gap seconds after the
// previous active second, records shorter than min_len are dropped.
inline std::vector<Expected> segment_flags(const std::vector<bool>& active, std::int64_t calm_timeout = 35,
                                           std::int64_t min_len = 10, std::int64_t break_gap = 5) {
    std::vector<Expected> out;
    std::int64_t first = -1, last = -1, breaks = 0;
    auto close = [&] {
        if (first >= 0 && last - first + 1 >= min_len) out.push_back({last + calm_timeout, last - first + 1, breaks});
        first = last = -1;
        breaks = 0;
    };
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(active.size()); ++t) {
        if (!active[static_cast<std::size_t>(t)]) continue;
        if (first >= 0 && t - last - 1 >= calm_timeout) close();  // calm seconds in between
        if (first < 0) {
            first = last = t;
            continue;
        }
        if (t - last >= break_gap) ++breaks;
        last = t;
    }
    if (first >= 0 && static_cast<std::int64_t>(active.size()) - 1 - last >= calm_timeout) close();
    return out;
}

}  // namespace oracle
