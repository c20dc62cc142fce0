#include "fex/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fex {
namespace {

// iBUG 68-point layout: jaw 0-16, brows 17-26, nose 27-35, eyes 36-47,
// mouth 48-67.
constexpr std::size_t kLeftUpper[] = {36, 41, 40, 39, 31};
constexpr std::size_t kLeftLower[] = {1, 2, 3, 4, 5, 6, 7};
constexpr std::size_t kRightUpper[] = {45, 46, 47, 42, 35};
constexpr std::size_t kRightLower[] = {15, 14, 13, 12, 11, 10, 9};

Point lerp(const Point& p, const Point& q, double t) {
    return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

double dist(const Point& p, const Point& q) {
    return std::hypot(q.x - p.x, q.y - p.y);
}

// Samples the polyline at `count` equally spaced arc-length parameters,
// endpoints included.
std::vector<Point> resample_polyline(const std::vector<Point>& poly, std::size_t count) {
    std::vector<double> cum(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i)
        cum[i] = cum[i - 1] + dist(poly[i - 1], poly[i]);
    const double total = cum.back();

    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        if (total == 0.0) {
            out.push_back(poly.front());
            continue;
        }
        const double s = total * static_cast<double>(c) / static_cast<double>(count - 1);
        auto it = std::lower_bound(cum.begin(), cum.end(), s);
        std::size_t hi = std::min<std::size_t>(it - cum.begin(), poly.size() - 1);
        if (hi == 0) {
            out.push_back(poly.front());
            continue;
        }
        const std::size_t lo = hi - 1;
        const double seg = cum[hi] - cum[lo];
        const double t = seg == 0.0 ? 0.0 : (s - cum[lo]) / seg;
        out.push_back(lerp(poly[lo], poly[hi], t));
    }
    return out;
}

std::vector<Point> pick(const std::vector<Point>& frame, const std::size_t* idx,
                        std::size_t count) {
    std::vector<Point> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = frame[idx[i]];
    return out;
}

// 5x6 cheek grid: six columns pair the upper (eyelid + nose wing) and lower
// (jaw) boundary samples; five points per column at t = k/6.
void append_cheek(const std::vector<Point>& frame, const std::size_t* upper_idx,
                  std::size_t upper_n, const std::size_t* lower_idx, std::size_t lower_n,
                  std::vector<Point>& out) {
    const auto upper = resample_polyline(pick(frame, upper_idx, upper_n), 6);
    const auto lower = resample_polyline(pick(frame, lower_idx, lower_n), 6);
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t k = 1; k <= 5; ++k)
            out.push_back(lerp(upper[c], lower[c], static_cast<double>(k) / 6.0));
}

}  // namespace

const std::array<std::string, LandmarkGroups::kGroupCount>& LandmarkGroups::names() {
    static const std::array<std::string, kGroupCount> kNames = {
        "contour",    "left_eye_brow", "right_eye_brow", "nose",
        "lips",       "left_cheek",    "right_cheek"};
    return kNames;
}

const std::array<std::vector<std::size_t>, LandmarkGroups::kGroupCount>&
LandmarkGroups::indices() {
    static const auto kIndices = [] {
        std::array<std::vector<std::size_t>, kGroupCount> g;
        for (std::size_t i = 0; i <= 16; ++i) g[0].push_back(i);
        for (std::size_t i = 17; i <= 21; ++i) g[1].push_back(i);
        for (std::size_t i = 36; i <= 41; ++i) g[1].push_back(i);
        for (std::size_t i = 22; i <= 26; ++i) g[2].push_back(i);
        for (std::size_t i = 42; i <= 47; ++i) g[2].push_back(i);
        for (std::size_t i = 27; i <= 35; ++i) g[3].push_back(i);
        for (std::size_t i = 48; i <= 67; ++i) g[4].push_back(i);
        for (std::size_t i = 68; i <= 97; ++i) g[5].push_back(i);
        for (std::size_t i = 98; i <= 127; ++i) g[6].push_back(i);
        return g;
    }();
    return kIndices;
}

LandmarkTrajectory trim_trajectory(const LandmarkTrajectory& traj, double drop_seconds,
                                   double fps) {
    if (drop_seconds < 0.0) throw UsageError("trim: drop_seconds must be >= 0");
    const auto drop = static_cast<std::size_t>(drop_seconds * fps);
    if (traj.frames.size() <= drop)
        throw InsufficientDataError("trim: trajectory has " +
                                    std::to_string(traj.frames.size()) +
                                    " frames, cannot drop " + std::to_string(drop));
    LandmarkTrajectory out;
    out.fps = traj.fps;
    out.frames.assign(traj.frames.begin() + static_cast<std::ptrdiff_t>(drop),
                      traj.frames.end());
    return out;
}

std::vector<Point> derive_cheek_landmarks(const std::vector<Point>& frame) {
    if (frame.size() != kInputLandmarks)
        throw FormatError("derive_cheek_landmarks: expected 68 points, got " +
                          std::to_string(frame.size()));
    std::vector<Point> out = frame;
    out.reserve(kTotalLandmarks);
    append_cheek(frame, kLeftUpper, std::size(kLeftUpper), kLeftLower,
                 std::size(kLeftLower), out);
    append_cheek(frame, kRightUpper, std::size(kRightUpper), kRightLower,
                 std::size(kRightLower), out);
    return out;
}

LandmarkTrajectory derive_cheek_landmarks(const LandmarkTrajectory& traj) {
    if (traj.points_per_frame() == kTotalLandmarks) return traj;
    LandmarkTrajectory out;
    out.fps = traj.fps;
    out.frames.reserve(traj.frames.size());
    for (const auto& frame : traj.frames) out.frames.push_back(derive_cheek_landmarks(frame));
    return out;
}

MovementFeatures average_movement(const LandmarkTrajectory& traj) {
    if (traj.frames.empty()) throw InsufficientDataError("average_movement: empty trajectory");
    if (traj.points_per_frame() != kTotalLandmarks)
        throw FormatError("average_movement: expected 128 points per frame, got " +
                          std::to_string(traj.points_per_frame()));
    const auto n = traj.frames.size();
    const auto& first = traj.frames.front();
    MovementFeatures features;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& frame = traj.frames[i];
        for (std::size_t j = 0; j < kTotalLandmarks; ++j) {
            const double dx = frame[j].x - first[j].x;
            const double dy = frame[j].y - first[j].y;
            if (!std::isfinite(dx) || !std::isfinite(dy))
                throw NumericError("average_movement: non-finite coordinate at frame " +
                                   std::to_string(i) + ", landmark " + std::to_string(j));
            features.d[j] += std::sqrt(dx * dx + dy * dy);
        }
    }
    for (auto& v : features.d) v /= static_cast<double>(n);
    return features;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw UsageError("quantile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<GroupSummary> group_movement_stats(const MovementFeatures& features) {
    std::vector<GroupSummary> out;
    out.reserve(LandmarkGroups::kGroupCount);
    for (std::size_t g = 0; g < LandmarkGroups::kGroupCount; ++g) {
        const auto& idx = LandmarkGroups::indices()[g];
        std::vector<double> values;
        values.reserve(idx.size());
        for (auto j : idx) values.push_back(features.d[j]);
        GroupSummary s;
        s.name = LandmarkGroups::names()[g];
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                 static_cast<double>(values.size());
        s.min = *std::min_element(values.begin(), values.end());
        s.max = *std::max_element(values.begin(), values.end());
        s.q1 = quantile(values, 0.25);
        s.median = quantile(values, 0.5);
        s.q3 = quantile(values, 0.75);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fex
