#pragma once

#include <array>
#include <string>
#include <vector>

#include "fex/types.hpp"

namespace fex {

inline constexpr std::size_t kInputLandmarks = 68;
inline constexpr std::size_t kTotalLandmarks = 128;
inline constexpr std::size_t kCheekPoints = 30;

// D1: per-landmark average displacement from the first frame, in pixels.
struct MovementFeatures {
    std::array<double, kTotalLandmarks> d{};
};

// Canonical landmark groups over the 128-point layout, keyed 1-7:
// 1 contour, 2 left eye+brow, 3 right eye+brow, 4 nose, 5 lips,
// 6 left cheek, 7 right cheek.
struct LandmarkGroups {
    static constexpr std::size_t kGroupCount = 7;
    static const std::array<std::string, kGroupCount>& names();
    static const std::array<std::vector<std::size_t>, kGroupCount>& indices();
};

struct GroupSummary {
    std::string name;
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Drops the first floor(drop_seconds * fps) frames.
LandmarkTrajectory trim_trajectory(const LandmarkTrajectory& traj, double drop_seconds,
                                   double fps);

// Extends a 68-point iBUG frame to 128 points by placing a 5x6 grid of
// points on each cheek between the lower-eyelid/nose-wing polyline and the
// jaw polyline.
std::vector<Point> derive_cheek_landmarks(const std::vector<Point>& frame);

// Applies derive_cheek_landmarks to every frame; 128-point input passes through.
LandmarkTrajectory derive_cheek_landmarks(const LandmarkTrajectory& traj);

// d_j = (1/n) sum_i ||p_ji - p_j1||, over all n frames including the first.
MovementFeatures average_movement(const LandmarkTrajectory& traj);

std::vector<GroupSummary> group_movement_stats(const MovementFeatures& features);

// Linear-interpolation quantile of a sorted-on-demand copy (q in [0,1]).
double quantile(std::vector<double> values, double q);

}  // namespace fex
