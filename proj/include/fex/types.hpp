#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fex {

enum class Label { Pct0, Pct50, Pct100, Unseen };

std::string to_string(Label label);
Label parse_label(const std::string& text);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Per-frame 2D landmark coordinates, 68 raw or 128 derived points per frame.
struct LandmarkTrajectory {
    std::vector<std::vector<Point>> frames;
    double fps = 50.0;

    std::size_t frame_count() const { return frames.size(); }
    std::size_t points_per_frame() const { return frames.empty() ? 0 : frames.front().size(); }
};

// Uniformly sampled PPG waveform in raw device units.
struct PpgRecord {
    std::vector<double> samples;
    double rate = 0.0;
    double t0 = 0.0;

    double duration() const { return static_cast<double>(samples.size()) / rate; }
};

// One PPG pulse: first local minimum, local maximum, ending minimum.
struct Beat {
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientBeatsError : std::runtime_error {
    InsufficientBeatsError(const std::string& what, std::size_t found)
        : std::runtime_error(what), beats_found(found) {}
    std::size_t beats_found;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateLabelsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFeaturesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fex
