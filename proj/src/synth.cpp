#include "fex/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fex/landmarks.hpp"

namespace fex {
namespace {

constexpr double kPi = std::numbers::pi;

// Canonical 68-point face template in a ~200x200 px box, iBUG ordering.
std::vector<Point> face_template() {
    std::vector<Point> pts(kInputLandmarks);
    for (std::size_t i = 0; i <= 16; ++i) {  // jaw
        const double t = kPi * static_cast<double>(i) / 16.0;
        pts[i] = {100.0 - 60.0 * std::cos(t), 80.0 + 70.0 * std::sin(t)};
    }
    for (std::size_t i = 0; i < 5; ++i) {  // brows
        pts[17 + i] = {55.0 + 8.75 * static_cast<double>(i),
                       66.0 - 3.0 * std::sin(kPi * static_cast<double>(i) / 4.0)};
        pts[22 + i] = {110.0 + 8.75 * static_cast<double>(i),
                       66.0 - 3.0 * std::sin(kPi * static_cast<double>(i) / 4.0)};
    }
    for (std::size_t i = 0; i < 4; ++i)  // nose bridge
        pts[27 + i] = {100.0, 75.0 + 10.0 * static_cast<double>(i)};
    for (std::size_t i = 0; i < 5; ++i)  // nose bottom
        pts[31 + i] = {88.0 + 6.0 * static_cast<double>(i),
                       112.0 + 2.0 * std::sin(kPi * static_cast<double>(i) / 4.0)};
    const double eye_dx[6] = {-12.0, -5.0, 5.0, 12.0, 5.0, -5.0};
    const double eye_dy[6] = {0.0, -4.0, -4.0, 0.0, 4.0, 4.0};
    for (std::size_t i = 0; i < 6; ++i) {
        pts[36 + i] = {72.0 + eye_dx[i], 78.0 + eye_dy[i]};
        pts[42 + i] = {128.0 + eye_dx[i], 78.0 + eye_dy[i]};
    }
    for (std::size_t i = 0; i < 12; ++i) {  // outer lips
        const double t = 2.0 * kPi * static_cast<double>(i) / 12.0;
        pts[48 + i] = {100.0 - 22.0 * std::cos(t), 130.0 + 9.0 * std::sin(t)};
    }
    for (std::size_t i = 0; i < 8; ++i) {  // inner lips
        const double t = 2.0 * kPi * static_cast<double>(i) / 8.0;
        pts[60 + i] = {100.0 - 12.0 * std::cos(t), 130.0 + 4.0 * std::sin(t)};
    }
    return pts;
}

bool in_group(std::size_t landmark, std::size_t lo, std::size_t hi) {
    return landmark >= lo && landmark <= hi;
}

struct TrialMotion {
    std::vector<double> amplitude;  // per landmark
    std::vector<double> dir_x, dir_y, phase;
};

TrialMotion draw_motion(std::mt19937_64& rng, double class_mean, double subject_factor,
                        bool talking) {
    TrialMotion m;
    m.amplitude.resize(kInputLandmarks);
    m.dir_x.resize(kInputLandmarks);
    m.dir_y.resize(kInputLandmarks);
    m.phase.resize(kInputLandmarks);
    std::uniform_real_distribution<double> spread(0.8, 1.2);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    for (std::size_t j = 0; j < kInputLandmarks; ++j) {
        double group_factor = 1.0;
        if (in_group(j, 27, 35)) group_factor = 0.15;          // nose moves least
        if (talking && in_group(j, 48, 67)) group_factor = 3.0;  // lips inflated
        m.amplitude[j] = class_mean * subject_factor * group_factor * spread(rng);
        const double a = angle(rng);
        m.dir_x[j] = std::cos(a);
        m.dir_y[j] = std::sin(a);
        m.phase[j] = angle(rng);
    }
    return m;
}

LandmarkTrajectory make_trajectory(std::mt19937_64& rng, const std::vector<Point>& base,
                                   const TrialMotion& motion, double class_mean,
                                   const SynthConfig& cfg) {
    const auto n_frames = static_cast<std::size_t>(cfg.video_seconds * cfg.fps);
    LandmarkTrajectory traj;
    traj.fps = cfg.fps;
    traj.frames.reserve(n_frames);
    std::normal_distribution<double> jitter(0.0, cfg.noise_scale * class_mean);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const double t = static_cast<double>(i) / cfg.fps;
        const double ramp = std::min(t / 2.0, 1.0);  // settles after the trim window
        std::vector<Point> frame(kInputLandmarks);
        for (std::size_t j = 0; j < kInputLandmarks; ++j) {
            const double w =
                ramp * (0.75 + 0.25 * std::sin(2.0 * kPi * 0.8 * t + motion.phase[j]));
            const double d = motion.amplitude[j] * w;
            frame[j] = {base[j].x + d * motion.dir_x[j] + jitter(rng),
                        base[j].y + d * motion.dir_y[j] + jitter(rng)};
        }
        traj.frames.push_back(std::move(frame));
    }
    return traj;
}

PpgRecord make_ppg(std::mt19937_64& rng, double period_mean, const SynthConfig& cfg) {
    // Consecutive raised-cosine pulses; periods and amplitudes vary per beat.
    std::normal_distribution<double> period_noise(0.0, 0.04 * period_mean);
    std::normal_distribution<double> amp_noise(0.0, 0.05);
    std::vector<double> starts{0.0}, periods, amps;
    while (starts.back() < cfg.ppg_seconds + 2.0) {
        const double p = std::max(0.4 * period_mean, period_mean + period_noise(rng));
        periods.push_back(p);
        amps.push_back(1.0 + amp_noise(rng));
        starts.push_back(starts.back() + p);
    }
    PpgRecord ppg;
    ppg.rate = cfg.ppg_rate;
    const auto n = static_cast<std::size_t>(cfg.ppg_seconds * cfg.ppg_rate);
    std::size_t beat = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / cfg.ppg_rate;
        while (beat + 1 < starts.size() && t >= starts[beat + 1]) ++beat;
        const double tau = (t - starts[beat]) / periods[beat];
        ppg.samples.push_back(amps[beat] * 0.5 * (1.0 - std::cos(2.0 * kPi * tau)));
    }
    return ppg;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& config) {
    if (config.n_subjects < 2) throw UsageError("synth_dataset: need at least 2 subjects");
    if (config.noise_scale < 0.0) throw UsageError("synth_dataset: noise_scale must be >= 0");
    if (config.out_dir.empty()) throw UsageError("synth_dataset: output directory required");
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw IoError("synth_dataset: cannot create " + config.out_dir.string());

    std::mt19937_64 rng(config.seed);
    const auto base_face = face_template();
    Dataset ds;
    ds.fps = config.fps;
    ds.ppg_rate = config.ppg_rate;

    std::vector<Label> labels = {Label::Pct0, Label::Pct50, Label::Pct100};
    if (config.include_unseen) labels.push_back(Label::Unseen);

    for (std::size_t s = 0; s < config.n_subjects; ++s) {
        char id[8];
        std::snprintf(id, sizeof(id), "s%02zu", s + 1);
        const std::string subject(id);
        const auto subject_dir = config.out_dir / subject;
        std::filesystem::create_directories(subject_dir);

        std::normal_distribution<double> face_jitter(0.0, 1.5);
        std::uniform_real_distribution<double> subject_scale(0.9, 1.1);
        std::vector<Point> face = base_face;
        for (auto& p : face) {
            p.x += face_jitter(rng);
            p.y += face_jitter(rng);
        }
        const double factor = subject_scale(rng);

        for (Label label : labels) {
            const bool talking = label == Label::Unseen;
            const double move_mean =
                talking ? 0.5 * (config.movement_means.at(Label::Pct0) +
                                 config.movement_means.at(Label::Pct50))
                        : config.movement_means.at(label);
            const double period_mean = talking ? config.beat_period_means.at(Label::Pct0)
                                               : config.beat_period_means.at(label);

            const auto motion = draw_motion(rng, move_mean, factor, talking);
            const auto traj = make_trajectory(rng, face, motion, move_mean, config);
            const auto ppg = make_ppg(rng, period_mean, config);

            const std::string tag = talking ? "talking" : to_string(label);
            TrialRecord trial;
            trial.subject_id = subject;
            trial.label = label;
            trial.landmark_path = subject_dir / ("lm_" + tag + ".csv");
            trial.ppg_path = subject_dir / ("ppg_" + tag + ".csv");
            save_landmark_trajectory(traj, trial.landmark_path);
            save_ppg(ppg, trial.ppg_path);
            ds.trials.push_back(std::move(trial));
        }
    }
    save_manifest(ds, config.out_dir / "manifest.csv");
    return ds;
}

}  // namespace fex
