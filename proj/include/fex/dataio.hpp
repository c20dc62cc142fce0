#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fex/cascade.hpp"
#include "fex/types.hpp"

namespace fex {

struct TrialRecord {
    std::string subject_id;
    Label label = Label::Pct0;
    std::filesystem::path landmark_path;
    std::filesystem::path ppg_path;
};

struct Dataset {
    std::vector<TrialRecord> trials;
    double fps = 50.0;
    double ppg_rate = 128.0;

    std::vector<std::string> subject_ids() const;
    std::vector<const TrialRecord*> trials_for(const std::string& subject_id) const;
};

// CSV with header `frame,x0,y0,...` for 68 or 128 points; frame indices
// strictly increasing.
LandmarkTrajectory load_landmark_trajectory(const std::filesystem::path& path, double fps);
void save_landmark_trajectory(const LandmarkTrajectory& traj,
                              const std::filesystem::path& path);

// CSV with `t,value` columns or a single `value` column (rate then required).
// Two-column input must be uniformly sampled within 1e-6 s jitter.
PpgRecord load_ppg(const std::filesystem::path& path, double rate = 0.0);
void save_ppg(const PpgRecord& ppg, const std::filesystem::path& path);

// Manifest: header line then one `subject_id,label,landmark_path,ppg_path`
// record per trial. Relative paths resolve against the manifest directory.
Dataset load_manifest(const std::filesystem::path& path);
void save_manifest(const Dataset& dataset, const std::filesystem::path& path);

inline constexpr int kModelFormatVersion = 1;

// Versioned JSON blob; numeric fields round-trip losslessly.
void save_model(const CascadeModel& model, const std::filesystem::path& path);
CascadeModel load_model(const std::filesystem::path& path);

}  // namespace fex
