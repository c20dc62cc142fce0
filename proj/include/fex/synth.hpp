#pragma once

#include <cstdint>
#include <filesystem>
#include <map>

#include "fex/dataio.hpp"
#include "fex/types.hpp"

namespace fex {

// Calibrated synthetic generator standing in for the private study data.
// Movement magnitudes are ordered Pct0 < Pct50 < Pct100 with the nose group
// moving least; beat periods come from the per-class means.
struct SynthConfig {
    std::size_t n_subjects = 20;
    std::uint64_t seed = 0;
    std::map<Label, double> movement_means = {
        {Label::Pct0, 0.6}, {Label::Pct50, 1.2}, {Label::Pct100, 5.0}};
    std::map<Label, double> beat_period_means = {
        {Label::Pct0, 1.03}, {Label::Pct50, 0.86}, {Label::Pct100, 0.72}};
    double noise_scale = 0.05;
    bool include_unseen = false;
    double fps = 50.0;
    double ppg_rate = 128.0;
    double video_seconds = 9.0;
    double ppg_seconds = 7.0;
    std::filesystem::path out_dir;
};

// Writes one landmark + one PPG file per trial plus a manifest under
// config.out_dir; byte-identical output for identical configs.
Dataset synth_dataset(const SynthConfig& config);

}  // namespace fex
