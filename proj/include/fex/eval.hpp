#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fex/cascade.hpp"
#include "fex/dataio.hpp"
#include "fex/types.hpp"

namespace fex {

struct TrialOutcome {
    std::string subject_id;
    Label truth = Label::Pct0;
    Prediction prediction;
    // Direct NN2 pass on true group-B trials, independent of NN1 routing.
    std::optional<Label> nn2_level;

    bool correct() const { return truth == prediction.level; }
    bool nn1_correct() const {
        return (truth == Label::Pct100) == (prediction.level == Label::Pct100);
    }
};

struct FoldResult {
    std::string held_out_subject;
    std::vector<TrialOutcome> outcomes;
    TrainHistory nn1_history, nn2_history;
    // Trial keys (subject:label) that entered any fitted statistic.
    std::vector<std::string> training_trial_keys;
};

struct EvaluationReport {
    std::vector<std::string> subjects;
    // grid[label][subject index] = true for 'o'.
    std::map<Label, std::vector<bool>> grid;
    double nn1_accuracy = 0.0;       // A/B routing over all trials
    double nn2_accuracy = 0.0;       // over true group-B trials
    double overall_accuracy = 0.0;   // correct trials / total trials
    std::size_t total_trials = 0;
    std::size_t correct_trials = 0;
    // Per (subject,label) D1 group means for the box-plot report.
    std::map<Label, std::vector<std::array<double, LandmarkGroups::kGroupCount>>> group_means;
    // Per (subject,label) T3-T1 interval stats.
    std::map<Label, std::vector<IntervalStats>> t3t1_stats;
};

struct EvalConfig {
    CascadeConfig cascade;
    double trim_seconds = 2.0;
    double min_prominence = 0.1;
    double min_period = 0.3;
    std::size_t jobs = 1;
    bool record_test_curves = true;
};

struct TrialFeatures {
    std::string subject_id;
    Label label = Label::Pct0;
    MovementFeatures d1;
    PpgFeatures d2;
};

// Feature extraction for one trial: load, trim, derive cheeks, Eq-1 movement,
// beat segmentation, D2.
TrialFeatures extract_trial_features(const Dataset& dataset, const TrialRecord& trial,
                                     const EvalConfig& config);

struct LoocvResult {
    EvaluationReport report;
    std::vector<FoldResult> folds;
};

// One fold per subject; both networks and all scalers fit on the remaining
// subjects only. Per-fold seeds derive from the master seed XOR fold index.
LoocvResult loocv(const Dataset& dataset, const EvalConfig& config);

// Emits report.md, o/x grids, per-fold training-curve CSVs, group-movement
// box-plot SVG, and the T3-T1 interval SVG under out_dir, plus a run
// manifest with config, seeds, and artifact hashes.
void render_report(const LoocvResult& result, const EvalConfig& config,
                   const std::filesystem::path& out_dir);

struct RobustnessReport {
    UnseenSummary summary;
    std::vector<std::string> subject_ids;
};

RobustnessReport robustness_eval(const Dataset& dataset, const CascadeModel& model,
                                 const EvalConfig& config);

std::uint64_t fnv1a_file_hash(const std::filesystem::path& path);

}  // namespace fex
