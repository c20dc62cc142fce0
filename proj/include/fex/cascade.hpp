#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "fex/landmarks.hpp"
#include "fex/mlp.hpp"
#include "fex/ppg.hpp"
#include "fex/types.hpp"

namespace fex {

struct CascadeConfig {
    std::size_t nn1_epochs = 200;
    std::size_t nn2_epochs = 175;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    bool early_stopping = false;
};

// Stage one (NN1, D1 -> A/B) and stage two (NN2, D2 -> 0%/50%).
struct CascadeModel {
    MlpModel nn1;  // 128 -> 2, class 0 = A (Pct100), class 1 = B
    MlpModel nn2;  // 21 -> 2, class 0 = Pct0, class 1 = Pct50
    std::uint64_t seed = 0;
    std::size_t nn1_epochs = 0;
    std::size_t nn2_epochs = 0;
};

struct Prediction {
    Label level = Label::Pct0;
    double prob_a = 0.0, prob_b = 0.0;
    // Present only when routed to NN2.
    std::optional<std::pair<double, double>> level_probs;
};

struct LabeledD1 {
    MovementFeatures features;
    Label label = Label::Pct0;
};

struct LabeledD2 {
    PpgFeatures features;
    Label label = Label::Pct0;
};

struct CascadeTrainResult {
    CascadeModel model;
    TrainHistory nn1_history, nn2_history;
};

// NN1 trains on all D1 samples with binary labels {A = Pct100, B = rest};
// NN2 trains on the Pct0/Pct50 D2 samples only. Pct100 samples in d2_set
// are rejected.
CascadeTrainResult fit_cascade(const std::vector<LabeledD1>& d1_set,
                               const std::vector<LabeledD2>& d2_set,
                               const CascadeConfig& config,
                               const Matrix* nn1_holdout_x = nullptr,
                               const Matrix* nn1_holdout_y = nullptr,
                               const Matrix* nn2_holdout_x = nullptr,
                               const Matrix* nn2_holdout_y = nullptr);

// Argmax routing; exact ties break toward the lower class index (A, Pct0).
Prediction predict(const CascadeModel& model, const MovementFeatures& d1,
                   const std::optional<PpgFeatures>& d2);

struct UnseenSummary {
    std::vector<Prediction> predictions;
    std::size_t routed_b = 0;
    std::size_t predicted_pct0 = 0;
    std::size_t predicted_pct50 = 0;
};

UnseenSummary predict_unseen(const CascadeModel& model,
                             const std::vector<std::pair<MovementFeatures, PpgFeatures>>& trials);

}  // namespace fex
