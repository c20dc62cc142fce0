#include "fex/cascade.hpp"

#include <algorithm>
#include <string>

namespace fex {
namespace {

Matrix to_matrix_d1(const std::vector<LabeledD1>& set) {
    Matrix x(set.size(), kTotalLandmarks);
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = 0; j < kTotalLandmarks; ++j) x(i, j) = set[i].features.d[j];
    return x;
}

Matrix to_matrix_d2(const std::vector<LabeledD2>& set) {
    Matrix x(set.size(), kPpgFeatureCount);
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = 0; j < kPpgFeatureCount; ++j) x(i, j) = set[i].features.f[j];
    return x;
}

Matrix row_from_d1(const MovementFeatures& d1) {
    Matrix x(1, kTotalLandmarks);
    for (std::size_t j = 0; j < kTotalLandmarks; ++j) x(0, j) = d1.d[j];
    return x;
}

Matrix row_from_d2(const PpgFeatures& d2) {
    Matrix x(1, kPpgFeatureCount);
    for (std::size_t j = 0; j < kPpgFeatureCount; ++j) x(0, j) = d2.f[j];
    return x;
}

}  // namespace

CascadeTrainResult fit_cascade(const std::vector<LabeledD1>& d1_set,
                               const std::vector<LabeledD2>& d2_set,
                               const CascadeConfig& config, const Matrix* nn1_holdout_x,
                               const Matrix* nn1_holdout_y, const Matrix* nn2_holdout_x,
                               const Matrix* nn2_holdout_y) {
    // NN1: class 0 = A (Pct100), class 1 = B (Pct0 or Pct50).
    std::vector<std::size_t> nn1_labels;
    for (const auto& s : d1_set) {
        if (s.label == Label::Unseen)
            throw DegenerateLabelsError("fit_cascade: Unseen trials cannot enter training");
        nn1_labels.push_back(s.label == Label::Pct100 ? 0 : 1);
    }
    if (std::count(nn1_labels.begin(), nn1_labels.end(), 0) == 0 ||
        std::count(nn1_labels.begin(), nn1_labels.end(), 1) == 0)
        throw DegenerateLabelsError("fit_cascade: NN1 training set is missing a class");

    // NN2: class 0 = Pct0, class 1 = Pct50; Pct100 PPG is excluded.
    std::vector<std::size_t> nn2_labels;
    for (const auto& s : d2_set) {
        if (s.label != Label::Pct0 && s.label != Label::Pct50)
            throw DegenerateLabelsError(
                "fit_cascade: NN2 training set must contain only Pct0/Pct50 samples");
        nn2_labels.push_back(s.label == Label::Pct0 ? 0 : 1);
    }
    if (std::count(nn2_labels.begin(), nn2_labels.end(), 0) == 0 ||
        std::count(nn2_labels.begin(), nn2_labels.end(), 1) == 0)
        throw DegenerateLabelsError("fit_cascade: NN2 training set is missing a class");

    MlpConfig nn1_config;
    nn1_config.input_dim = kTotalLandmarks;
    nn1_config.epochs = config.nn1_epochs;
    nn1_config.learning_rate = config.learning_rate;
    nn1_config.seed = config.seed;

    MlpConfig nn2_config = nn1_config;
    nn2_config.input_dim = kPpgFeatureCount;
    nn2_config.epochs = config.nn2_epochs;
    nn2_config.seed = config.seed ^ 0x5bd1e995ULL;
    nn2_config.early_stopping = config.early_stopping;

    auto nn1 = train(to_matrix_d1(d1_set), one_hot(nn1_labels, 2), nn1_config,
                     nn1_holdout_x, nn1_holdout_y);
    auto nn2 = train(to_matrix_d2(d2_set), one_hot(nn2_labels, 2), nn2_config,
                     nn2_holdout_x, nn2_holdout_y);

    CascadeTrainResult result;
    result.model.nn1 = std::move(nn1.model);
    result.model.nn2 = std::move(nn2.model);
    result.model.seed = config.seed;
    result.model.nn1_epochs = config.nn1_epochs;
    result.model.nn2_epochs = config.nn2_epochs;
    result.nn1_history = std::move(nn1.history);
    result.nn2_history = std::move(nn2.history);
    return result;
}

Prediction predict(const CascadeModel& model, const MovementFeatures& d1,
                   const std::optional<PpgFeatures>& d2) {
    Prediction pred;
    const Matrix p1 = model.nn1.predict(row_from_d1(d1));
    pred.prob_a = p1(0, 0);
    pred.prob_b = p1(0, 1);
    // Ties break toward the lower class index (A).
    if (pred.prob_a >= pred.prob_b) {
        pred.level = Label::Pct100;
        return pred;
    }
    if (!d2.has_value())
        throw MissingFeaturesError("predict: routed to group B but no PPG features given");
    const Matrix p2 = model.nn2.predict(row_from_d2(*d2));
    pred.level_probs = std::make_pair(p2(0, 0), p2(0, 1));
    pred.level = p2(0, 0) >= p2(0, 1) ? Label::Pct0 : Label::Pct50;
    return pred;
}

UnseenSummary predict_unseen(
    const CascadeModel& model,
    const std::vector<std::pair<MovementFeatures, PpgFeatures>>& trials) {
    UnseenSummary summary;
    for (const auto& [d1, d2] : trials) {
        Prediction p = predict(model, d1, d2);
        if (p.level != Label::Pct100) {
            ++summary.routed_b;
            if (p.level == Label::Pct0)
                ++summary.predicted_pct0;
            else
                ++summary.predicted_pct50;
        }
        summary.predictions.push_back(std::move(p));
    }
    return summary;
}

}  // namespace fex
