#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "fex/types.hpp"

namespace fex {

// Row-major dense matrix, rows = samples.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

enum class Activation { Elu, Identity };
enum class Mode { Train, Infer };

struct MlpConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims = {35, 35, 35};
    std::size_t output_dim = 2;
    double elu_alpha = 1.0;
    double dropout_rate = 0.5;
    std::size_t epochs = 200;
    double learning_rate = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool use_batchnorm = true;
    Activation activation = Activation::Elu;
    // Patience-based early stopping on holdout loss; off by default.
    bool early_stopping = false;
    std::size_t patience = 25;
};

inline constexpr double kBatchnormEps = 1e-5;
inline constexpr double kLogEps = 1e-12;
inline constexpr double kBatchnormMomentum = 0.9;

double elu(double x, double alpha = 1.0);

struct Layer {
    Matrix weight;             // in x out
    std::vector<double> bias;  // out
    // Batchnorm parameters, hidden layers only.
    std::vector<double> gamma, beta, running_mean, running_var;
    bool has_batchnorm = false;
};

// Per-feature standardization fitted on training data. Zero-variance
// features get SD clamped to 1.
struct Scaler {
    std::vector<double> mean, sd;

    Matrix apply(const Matrix& x) const;
    Matrix invert(const Matrix& x) const;
};

struct LayerCache {
    Matrix input;           // pre-affine
    Matrix z;               // post-affine
    Matrix xhat;            // normalized (batchnorm layers)
    std::vector<double> mu, inv_sigma;
    Matrix pre_activation;  // post-batchnorm
    Matrix activated;
    Matrix mask;            // dropout mask with inverted scaling baked in
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Matrix probs;
};

struct MlpModel {
    MlpConfig config;
    std::vector<Layer> layers;  // hidden layers then output layer
    Scaler scaler;

    // Expects already-standardized input.
    Matrix forward(const Matrix& x, Mode mode, std::mt19937_64* rng = nullptr,
                   ForwardCache* cache = nullptr) const;
    // Applies the scaler, then Infer-mode forward.
    Matrix predict(const Matrix& raw) const;
};

struct TrainHistory {
    std::vector<double> train_loss, train_acc;
    std::vector<double> test_loss, test_acc;  // empty without a holdout
    bool has_test = false;
};

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias, gamma, beta;
};

struct AdamState {
    Gradients m, v;
    std::size_t t = 0;
};

double cross_entropy(const Matrix& probs, const Matrix& targets);

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& targets);

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               const MlpConfig& config);

MlpModel init_model(const MlpConfig& config, std::mt19937_64& rng);

struct TrainResult {
    MlpModel model;
    TrainHistory history;
};

// Full-batch Adam training; deterministic given config.seed. An optional
// holdout is evaluated per epoch in Infer mode for reporting.
TrainResult train(const Matrix& x, const Matrix& y_onehot, const MlpConfig& config,
                  const Matrix* holdout_x = nullptr, const Matrix* holdout_y = nullptr);

// Compares analytic gradients against central finite differences on random
// small models with frozen dropout masks; returns the max relative error.
double gradient_check(const MlpConfig& config, std::size_t trials, double h,
                      std::uint64_t seed = 42);

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes);
std::size_t argmax_row(const Matrix& m, std::size_t row);
double accuracy(const Matrix& probs, const Matrix& targets);

}  // namespace fex
