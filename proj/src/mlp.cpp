#include "fex/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fex {
namespace {

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double v = a(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    return out;
}

// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k)
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double v = a(k, i);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    return out;
}

// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            out(i, j) = s;
        }
    return out;
}

double activate(double x, Activation act, double alpha) {
    return act == Activation::Elu ? elu(x, alpha) : x;
}

double activate_grad(double x, Activation act, double alpha) {
    if (act == Activation::Identity) return 1.0;
    return x >= 0.0 ? 1.0 : alpha * std::exp(x);
}

void check_finite(const Matrix& m, const std::string& where) {
    for (double v : m.a)
        if (!std::isfinite(v)) throw NumericError("non-finite activation in " + where);
}

Gradients zero_like(const MlpModel& model) {
    Gradients g;
    for (const auto& layer : model.layers) {
        g.weight.emplace_back(layer.weight.rows, layer.weight.cols);
        g.bias.emplace_back(layer.bias.size(), 0.0);
        g.gamma.emplace_back(layer.gamma.size(), 0.0);
        g.beta.emplace_back(layer.beta.size(), 0.0);
    }
    return g;
}

void adam_update(double& p, double g, double& m, double& v, std::size_t t,
                 const MlpConfig& c) {
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * g;
    v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(c.adam_beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(c.adam_beta2, static_cast<double>(t)));
    p -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_epsilon);
}

}  // namespace

double elu(double x, double alpha) {
    return x >= 0.0 ? x : alpha * (std::exp(x) - 1.0);
}

Matrix Scaler::apply(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = (x(i, j) - mean[j]) / sd[j];
    return out;
}

Matrix Scaler::invert(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = x(i, j) * sd[j] + mean[j];
    return out;
}

Matrix MlpModel::forward(const Matrix& x, Mode mode, std::mt19937_64* rng,
                         ForwardCache* cache) const {
    if (x.cols != config.input_dim)
        throw ShapeError("forward: expected " + std::to_string(config.input_dim) +
                         " columns, got " + std::to_string(x.cols));
    if (mode == Mode::Train && config.dropout_rate > 0.0 && rng == nullptr)
        throw UsageError("forward: Train mode with dropout requires an rng");
    if (cache) cache->layers.clear();

    Matrix cur = x;
    std::bernoulli_distribution keep(1.0 - config.dropout_rate);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        LayerCache lc;
        if (cache) lc.input = cur;

        Matrix z = matmul(cur, layer.weight);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
        check_finite(z, "layer " + std::to_string(l) + " affine");

        const bool last = l + 1 == layers.size();
        if (last) {
            // softmax with max subtraction
            Matrix probs(z.rows, z.cols);
            for (std::size_t i = 0; i < z.rows; ++i) {
                double mx = z(i, 0);
                for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
                double sum = 0.0;
                for (std::size_t j = 0; j < z.cols; ++j) {
                    probs(i, j) = std::exp(z(i, j) - mx);
                    sum += probs(i, j);
                }
                for (std::size_t j = 0; j < z.cols; ++j) probs(i, j) /= sum;
            }
            if (cache) {
                lc.z = std::move(z);
                cache->layers.push_back(std::move(lc));
                cache->probs = probs;
            }
            return probs;
        }

        if (layer.has_batchnorm) {
            const std::size_t n = z.rows, h = z.cols;
            std::vector<double> mu(h, 0.0), var(h, 0.0), inv_sigma(h, 0.0);
            if (mode == Mode::Train) {
                for (std::size_t j = 0; j < h; ++j) {
                    for (std::size_t i = 0; i < n; ++i) mu[j] += z(i, j);
                    mu[j] /= static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double d = z(i, j) - mu[j];
                        var[j] += d * d;
                    }
                    var[j] /= static_cast<double>(n);
                }
            } else {
                mu = layer.running_mean;
                var = layer.running_var;
            }
            for (std::size_t j = 0; j < h; ++j)
                inv_sigma[j] = 1.0 / std::sqrt(var[j] + kBatchnormEps);

            Matrix xhat(n, h), y(n, h);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < h; ++j) {
                    xhat(i, j) = (z(i, j) - mu[j]) * inv_sigma[j];
                    y(i, j) = layer.gamma[j] * xhat(i, j) + layer.beta[j];
                }
            if (cache) {
                lc.z = z;
                lc.xhat = xhat;
                lc.mu = mu;
                lc.inv_sigma = inv_sigma;
            }
            z = std::move(y);
        }
        if (cache) lc.pre_activation = z;

        for (auto& v : z.a) v = activate(v, config.activation, config.elu_alpha);
        check_finite(z, "layer " + std::to_string(l) + " activation");
        if (cache) lc.activated = z;

        if (mode == Mode::Train && config.dropout_rate > 0.0) {
            const double scale = 1.0 / (1.0 - config.dropout_rate);
            Matrix mask(z.rows, z.cols);
            for (auto& v : mask.a) v = keep(*rng) ? scale : 0.0;
            for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] *= mask.a[i];
            if (cache) lc.mask = std::move(mask);
        }
        if (cache) cache->layers.push_back(std::move(lc));
        cur = std::move(z);
    }
    throw UsageError("forward: model has no layers");
}

Matrix MlpModel::predict(const Matrix& raw) const {
    return forward(scaler.apply(raw), Mode::Infer);
}

double cross_entropy(const Matrix& probs, const Matrix& targets) {
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        for (std::size_t j = 0; j < probs.cols; ++j)
            if (targets(i, j) != 0.0)
                loss -= targets(i, j) * std::log(std::max(probs(i, j), kLogEps));
    return loss / static_cast<double>(probs.rows);
}

Gradients backward(const MlpModel& model, const ForwardCache& cache,
                   const Matrix& targets) {
    if (cache.layers.size() != model.layers.size())
        throw UsageError("backward: stale or missing forward cache");
    const std::size_t n = cache.probs.rows;
    Gradients grads = zero_like(model);

    // softmax + cross-entropy, mean-reduced
    Matrix delta(n, cache.probs.cols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < delta.cols; ++j)
            delta(i, j) = (cache.probs(i, j) - targets(i, j)) / static_cast<double>(n);

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const auto& layer = model.layers[li];
        const auto& lc = cache.layers[li];
        const bool last = li + 1 == model.layers.size();

        if (!last) {
            // through dropout
            if (lc.mask.rows > 0)
                for (std::size_t i = 0; i < delta.a.size(); ++i) delta.a[i] *= lc.mask.a[i];
            // through activation
            for (std::size_t i = 0; i < delta.rows; ++i)
                for (std::size_t j = 0; j < delta.cols; ++j)
                    delta(i, j) *= activate_grad(lc.pre_activation(i, j), model.config.activation,
                                                 model.config.elu_alpha);
            // through batchnorm, including the batch-statistic dependence
            if (layer.has_batchnorm) {
                const std::size_t h = delta.cols;
                for (std::size_t j = 0; j < h; ++j) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        sum_dy += delta(i, j);
                        sum_dy_xhat += delta(i, j) * lc.xhat(i, j);
                    }
                    grads.beta[li][j] = sum_dy;
                    grads.gamma[li][j] = sum_dy_xhat;
                    const double g = layer.gamma[j] * lc.inv_sigma[j];
                    const double mean_dy = sum_dy / static_cast<double>(n);
                    const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i)
                        delta(i, j) = g * (delta(i, j) - mean_dy - lc.xhat(i, j) * mean_dy_xhat);
                }
            }
        }

        grads.weight[li] = matmul_at(lc.input, delta);
        for (std::size_t j = 0; j < delta.cols; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += delta(i, j);
            grads.bias[li][j] = s;
        }
        if (li > 0) delta = matmul_bt(delta, layer.weight);
    }
    return grads;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               const MlpConfig& config) {
    if (state.t == 0) {
        state.m = zero_like(model);
        state.v = zero_like(model);
    }
    ++state.t;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.weight.a.size(); ++i)
            adam_update(layer.weight.a[i], grads.weight[l].a[i], state.m.weight[l].a[i],
                        state.v.weight[l].a[i], state.t, config);
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            adam_update(layer.bias[i], grads.bias[l][i], state.m.bias[l][i],
                        state.v.bias[l][i], state.t, config);
        for (std::size_t i = 0; i < layer.gamma.size(); ++i)
            adam_update(layer.gamma[i], grads.gamma[l][i], state.m.gamma[l][i],
                        state.v.gamma[l][i], state.t, config);
        for (std::size_t i = 0; i < layer.beta.size(); ++i)
            adam_update(layer.beta[i], grads.beta[l][i], state.m.beta[l][i],
                        state.v.beta[l][i], state.t, config);
    }
}

MlpModel init_model(const MlpConfig& config, std::mt19937_64& rng) {
    if (config.input_dim == 0 || config.output_dim == 0)
        throw UsageError("init_model: dims must be > 0");
    MlpModel model;
    model.config = config;
    std::vector<std::size_t> dims;
    dims.push_back(config.input_dim);
    for (auto h : config.hidden_dims) dims.push_back(h);
    dims.push_back(config.output_dim);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = Matrix(dims[l], dims[l + 1]);
        const double limit = std::sqrt(6.0 / static_cast<double>(dims[l]));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& w : layer.weight.a) w = u(rng);
        layer.bias.assign(dims[l + 1], 0.0);
        const bool hidden = l + 2 < dims.size();
        if (hidden && config.use_batchnorm) {
            layer.has_batchnorm = true;
            layer.gamma.assign(dims[l + 1], 1.0);
            layer.beta.assign(dims[l + 1], 0.0);
            layer.running_mean.assign(dims[l + 1], 0.0);
            layer.running_var.assign(dims[l + 1], 1.0);
        }
        model.layers.push_back(std::move(layer));
    }
    model.scaler.mean.assign(config.input_dim, 0.0);
    model.scaler.sd.assign(config.input_dim, 1.0);
    return model;
}

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Matrix out(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) out(i, labels[i]) = 1.0;
    return out;
}

std::size_t argmax_row(const Matrix& m, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols; ++j)
        if (m(row, j) > m(row, best)) best = j;
    return best;
}

double accuracy(const Matrix& probs, const Matrix& targets) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        if (argmax_row(probs, i) == argmax_row(targets, i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

TrainResult train(const Matrix& x, const Matrix& y_onehot, const MlpConfig& config_in,
                  const Matrix* holdout_x, const Matrix* holdout_y) {
    if (x.rows < 2) throw UsageError("train: need at least 2 samples");
    if (x.rows != y_onehot.rows) throw ShapeError("train: X/Y row mismatch");
    {
        std::vector<bool> seen(y_onehot.cols, false);
        for (std::size_t i = 0; i < y_onehot.rows; ++i) seen[argmax_row(y_onehot, i)] = true;
        if (std::count(seen.begin(), seen.end(), true) < 2)
            throw DegenerateLabelsError("train: all samples belong to a single class");
    }

    MlpConfig config = config_in;
    config.input_dim = x.cols;
    std::mt19937_64 rng(config.seed);
    MlpModel model = init_model(config, rng);

    // Fit scaler on the training data; zero-variance features clamp to SD 1.
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= static_cast<double>(x.rows);
        double ss = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
        double sd = std::sqrt(ss / static_cast<double>(x.rows - 1));
        model.scaler.mean[j] = mean;
        model.scaler.sd[j] = sd > 0.0 ? sd : 1.0;
    }
    const Matrix xs = model.scaler.apply(x);

    AdamState state;
    TrainHistory history;
    history.has_test = holdout_x != nullptr;
    double best_holdout = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        ForwardCache cache;
        const Matrix probs = model.forward(xs, Mode::Train, &rng, &cache);
        const double loss = cross_entropy(probs, y_onehot);
        if (!std::isfinite(loss))
            throw NumericError("train: NaN loss at epoch " + std::to_string(epoch));
        history.train_loss.push_back(loss);
        history.train_acc.push_back(accuracy(probs, y_onehot));

        // Update batchnorm running statistics from this epoch's batch stats.
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto& layer = model.layers[l];
            if (!layer.has_batchnorm) continue;
            const auto& lc = cache.layers[l];
            for (std::size_t j = 0; j < layer.running_mean.size(); ++j) {
                const double var = 1.0 / (lc.inv_sigma[j] * lc.inv_sigma[j]) - kBatchnormEps;
                layer.running_mean[j] = kBatchnormMomentum * layer.running_mean[j] +
                                        (1.0 - kBatchnormMomentum) * lc.mu[j];
                layer.running_var[j] = kBatchnormMomentum * layer.running_var[j] +
                                       (1.0 - kBatchnormMomentum) * var;
            }
        }

        const Gradients grads = backward(model, cache, y_onehot);
        adam_step(model, grads, state, config);

        if (holdout_x != nullptr && holdout_y != nullptr) {
            const Matrix hp = model.forward(model.scaler.apply(*holdout_x), Mode::Infer);
            const double hl = cross_entropy(hp, *holdout_y);
            history.test_loss.push_back(hl);
            history.test_acc.push_back(accuracy(hp, *holdout_y));
            if (config.early_stopping) {
                if (hl < best_holdout) {
                    best_holdout = hl;
                    since_best = 0;
                } else if (++since_best >= config.patience) {
                    break;
                }
            }
        }
    }
    return {std::move(model), std::move(history)};
}

double gradient_check(const MlpConfig& base, std::size_t trials, double h,
                      std::uint64_t seed) {
    if (h <= 0.0) throw UsageError("gradient_check: h must be > 0");
    std::mt19937_64 rng(seed);
    double max_rel_err = 0.0;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        MlpConfig config = base;
        if (config.input_dim == 0) config.input_dim = 6;
        if (config.hidden_dims.empty()) config.hidden_dims = {8};
        MlpModel model = init_model(config, rng);

        const std::size_t n = 5;
        Matrix x(n, config.input_dim);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : x.a) v = normal(rng);
        std::vector<std::size_t> labels(n);
        std::uniform_int_distribution<std::size_t> cls(0, config.output_dim - 1);
        for (auto& l : labels) l = cls(rng);
        const Matrix y = one_hot(labels, config.output_dim);

        // Freeze the dropout masks: same rng state for every forward pass.
        const std::uint64_t mask_seed = rng();
        auto run_forward = [&](ForwardCache* cache) {
            std::mt19937_64 mask_rng(mask_seed);
            return model.forward(x, Mode::Train, &mask_rng, cache);
        };

        ForwardCache cache;
        run_forward(&cache);
        const Gradients grads = backward(model, cache, y);

        auto visit_params = [&](auto&& fn) {
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                for (std::size_t i = 0; i < layer.weight.a.size(); ++i)
                    fn(layer.weight.a[i], grads.weight[l].a[i]);
                for (std::size_t i = 0; i < layer.bias.size(); ++i)
                    fn(layer.bias[i], grads.bias[l][i]);
                for (std::size_t i = 0; i < layer.gamma.size(); ++i)
                    fn(layer.gamma[i], grads.gamma[l][i]);
                for (std::size_t i = 0; i < layer.beta.size(); ++i)
                    fn(layer.beta[i], grads.beta[l][i]);
            }
        };

        visit_params([&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double lp = cross_entropy(run_forward(nullptr), y);
            param = saved - h;
            const double lm = cross_entropy(run_forward(nullptr), y);
            param = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            // The floor absorbs FD roundoff (~eps/h) on near-zero gradients,
            // e.g. parameters behind a dropped-out unit.
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
            max_rel_err = std::max(max_rel_err, std::abs(analytic - numeric) / denom);
        });
    }
    return max_rel_err;
}

}  // namespace fex
