// End-to-end acceptance suite. Runs each criterion in order, prints one
// PASS/FAIL line per criterion, and exits nonzero if any fail.
// Usage: acceptance <path-to-cli-binary>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "fex/cascade.hpp"
#include "fex/dataio.hpp"
#include "fex/eval.hpp"
#include "fex/landmarks.hpp"
#include "fex/mlp.hpp"
#include "fex/ppg.hpp"
#include "fex/synth.hpp"

using namespace fex;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
        body();
    } catch (const std::exception& e) {
        failure = e.what();
    }
    const auto seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char timing[32];
    std::snprintf(timing, sizeof(timing), "%.1fs", seconds);
    if (failure.empty()) {
        std::cout << "PASS  criterion " << number << ": " << name << " (" << timing << ")\n";
    } else {
        std::cout << "FAIL  criterion " << number << ": " << name << " (" << timing << ") — "
                  << failure << "\n";
        ++g_failures;
    }
    std::cout.flush();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

fs::path temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fex_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + g_cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool trees_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rels;
    for (const auto& entry : fs::recursive_directory_iterator(a))
        if (entry.is_regular_file()) rels.push_back(fs::relative(entry.path(), a));
    for (const auto& rel : rels) {
        if (!fs::exists(b / rel)) return false;
        if (slurp(a / rel) != slurp(b / rel)) return false;
    }
    return true;
}

// Independent reference for the average-movement formula: plain double loop,
// no reuse of library internals.
std::vector<double> naive_movement(const LandmarkTrajectory& traj) {
    const std::size_t n = traj.frame_count();
    const std::size_t m = traj.points_per_frame();
    std::vector<double> d(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = traj.frames[i][j].x - traj.frames[0][j].x;
            const double dy = traj.frames[i][j].y - traj.frames[0][j].y;
            sum += std::sqrt(dx * dx + dy * dy);
        }
        d[j] = sum / static_cast<double>(n);
    }
    return d;
}

// Independent beat reference: enumerate local extrema (plateau first sample,
// one-sided boundaries) and pair min/max/min.
std::vector<std::array<std::size_t, 3>> naive_beats(const std::vector<double>& s) {
    std::vector<std::pair<std::size_t, bool>> extrema;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0 && s[i] == s[i - 1]) continue;
        std::size_t p = i;
        while (p > 0 && s[p - 1] == s[i]) --p;
        std::size_t q = i;
        while (q + 1 < s.size() && s[q + 1] == s[i]) ++q;
        const bool lo_ok = p == 0 || s[p - 1] > s[i];
        const bool hi_ok = q + 1 == s.size() || s[q + 1] > s[i];
        const bool lo_max = p == 0 || s[p - 1] < s[i];
        const bool hi_max = q + 1 == s.size() || s[q + 1] < s[i];
        if (lo_ok && hi_ok) extrema.emplace_back(i, false);
        if (lo_max && hi_max) extrema.emplace_back(i, true);
    }
    std::vector<std::array<std::size_t, 3>> beats;
    for (std::size_t i = 0; i + 2 < extrema.size(); ++i)
        if (!extrema[i].second && extrema[i + 1].second && !extrema[i + 2].second)
            beats.push_back({extrema[i].first, extrema[i + 1].first, extrema[i + 2].first});
    return beats;
}

double sorted_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Dataset synth_for(const std::string& tag, std::size_t subjects, std::uint64_t seed,
                  bool unseen = false) {
    SynthConfig config;
    config.n_subjects = subjects;
    config.seed = seed;
    config.include_unseen = unseen;
    config.out_dir = temp_dir(tag);
    return synth_dataset(config);
}

std::size_t worker_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 2 : std::min(hc, 8u);
}

// Shared by criteria 7, 8, and 10 so the expensive cross-validation runs once.
LoocvResult* g_full_run = nullptr;
EvalConfig g_full_config;

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <cli-binary>\n";
        return 2;
    }
    g_cli = argv[1];

    criterion(1, "movement features match a naive reference on 1000 random trajectories", [] {
        std::mt19937_64 rng(101);
        std::uniform_real_distribution<double> coord(-50.0, 450.0);
        std::uniform_int_distribution<std::size_t> frames(1, 40);
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            LandmarkTrajectory traj;
            const std::size_t n = frames(rng);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<Point> f(kTotalLandmarks);
                for (auto& p : f) p = {coord(rng), coord(rng)};
                traj.frames.push_back(std::move(f));
            }
            const auto fast = average_movement(traj);
            const auto slow = naive_movement(traj);
            for (std::size_t j = 0; j < kTotalLandmarks; ++j) {
                const double denom = std::max(std::abs(slow[j]), 1e-300);
                worst = std::max(worst, std::abs(fast.d[j] - slow[j]) / denom);
            }
        }
        require(worst <= 1e-12, "max relative error " + std::to_string(worst));
    });

    criterion(2, "beat segmentation matches a brute-force extrema scan on 200 signals", [] {
        std::mt19937_64 rng(202);
        std::uniform_real_distribution<double> freq(0.5, 3.0);
        std::uniform_real_distribution<double> amp(0.3, 1.0);
        std::uniform_real_distribution<double> phase(0.0, 6.28318);
        std::normal_distribution<double> noise(0.0, 0.02);
        for (int trial = 0; trial < 200; ++trial) {
            PpgRecord ppg;
            ppg.rate = 64.0;
            const double f1 = freq(rng), f2 = freq(rng);
            const double a1 = amp(rng), a2 = amp(rng);
            const double p1 = phase(rng), p2 = phase(rng);
            for (int i = 0; i < 64 * 6; ++i) {
                const double t = i / 64.0;
                ppg.samples.push_back(a1 * std::sin(6.28318 * f1 * t + p1) +
                                      a2 * std::sin(6.28318 * f2 * t + p2) + noise(rng));
            }
            const auto fast = segment_beats(ppg, 0.0, 0.0);
            const auto slow = naive_beats(ppg.samples);
            require(fast.size() == slow.size(), "beat count mismatch on trial " +
                                                    std::to_string(trial));
            for (std::size_t i = 0; i < fast.size(); ++i) {
                require(fast[i].t1 == slow[i][0] / ppg.rate &&
                            fast[i].t2 == slow[i][1] / ppg.rate &&
                            fast[i].t3 == slow[i][2] / ppg.rate,
                        "beat boundary mismatch on trial " + std::to_string(trial));
            }
        }
    });

    criterion(3, "feature vectors are exactly 128 and 21 wide; short recordings error out", [] {
        const auto ds = synth_for("shapes", 2, 11);
        EvalConfig config;
        for (const auto& trial : ds.trials) {
            const auto tf = extract_trial_features(ds, trial, config);
            require(tf.d1.d.size() == 128, "D1 width");
            require(tf.d2.f.size() == 21, "D2 width");
        }
        // two beats only: must throw, never pad
        PpgRecord short_ppg;
        short_ppg.rate = 64.0;
        for (int i = 0; i < 128; ++i)
            short_ppg.samples.push_back(1.0 - std::cos(6.28318 * i / 64.0));
        const auto beats = segment_beats(short_ppg, 0.0, 0.0);
        require(beats.size() < 5, "test setup: expected a short beat sequence");
        try {
            extract_ppg_features(beats);
            require(false, "expected an insufficient-beats error");
        } catch (const InsufficientBeatsError& e) {
            require(e.beats_found == beats.size(), "error carries the wrong beat count");
        }
    });

    criterion(4, "analytic gradients match finite differences on 50 random models", [] {
        MlpConfig config;
        config.input_dim = 5;
        config.hidden_dims = {4, 3};
        config.output_dim = 2;
        const double err = gradient_check(config, 50, 1e-5, 404);
        require(err < 1e-4, "max relative error " + std::to_string(err));
    });

    criterion(5, "activation, softmax, and loss point values", [] {
        require(std::abs(elu(-1.0) - (std::exp(-1.0) - 1.0)) <= 1e-12, "elu(-1)");
        require(elu(2.5) == 2.5, "elu identity for positive input");

        MlpModel m;
        m.config.input_dim = 3;
        m.config.hidden_dims = {};
        m.config.output_dim = 4;
        m.config.use_batchnorm = false;
        m.config.activation = Activation::Identity;
        m.scaler.mean.assign(3, 0.0);
        m.scaler.sd.assign(3, 1.0);
        Layer out;
        out.weight = Matrix(3, 4);
        std::mt19937_64 rng(55);
        std::normal_distribution<double> n(0.0, 2.0);
        for (auto& w : out.weight.a) w = n(rng);
        out.bias = {n(rng), n(rng), n(rng), n(rng)};
        m.layers.push_back(out);
        Matrix x(8, 3);
        for (auto& v : x.a) v = n(rng);
        const Matrix probs = m.predict(x);
        for (std::size_t r = 0; r < probs.rows; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < probs.cols; ++c) sum += probs(r, c);
            require(std::abs(sum - 1.0) <= 1e-9, "softmax row sum");
        }

        Matrix uniform(1, 2);
        uniform(0, 0) = 0.5;
        uniform(0, 1) = 0.5;
        Matrix target(1, 2);
        target(0, 0) = 1.0;
        require(std::abs(cross_entropy(uniform, target) - std::log(2.0)) <= 1e-12,
                "uniform-prediction loss");
    });

    criterion(6, "synth + train + evaluate are byte-identical across repeat runs", [] {
        const auto base = temp_dir("determinism");
        for (const char* run : {"a", "b"}) {
            const auto data = base / ("data_" + std::string(run));
            const auto out = base / ("run_" + std::string(run));
            require(run_cli("synth --subjects 4 --seed 7 --out \"" + data.string() + "\"") == 0,
                    "synth failed");
            require(run_cli("train --manifest \"" + (data / "manifest.csv").string() +
                            "\" --out \"" + (base / ("model_" + std::string(run) + ".json")).string() +
                            "\" --seed 7 --nn1-epochs 40 --nn2-epochs 40") == 0,
                    "train failed");
            require(run_cli("evaluate --manifest \"" + (data / "manifest.csv").string() +
                            "\" --out \"" + out.string() +
                            "\" --seed 7 --nn1-epochs 40 --nn2-epochs 40") == 0,
                    "evaluate failed");
        }
        require(trees_identical(base / "data_a", base / "data_b"), "datasets differ");
        require(slurp(base / "model_a.json") == slurp(base / "model_b.json"), "models differ");
        require(trees_identical(base / "run_a", base / "run_b"), "reports differ");
    });

    static LoocvResult full_run;
    criterion(7, "20-subject cross-validation reaches 0.90 overall and 0.95 first-stage", [] {
        const auto ds = synth_for("full", 20, 7);
        g_full_config = EvalConfig{};
        g_full_config.cascade.seed = 7;
        g_full_config.jobs = worker_count();
        full_run = loocv(ds, g_full_config);
        g_full_run = &full_run;
        require(full_run.folds.size() == 20, "fold count");
        require(full_run.report.total_trials == 60, "trial count");
        require(full_run.report.nn1_accuracy >= 0.95,
                "nn1 accuracy " + std::to_string(full_run.report.nn1_accuracy));
        require(full_run.report.overall_accuracy >= 0.90,
                "overall accuracy " + std::to_string(full_run.report.overall_accuracy));
    });

    criterion(8, "no held-out trial enters any fitted statistic in any fold", [] {
        require(g_full_run != nullptr, "cross-validation run unavailable");
        for (const auto& fold : g_full_run->folds) {
            require(fold.training_trial_keys.size() == 19 * 3,
                    "fold " + fold.held_out_subject + " trained on the wrong trial count");
            for (const auto& key : fold.training_trial_keys)
                require(key.rfind(fold.held_out_subject + ":", 0) != 0,
                        "fold " + fold.held_out_subject + " leaked " + key);
            for (const auto& outcome : fold.outcomes)
                require(outcome.subject_id == fold.held_out_subject,
                        "fold evaluated a non-held-out trial");
        }
    });

    criterion(9, "7 unseen talking trials all route to group B and read as resting", [] {
        const auto ds = synth_for("talking", 7, 13, true);
        EvalConfig config;
        config.cascade.seed = 13;
        config.cascade.nn1_epochs = 150;
        config.cascade.nn2_epochs = 150;
        std::vector<LabeledD1> d1_set;
        std::vector<LabeledD2> d2_set;
        for (const auto& trial : ds.trials) {
            if (trial.label == Label::Unseen) continue;
            const auto tf = extract_trial_features(ds, trial, config);
            d1_set.push_back({tf.d1, tf.label});
            if (tf.label != Label::Pct100) d2_set.push_back({tf.d2, tf.label});
        }
        const auto trained = fit_cascade(d1_set, d2_set, config.cascade);
        const auto report = robustness_eval(ds, trained.model, config);
        require(report.summary.predictions.size() == 7, "unseen trial count");
        require(report.summary.routed_b == 7,
                std::to_string(report.summary.routed_b) + " of 7 routed to group B");
        require(report.summary.predicted_pct0 == 7,
                "resting-PPG trials not all read as 0% (" +
                    std::to_string(report.summary.predicted_pct0) + " of 7)");
    });

    criterion(10, "rendered report agrees with independent recounts and quantiles", [] {
        require(g_full_run != nullptr, "cross-validation run unavailable");
        const auto& report = g_full_run->report;

        // recount the o/x grid
        std::size_t o_count = 0;
        for (const auto& [label, row] : report.grid)
            for (bool ok : row)
                if (ok) ++o_count;
        require(o_count == report.correct_trials, "grid recount != correct trials");
        const double recount =
            static_cast<double>(o_count) / static_cast<double>(report.total_trials);
        require(recount == report.overall_accuracy, "accuracy recount mismatch");

        // per-fold recount against the stored outcomes
        std::size_t correct = 0, total = 0;
        for (const auto& fold : g_full_run->folds)
            for (const auto& outcome : fold.outcomes) {
                ++total;
                if (outcome.correct()) ++correct;
            }
        require(total == report.total_trials && correct == report.correct_trials,
                "fold outcome recount mismatch");

        // box-plot statistics against a sort-based quantile oracle
        const auto out_dir = temp_dir("report_fidelity");
        render_report(*g_full_run, g_full_config, out_dir);
        require(fs::exists(out_dir / "movement_groups.svg") &&
                    fs::exists(out_dir / "report.md") &&
                    fs::exists(out_dir / "run_manifest.json"),
                "missing report artifacts");
        const auto ds_check = synth_for("fidelity_features", 3, 31);
        EvalConfig config;
        for (const auto& trial : ds_check.trials) {
            const auto tf = extract_trial_features(ds_check, trial, config);
            const auto groups = group_movement_stats(tf.d1);
            for (std::size_t g = 0; g < groups.size(); ++g) {
                std::vector<double> values;
                for (std::size_t j : LandmarkGroups::indices()[g]) values.push_back(tf.d1.d[j]);
                require(std::abs(groups[g].median - sorted_quantile(values, 0.5)) <= 1e-12,
                        "median mismatch in group " + groups[g].name);
                require(std::abs(groups[g].q1 - sorted_quantile(values, 0.25)) <= 1e-12,
                        "q1 mismatch in group " + groups[g].name);
                require(std::abs(groups[g].q3 - sorted_quantile(values, 0.75)) <= 1e-12,
                        "q3 mismatch in group " + groups[g].name);
            }
        }
    });

    std::cout << (g_failures == 0 ? "all criteria passed\n"
                                  : std::to_string(g_failures) + " criteria failed\n");
    return g_failures == 0 ? 0 : 1;
}
