#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fex/dataio.hpp"
#include "fex/eval.hpp"
#include "fex/landmarks.hpp"
#include "fex/ppg.hpp"
#include "fex/synth.hpp"
#include "fex/types.hpp"

namespace {

std::filesystem::path default_out(const std::string& fallback) {
    if (const char* env = std::getenv("FEX_OUT_DIR")) return std::filesystem::path(env);
    return fallback;
}

void print_d1(const fex::MovementFeatures& d1, std::ostream& out) {
    for (std::size_t j = 0; j < fex::kTotalLandmarks; ++j) out << "d" << j << (j + 1 < fex::kTotalLandmarks ? "," : "\n");
    for (std::size_t j = 0; j < fex::kTotalLandmarks; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", d1.d[j]);
        out << buf << (j + 1 < fex::kTotalLandmarks ? "," : "\n");
    }
}

void print_d2(const fex::PpgFeatures& d2, std::ostream& out) {
    for (std::size_t j = 0; j < fex::kPpgFeatureCount; ++j) out << "f" << j + 1 << (j + 1 < fex::kPpgFeatureCount ? "," : "\n");
    for (std::size_t j = 0; j < fex::kPpgFeatureCount; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", d2.f[j]);
        out << buf << (j + 1 < fex::kPpgFeatureCount ? "," : "\n");
    }
}

std::vector<fex::LabeledD1> collect_d1(const std::vector<fex::TrialFeatures>& features) {
    std::vector<fex::LabeledD1> out;
    for (const auto& tf : features) out.push_back({tf.d1, tf.label});
    return out;
}

std::vector<fex::LabeledD2> collect_d2(const std::vector<fex::TrialFeatures>& features) {
    std::vector<fex::LabeledD2> out;
    for (const auto& tf : features)
        if (tf.label != fex::Label::Pct100) out.push_back({tf.d2, tf.label});
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Force-exertion classification from landmark movement and PPG features"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a calibrated synthetic dataset");
    fex::SynthConfig synth_config;
    synth_config.out_dir = default_out("synth_data");
    std::size_t synth_subjects = 20;
    std::uint64_t synth_seed = 0;
    double period0 = 1.03, period50 = 0.86, period100 = 0.72;
    synth->add_option("--subjects", synth_subjects, "Number of subjects")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
    synth->add_option("--out", synth_config.out_dir, "Output directory")->capture_default_str();
    synth->add_flag("--unseen", synth_config.include_unseen,
                    "Also generate one unseen 'talking' trial per subject");
    synth->add_option("--noise", synth_config.noise_scale, "Landmark jitter scale")
        ->capture_default_str();
    synth->add_option("--fps", synth_config.fps, "Video frame rate")->capture_default_str();
    synth->add_option("--ppg-rate", synth_config.ppg_rate, "PPG sampling rate (samples/s)")
        ->capture_default_str();
    synth->add_option("--period-0", period0, "Mean beat period at 0% (s)")->capture_default_str();
    synth->add_option("--period-50", period50, "Mean beat period at 50% (s)")
        ->capture_default_str();
    synth->add_option("--period-100", period100, "Mean beat period at 100% (s)")
        ->capture_default_str();

    // extract
    auto* extract = app.add_subcommand("extract", "Extract D1 or D2 features from one trial");
    extract->require_subcommand(1);
    auto* ex_lm = extract->add_subcommand("landmarks", "D1 movement features from a trajectory");
    std::string lm_in, lm_out;
    double lm_fps = 50.0, lm_trim = 2.0;
    ex_lm->add_option("--in", lm_in, "Trajectory CSV (68 or 128 points)")->required();
    ex_lm->add_option("--fps", lm_fps, "Frame rate")->capture_default_str();
    ex_lm->add_option("--trim", lm_trim, "Seconds to drop from the start")
        ->capture_default_str();
    ex_lm->add_option("--out", lm_out, "Output CSV (default stdout)");

    auto* ex_ppg = extract->add_subcommand("ppg", "D2 beat features from a PPG recording");
    std::string ppg_in, ppg_out;
    double ppg_rate = 128.0, ppg_prom = 0.1, ppg_period = 0.3;
    ex_ppg->add_option("--in", ppg_in, "PPG CSV (value column or t,value)")->required();
    ex_ppg->add_option("--rate", ppg_rate, "Sampling rate for single-column input")
        ->capture_default_str();
    ex_ppg->add_option("--prominence", ppg_prom, "Min peak prominence (fraction of range)")
        ->capture_default_str();
    ex_ppg->add_option("--period", ppg_period, "Min beat period (s)")->capture_default_str();
    ex_ppg->add_option("--out", ppg_out, "Output CSV (default stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit the NN1+NN2 cascade on a dataset");
    std::string train_manifest, train_model_out = "model.json";
    fex::EvalConfig train_config;
    train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
    train_cmd->add_option("--out", train_model_out, "Model output path")->capture_default_str();
    train_cmd->add_option("--seed", train_config.cascade.seed, "Random seed")
        ->capture_default_str();
    train_cmd->add_option("--nn1-epochs", train_config.cascade.nn1_epochs, "NN1 epochs")
        ->capture_default_str();
    train_cmd->add_option("--nn2-epochs", train_config.cascade.nn2_epochs, "NN2 epochs")
        ->capture_default_str();
    train_cmd->add_option("--lr", train_config.cascade.learning_rate, "Adam learning rate")
        ->capture_default_str();
    train_cmd->add_option("--trim", train_config.trim_seconds, "Trajectory trim (s)")
        ->capture_default_str();
    train_cmd->add_option("--prominence", train_config.min_prominence, "Min peak prominence")
        ->capture_default_str();
    train_cmd->add_option("--period", train_config.min_period, "Min beat period (s)")
        ->capture_default_str();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Leave-one-subject-out cross-validation");
    std::string eval_manifest;
    std::filesystem::path eval_out = default_out("run");
    fex::EvalConfig eval_config;
    eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval_cmd->add_option("--out", eval_out, "Report output directory")->capture_default_str();
    eval_cmd->add_option("--seed", eval_config.cascade.seed, "Master seed")
        ->capture_default_str();
    eval_cmd->add_option("--nn1-epochs", eval_config.cascade.nn1_epochs, "NN1 epochs")
        ->capture_default_str();
    eval_cmd->add_option("--nn2-epochs", eval_config.cascade.nn2_epochs, "NN2 epochs")
        ->capture_default_str();
    eval_cmd->add_option("--lr", eval_config.cascade.learning_rate, "Adam learning rate")
        ->capture_default_str();
    eval_cmd->add_option("--trim", eval_config.trim_seconds, "Trajectory trim (s)")
        ->capture_default_str();
    eval_cmd->add_option("--prominence", eval_config.min_prominence, "Min peak prominence")
        ->capture_default_str();
    eval_cmd->add_option("--period", eval_config.min_period, "Min beat period (s)")
        ->capture_default_str();
    eval_cmd->add_option("--jobs", eval_config.jobs, "Parallel folds")->capture_default_str();

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Classify one trial with a saved model");
    std::string pr_model, pr_landmarks, pr_ppg;
    double pr_fps = 50.0, pr_rate = 128.0, pr_trim = 2.0, pr_prom = 0.1, pr_period = 0.3;
    predict_cmd->add_option("--model", pr_model, "Saved cascade model")->required();
    predict_cmd->add_option("--landmarks", pr_landmarks, "Trajectory CSV")->required();
    predict_cmd->add_option("--ppg", pr_ppg, "PPG CSV (required when routed to group B)");
    predict_cmd->add_option("--fps", pr_fps, "Frame rate")->capture_default_str();
    predict_cmd->add_option("--rate", pr_rate, "PPG sampling rate")->capture_default_str();
    predict_cmd->add_option("--trim", pr_trim, "Trajectory trim (s)")->capture_default_str();
    predict_cmd->add_option("--prominence", pr_prom, "Min peak prominence")
        ->capture_default_str();
    predict_cmd->add_option("--period", pr_period, "Min beat period (s)")->capture_default_str();

    // report
    auto* report_cmd =
        app.add_subcommand("report", "Unseen-activity robustness report for a saved model");
    std::string rp_manifest, rp_model;
    fex::EvalConfig rp_config;
    report_cmd->add_option("--manifest", rp_manifest, "Dataset manifest with unseen trials")
        ->required();
    report_cmd->add_option("--model", rp_model, "Saved cascade model")->required();
    report_cmd->add_option("--trim", rp_config.trim_seconds, "Trajectory trim (s)")
        ->capture_default_str();
    report_cmd->add_option("--prominence", rp_config.min_prominence, "Min peak prominence")
        ->capture_default_str();
    report_cmd->add_option("--period", rp_config.min_period, "Min beat period (s)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            synth_config.n_subjects = synth_subjects;
            synth_config.seed = synth_seed;
            synth_config.beat_period_means = {{fex::Label::Pct0, period0},
                                              {fex::Label::Pct50, period50},
                                              {fex::Label::Pct100, period100}};
            const auto ds = fex::synth_dataset(synth_config);
            std::cout << "wrote " << ds.trials.size() << " trials under "
                      << synth_config.out_dir.string() << "\n";
        } else if (ex_lm->parsed()) {
            auto traj = fex::load_landmark_trajectory(lm_in, lm_fps);
            traj = fex::trim_trajectory(traj, lm_trim, lm_fps);
            traj = fex::derive_cheek_landmarks(traj);
            const auto d1 = fex::average_movement(traj);
            if (lm_out.empty()) {
                print_d1(d1, std::cout);
            } else {
                std::ofstream out(lm_out);
                print_d1(d1, out);
            }
        } else if (ex_ppg->parsed()) {
            const auto ppg = fex::load_ppg(ppg_in, ppg_rate);
            const auto beats = fex::segment_beats(ppg, ppg_prom, ppg_period);
            const auto d2 = fex::extract_ppg_features(beats);
            if (ppg_out.empty()) {
                print_d2(d2, std::cout);
            } else {
                std::ofstream out(ppg_out);
                print_d2(d2, out);
            }
        } else if (train_cmd->parsed()) {
            const auto ds = fex::load_manifest(train_manifest);
            std::vector<fex::TrialFeatures> features;
            for (const auto& trial : ds.trials)
                if (trial.label != fex::Label::Unseen)
                    features.push_back(fex::extract_trial_features(ds, trial, train_config));
            const auto trained =
                fex::fit_cascade(collect_d1(features), collect_d2(features), train_config.cascade);
            fex::save_model(trained.model, train_model_out);
            std::cout << "model saved to " << train_model_out << "\n";
        } else if (eval_cmd->parsed()) {
            const auto ds = fex::load_manifest(eval_manifest);
            const auto result = fex::loocv(ds, eval_config);
            fex::render_report(result, eval_config, eval_out);
            std::cout << "folds: " << result.folds.size()
                      << "  overall accuracy: " << result.report.overall_accuracy
                      << "  nn1: " << result.report.nn1_accuracy
                      << "  nn2: " << result.report.nn2_accuracy << "\n";
            std::cout << "report written to " << eval_out.string() << "\n";
        } else if (predict_cmd->parsed()) {
            const auto model = fex::load_model(pr_model);
            auto traj = fex::load_landmark_trajectory(pr_landmarks, pr_fps);
            traj = fex::trim_trajectory(traj, pr_trim, pr_fps);
            traj = fex::derive_cheek_landmarks(traj);
            const auto d1 = fex::average_movement(traj);
            std::optional<fex::PpgFeatures> d2;
            if (!pr_ppg.empty()) {
                const auto ppg = fex::load_ppg(pr_ppg, pr_rate);
                d2 = fex::extract_ppg_features(fex::segment_beats(ppg, pr_prom, pr_period));
            }
            const auto pred = fex::predict(model, d1, d2);
            std::cout << "level: " << fex::to_string(pred.level) << "  probA: " << pred.prob_a
                      << "  probB: " << pred.prob_b;
            if (pred.level_probs)
                std::cout << "  prob0: " << pred.level_probs->first
                          << "  prob50: " << pred.level_probs->second;
            std::cout << "\n";
        } else if (report_cmd->parsed()) {
            const auto ds = fex::load_manifest(rp_manifest);
            const auto model = fex::load_model(rp_model);
            const auto rep = fex::robustness_eval(ds, model, rp_config);
            const auto total = rep.summary.predictions.size();
            if (total == 0) {
                std::cout << "no unseen trials in manifest\n";
            } else {
                std::cout << rep.summary.routed_b << " of " << total
                          << " routed to group B (" << rep.summary.predicted_pct0 << " -> 0%, "
                          << rep.summary.predicted_pct50 << " -> 50%)\n";
                for (std::size_t i = 0; i < total; ++i)
                    std::cout << rep.subject_ids[i] << ": "
                              << fex::to_string(rep.summary.predictions[i].level) << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
