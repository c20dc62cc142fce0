#include "fex/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fex/landmarks.hpp"
#include "fex/ppg.hpp"

namespace fex {
namespace {

using nlohmann::json;

std::string trial_key(const std::string& subject, Label label) {
    return subject + ":" + to_string(label);
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

Matrix d1_matrix(const std::vector<const TrialFeatures*>& rows) {
    Matrix x(rows.size(), kTotalLandmarks);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < kTotalLandmarks; ++j) x(i, j) = rows[i]->d1.d[j];
    return x;
}

Matrix d2_matrix(const std::vector<const TrialFeatures*>& rows) {
    Matrix x(rows.size(), kPpgFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < kPpgFeatureCount; ++j) x(i, j) = rows[i]->d2.f[j];
    return x;
}

struct SvgBox {
    double min, q1, median, q3, max;
};

SvgBox box_stats(std::vector<double> v) {
    return {*std::min_element(v.begin(), v.end()), quantile(v, 0.25), quantile(v, 0.5),
            quantile(v, 0.75), *std::max_element(v.begin(), v.end())};
}

// Minimal grouped box-plot SVG.
void write_boxplot_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::string>& group_names,
                       const std::vector<std::string>& series_names,
                       const std::vector<std::vector<std::vector<double>>>& data) {
    const double width = 80.0 + 90.0 * static_cast<double>(group_names.size());
    const double height = 360.0;
    const double plot_top = 50.0, plot_bottom = 310.0;

    double vmax = 1e-12;
    for (const auto& g : data)
        for (const auto& s : g)
            for (double v : s) vmax = std::max(vmax, v);
    const auto y_of = [&](double v) {
        return plot_bottom - (plot_bottom - plot_top) * v / (vmax * 1.05);
    };
    const std::vector<std::string> colors = {"#4878cf", "#e1812c", "#3a923a"};

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0)
        << "\" height=\"" << fmt(height, 0) << "\">\n";
    out << "<text x=\"" << fmt(width / 2, 0)
        << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    out << "<line x1=\"50\" y1=\"" << fmt(plot_bottom, 0) << "\" x2=\"" << fmt(width - 20, 0)
        << "\" y2=\"" << fmt(plot_bottom, 0) << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = vmax * 1.05 * tick / 4.0;
        out << "<text x=\"44\" y=\"" << fmt(y_of(v) + 4, 1)
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v, 2) << "</text>\n";
    }
    for (std::size_t g = 0; g < group_names.size(); ++g) {
        const double gx = 80.0 + 90.0 * static_cast<double>(g);
        out << "<text x=\"" << fmt(gx + 25, 1) << "\" y=\"" << fmt(plot_bottom + 18, 0)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << group_names[g] << "</text>\n";
        for (std::size_t s = 0; s < data[g].size(); ++s) {
            if (data[g][s].empty()) continue;
            const SvgBox b = box_stats(data[g][s]);
            const double x = gx + 22.0 * static_cast<double>(s);
            const double w = 16.0;
            const std::string& color = colors[s % colors.size()];
            out << "<line x1=\"" << fmt(x + w / 2, 1) << "\" y1=\"" << fmt(y_of(b.min), 1)
                << "\" x2=\"" << fmt(x + w / 2, 1) << "\" y2=\"" << fmt(y_of(b.max), 1)
                << "\" stroke=\"" << color << "\"/>\n";
            out << "<rect x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y_of(b.q3), 1) << "\" width=\""
                << fmt(w, 1) << "\" height=\"" << fmt(y_of(b.q1) - y_of(b.q3), 1)
                << "\" fill=\"" << color << "\" fill-opacity=\"0.45\" stroke=\"" << color
                << "\"/>\n";
            out << "<line x1=\"" << fmt(x, 1) << "\" y1=\"" << fmt(y_of(b.median), 1)
                << "\" x2=\"" << fmt(x + w, 1) << "\" y2=\"" << fmt(y_of(b.median), 1)
                << "\" stroke=\"black\"/>\n";
        }
    }
    for (std::size_t s = 0; s < series_names.size(); ++s) {
        const double x = 80.0 + 90.0 * static_cast<double>(s);
        out << "<rect x=\"" << fmt(x, 0) << "\" y=\"330\" width=\"12\" height=\"12\" fill=\""
            << colors[s % colors.size()] << "\" fill-opacity=\"0.45\"/>\n";
        out << "<text x=\"" << fmt(x + 16, 0) << "\" y=\"340\" font-size=\"11\">"
            << series_names[s] << "</text>\n";
    }
    out << "</svg>\n";
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_loss,train_acc";
    if (history.has_test) out << ",test_loss,test_acc";
    out << "\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        out << e + 1 << ',' << fmt(history.train_loss[e], 6) << ','
            << fmt(history.train_acc[e], 6);
        if (history.has_test)
            out << ',' << fmt(history.test_loss[e], 6) << ',' << fmt(history.test_acc[e], 6);
        out << "\n";
    }
}

void ox_row(std::ostream& out, const std::string& name, const std::vector<bool>& cells) {
    out << "| " << name << " |";
    for (bool ok : cells) out << ' ' << (ok ? 'o' : 'x') << " |";
    out << "\n";
}

}  // namespace

TrialFeatures extract_trial_features(const Dataset& dataset, const TrialRecord& trial,
                                     const EvalConfig& config) {
    TrialFeatures tf;
    tf.subject_id = trial.subject_id;
    tf.label = trial.label;
    auto traj = load_landmark_trajectory(trial.landmark_path, dataset.fps);
    traj = trim_trajectory(traj, config.trim_seconds, dataset.fps);
    traj = derive_cheek_landmarks(traj);
    tf.d1 = average_movement(traj);
    const auto ppg = load_ppg(trial.ppg_path, dataset.ppg_rate);
    const auto beats = segment_beats(ppg, config.min_prominence, config.min_period);
    tf.d2 = extract_ppg_features(beats);
    return tf;
}

LoocvResult loocv(const Dataset& dataset, const EvalConfig& config) {
    const auto subjects = dataset.subject_ids();
    std::vector<std::string> labeled_subjects;
    for (const auto& s : subjects) {
        bool has_labeled = false;
        for (const auto* t : dataset.trials_for(s))
            if (t->label != Label::Unseen) has_labeled = true;
        if (has_labeled) labeled_subjects.push_back(s);
    }
    if (labeled_subjects.size() < 2) throw UsageError("loocv: need at least 2 subjects");
    for (const auto& s : labeled_subjects) {
        std::set<Label> seen;
        for (const auto* t : dataset.trials_for(s))
            if (t->label != Label::Unseen) seen.insert(t->label);
        if (seen.size() != 3)
            throw FormatError("loocv: subject " + s + " is missing a labeled trial");
    }

    // Feature extraction is per-trial and leak-free; do it once up front.
    std::vector<TrialFeatures> features;
    for (const auto& trial : dataset.trials) {
        if (trial.label == Label::Unseen) continue;
        features.push_back(extract_trial_features(dataset, trial, config));
    }

    std::vector<FoldResult> folds(labeled_subjects.size());
    auto run_fold = [&](std::size_t fold_idx) {
        const std::string& held_out = labeled_subjects[fold_idx];
        FoldResult fold;
        fold.held_out_subject = held_out;

        std::vector<const TrialFeatures*> train_d1, train_d2, test_rows;
        for (const auto& tf : features) {
            if (tf.subject_id == held_out) {
                test_rows.push_back(&tf);
                continue;
            }
            train_d1.push_back(&tf);
            if (tf.label != Label::Pct100) train_d2.push_back(&tf);
            fold.training_trial_keys.push_back(trial_key(tf.subject_id, tf.label));
        }
        for (const auto* key_src : train_d1)
            if (key_src->subject_id == held_out)
                throw UsageError("loocv: leakage audit failed for fold " + held_out);

        std::vector<LabeledD1> d1_set;
        std::vector<LabeledD2> d2_set;
        for (const auto* tf : train_d1) d1_set.push_back({tf->d1, tf->label});
        for (const auto* tf : train_d2) d2_set.push_back({tf->d2, tf->label});

        CascadeConfig cc = config.cascade;
        cc.seed = config.cascade.seed ^ static_cast<std::uint64_t>(fold_idx);

        CascadeTrainResult trained;
        if (config.record_test_curves) {
            // Per-epoch test curves for the held-out subject, reporting only.
            std::vector<const TrialFeatures*> test_b;
            std::vector<std::size_t> nn1_labels, nn2_labels;
            for (const auto* tf : test_rows) {
                nn1_labels.push_back(tf->label == Label::Pct100 ? 0 : 1);
                if (tf->label != Label::Pct100) {
                    test_b.push_back(tf);
                    nn2_labels.push_back(tf->label == Label::Pct0 ? 0 : 1);
                }
            }
            const Matrix hx1 = d1_matrix(test_rows);
            const Matrix hy1 = one_hot(nn1_labels, 2);
            const Matrix hx2 = d2_matrix(test_b);
            const Matrix hy2 = one_hot(nn2_labels, 2);
            trained = fit_cascade(d1_set, d2_set, cc, &hx1, &hy1, &hx2, &hy2);
        } else {
            trained = fit_cascade(d1_set, d2_set, cc);
        }
        fold.nn1_history = std::move(trained.nn1_history);
        fold.nn2_history = std::move(trained.nn2_history);

        for (const auto* tf : test_rows) {
            TrialOutcome outcome;
            outcome.subject_id = tf->subject_id;
            outcome.truth = tf->label;
            outcome.prediction = predict(trained.model, tf->d1, tf->d2);
            if (tf->label != Label::Pct100) {
                Matrix row(1, kPpgFeatureCount);
                for (std::size_t j = 0; j < kPpgFeatureCount; ++j) row(0, j) = tf->d2.f[j];
                const Matrix p2 = trained.model.nn2.predict(row);
                outcome.nn2_level = p2(0, 0) >= p2(0, 1) ? Label::Pct0 : Label::Pct50;
            }
            fold.outcomes.push_back(std::move(outcome));
        }
        folds[fold_idx] = std::move(fold);
    };

    const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < folds.size(); ++i) run_fold(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < std::min(jobs, folds.size()); ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < folds.size(); i = next++) run_fold(i);
            });
        for (auto& t : workers) t.join();
    }

    EvaluationReport report;
    report.subjects = labeled_subjects;
    for (Label label : {Label::Pct0, Label::Pct50, Label::Pct100})
        report.grid[label].assign(labeled_subjects.size(), false);

    std::size_t nn1_correct = 0, nn1_total = 0, nn2_correct = 0, nn2_total = 0;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        for (const auto& outcome : folds[i].outcomes) {
            ++nn1_total;
            if (outcome.nn1_correct()) ++nn1_correct;
            if (outcome.nn2_level) {
                ++nn2_total;
                if (*outcome.nn2_level == outcome.truth) ++nn2_correct;
            }
            ++report.total_trials;
            if (outcome.correct()) {
                ++report.correct_trials;
                report.grid[outcome.truth][i] = true;
            }
        }
    }
    report.nn1_accuracy =
        nn1_total ? static_cast<double>(nn1_correct) / static_cast<double>(nn1_total) : 0.0;
    report.nn2_accuracy =
        nn2_total ? static_cast<double>(nn2_correct) / static_cast<double>(nn2_total) : 0.0;
    report.overall_accuracy =
        report.total_trials
            ? static_cast<double>(report.correct_trials) / static_cast<double>(report.total_trials)
            : 0.0;

    // Per-trial group-movement and interval stats for the report figures.
    for (const auto& tf : features) {
        const auto groups = group_movement_stats(tf.d1);
        std::array<double, LandmarkGroups::kGroupCount> means{};
        for (std::size_t g = 0; g < groups.size(); ++g) means[g] = groups[g].mean;
        report.group_means[tf.label].push_back(means);
    }
    for (const auto& trial : dataset.trials) {
        if (trial.label != Label::Pct0 && trial.label != Label::Pct50) continue;
        const auto ppg = load_ppg(trial.ppg_path, dataset.ppg_rate);
        const auto beats = segment_beats(ppg, config.min_prominence, config.min_period);
        if (beats.size() >= 2) report.t3t1_stats[trial.label].push_back(interval_stats(beats));
    }
    return {std::move(report), std::move(folds)};
}

void render_report(const LoocvResult& result, const EvalConfig& config,
                   const std::filesystem::path& out_dir) {
    const auto& report = result.report;
    if (report.subjects.empty()) throw UsageError("render_report: empty report");
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "curves");

    // Training-curve CSVs per fold.
    for (const auto& fold : result.folds) {
        write_history_csv(out_dir / "curves" / ("fold_" + fold.held_out_subject + "_nn1.csv"),
                          fold.nn1_history);
        write_history_csv(out_dir / "curves" / ("fold_" + fold.held_out_subject + "_nn2.csv"),
                          fold.nn2_history);
    }

    // Group-movement box plots across force levels.
    const std::vector<Label> levels = {Label::Pct0, Label::Pct50, Label::Pct100};
    std::vector<std::string> level_names = {"0%", "50%", "100%"};
    std::vector<std::vector<std::vector<double>>> box_data(LandmarkGroups::kGroupCount);
    for (std::size_t g = 0; g < LandmarkGroups::kGroupCount; ++g) {
        box_data[g].resize(levels.size());
        for (std::size_t l = 0; l < levels.size(); ++l) {
            auto it = report.group_means.find(levels[l]);
            if (it == report.group_means.end()) continue;
            for (const auto& means : it->second) box_data[g][l].push_back(means[g]);
        }
    }
    std::vector<std::string> group_labels(LandmarkGroups::names().begin(),
                                          LandmarkGroups::names().end());
    write_boxplot_svg(out_dir / "movement_groups.svg",
                      "Average landmark movement by group and force level", group_labels,
                      level_names, box_data);

    // T3-T1 interval comparison, 0% vs 50%.
    std::vector<std::vector<std::vector<double>>> interval_data(1);
    interval_data[0].resize(2);
    for (std::size_t l = 0; l < 2; ++l) {
        auto it = report.t3t1_stats.find(levels[l]);
        if (it == report.t3t1_stats.end()) continue;
        for (const auto& st : it->second) interval_data[0][l].push_back(st.mean);
    }
    write_boxplot_svg(out_dir / "t3t1_intervals.svg", "Mean T3-T1 interval per trial (s)",
                      {"T3-T1"}, {"0%", "50%"}, interval_data);

    // group_movement.csv: one row per (subject,label) with the 7 group means.
    {
        std::ofstream out(out_dir / "group_movement.csv");
        out << "label";
        for (const auto& name : LandmarkGroups::names()) out << ',' << name;
        out << "\n";
        for (Label label : levels) {
            auto it = report.group_means.find(label);
            if (it == report.group_means.end()) continue;
            for (const auto& means : it->second) {
                out << to_string(label);
                for (double m : means) out << ',' << fmt(m, 6);
                out << "\n";
            }
        }
    }

    // Markdown report with the o/x grids.
    std::ofstream md(out_dir / "report.md");
    if (!md) throw IoError("cannot write report.md");
    md << "# Leave-one-subject-out evaluation\n\n";
    md << "- Subjects: " << report.subjects.size() << "\n";
    md << "- Trials evaluated: " << report.total_trials << "\n";
    md << "- NN1 (100% vs rest) accuracy: " << fmt(report.nn1_accuracy) << "\n";
    md << "- NN2 (0% vs 50%) accuracy: " << fmt(report.nn2_accuracy) << "\n";
    md << "- Overall accuracy: " << fmt(report.overall_accuracy) << " ("
       << report.correct_trials << "/" << report.total_trials << ")\n\n";
    md << "Reference values from the original 20-subject study (private data, not "
          "reproducible here): NN1 90%, NN2 80%, overall 81.7%.\n\n";

    const auto header_row = [&](std::ostream& out) {
        out << "| |";
        for (const auto& s : report.subjects) out << ' ' << s << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < report.subjects.size(); ++i) out << "---|";
        out << "\n";
    };

    md << "## NN1 routing (A = 100%, B = 0%/50%)\n\n";
    header_row(md);
    {
        std::vector<bool> row_a(report.subjects.size(), false),
            row_b(report.subjects.size(), true);
        for (std::size_t i = 0; i < result.folds.size(); ++i)
            for (const auto& outcome : result.folds[i].outcomes) {
                if (outcome.truth == Label::Pct100)
                    row_a[i] = outcome.nn1_correct();
                else if (!outcome.nn1_correct())
                    row_b[i] = false;
            }
        ox_row(md, "Group A", row_a);
        ox_row(md, "Group B", row_b);
    }

    md << "\n## NN2 on group-B trials (0% vs 50%)\n\n";
    header_row(md);
    {
        std::vector<bool> row0(report.subjects.size(), false),
            row50(report.subjects.size(), false);
        for (std::size_t i = 0; i < result.folds.size(); ++i)
            for (const auto& outcome : result.folds[i].outcomes) {
                if (!outcome.nn2_level) continue;
                const bool ok = *outcome.nn2_level == outcome.truth;
                (outcome.truth == Label::Pct0 ? row0 : row50)[i] = ok;
            }
        ox_row(md, "0%", row0);
        ox_row(md, "50%", row50);
    }

    md << "\n## Final cascade predictions\n\n";
    header_row(md);
    ox_row(md, "0%", report.grid.at(Label::Pct0));
    ox_row(md, "50%", report.grid.at(Label::Pct50));
    ox_row(md, "100%", report.grid.at(Label::Pct100));
    md.close();

    // Run manifest with config, seeds, and artifact hashes.
    json manifest;
    manifest["seed"] = config.cascade.seed;
    manifest["nn1_epochs"] = config.cascade.nn1_epochs;
    manifest["nn2_epochs"] = config.cascade.nn2_epochs;
    manifest["learning_rate"] = config.cascade.learning_rate;
    manifest["trim_seconds"] = config.trim_seconds;
    manifest["min_prominence"] = config.min_prominence;
    manifest["min_period"] = config.min_period;
    manifest["reference_accuracies"] = {{"nn1", 0.90}, {"nn2", 0.80}, {"overall", 0.817}};
    json artifacts;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out_dir))
        if (entry.is_regular_file() && entry.path().filename() != "run_manifest.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a_file_hash(f)));
        artifacts[std::filesystem::relative(f, out_dir).generic_string()] = hex;
    }
    manifest["artifacts"] = artifacts;
    std::ofstream mf(out_dir / "run_manifest.json");
    mf << manifest.dump(1) << "\n";
}

RobustnessReport robustness_eval(const Dataset& dataset, const CascadeModel& model,
                                 const EvalConfig& config) {
    if (model.nn1.layers.empty() || model.nn2.layers.empty())
        throw UsageError("robustness_eval: model is not trained");
    RobustnessReport report;
    std::vector<std::pair<MovementFeatures, PpgFeatures>> trials;
    for (const auto& trial : dataset.trials) {
        if (trial.label != Label::Unseen) continue;
        const auto tf = extract_trial_features(dataset, trial, config);
        trials.emplace_back(tf.d1, tf.d2);
        report.subject_ids.push_back(trial.subject_id);
    }
    report.summary = predict_unseen(model, trials);
    return report;
}

std::uint64_t fnv1a_file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t hash = 14695981039346656037ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const auto n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
        if (!in) break;
    }
    return hash;
}

}  // namespace fex
