#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "fex/dataio.hpp"
#include "fex/landmarks.hpp"
#include "fex/ppg.hpp"
#include "fex/synth.hpp"

using namespace fex;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fex_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

LandmarkTrajectory random_traj(std::size_t frames, std::size_t points, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, 500.0);
    LandmarkTrajectory traj;
    for (std::size_t i = 0; i < frames; ++i) {
        std::vector<Point> f(points);
        for (auto& p : f) p = {coord(rng), coord(rng)};
        traj.frames.push_back(std::move(f));
    }
    return traj;
}

}  // namespace

TEST_CASE("trajectory save/load round-trips bit-exactly") {
    const auto dir = temp_dir("traj_roundtrip");
    for (std::size_t points : {std::size_t(68), std::size_t(128)}) {
        const auto traj = random_traj(350, points, points);
        const auto path = dir / ("t" + std::to_string(points) + ".csv");
        save_landmark_trajectory(traj, path);
        const auto back = load_landmark_trajectory(path, 50.0);
        REQUIRE(back.frame_count() == 350);
        REQUIRE(back.points_per_frame() == points);
        for (std::size_t i = 0; i < 350; ++i)
            for (std::size_t j = 0; j < points; ++j) {
                CHECK(back.frames[i][j].x == traj.frames[i][j].x);
                CHECK(back.frames[i][j].y == traj.frames[i][j].y);
            }
    }
}

TEST_CASE("single-frame trajectory is valid") {
    const auto dir = temp_dir("traj_single");
    const auto traj = random_traj(1, 68, 3);
    save_landmark_trajectory(traj, dir / "one.csv");
    const auto back = load_landmark_trajectory(dir / "one.csv", 50.0);
    CHECK(back.frame_count() == 1);
}

TEST_CASE("malformed trajectory rows are reported with the row number") {
    const auto dir = temp_dir("traj_bad");
    auto header = []() {
        std::string h = "frame";
        for (int j = 0; j < 68; ++j)
            h += ",x" + std::to_string(j) + ",y" + std::to_string(j);
        return h + "\n";
    };
    auto data_row = [](int frame) {
        std::string r = std::to_string(frame);
        for (int j = 0; j < 136; ++j) r += ",1.5";
        return r + "\n";
    };

    // row 4 (data row 3): one non-numeric cell
    std::string text = header() + data_row(0) + data_row(1);
    std::string bad_row = data_row(2);
    bad_row.replace(bad_row.find("1.5"), 3, "oops");
    write_file(dir / "bad.csv", text + bad_row);
    CHECK_THROWS_WITH_AS(load_landmark_trajectory(dir / "bad.csv", 50.0),
                         doctest::Contains("row 4"), ParseError);

    std::string short_row = data_row(1);
    short_row = short_row.substr(0, short_row.rfind(',')) + "\n";
    write_file(dir / "short.csv", header() + data_row(0) + short_row);
    CHECK_THROWS_AS(load_landmark_trajectory(dir / "short.csv", 50.0), FormatError);

    write_file(dir / "nonmono.csv", header() + data_row(5) + data_row(5));
    CHECK_THROWS_AS(load_landmark_trajectory(dir / "nonmono.csv", 50.0), FormatError);
}

TEST_CASE("trajectory loader only accepts 68 or 128 point layouts") {
    const auto dir = temp_dir("traj_layout");
    save_landmark_trajectory(random_traj(3, 10, 4), dir / "ten.csv");
    CHECK_THROWS_AS(load_landmark_trajectory(dir / "ten.csv", 50.0), FormatError);
}

TEST_CASE("single-column ppg needs a rate; 7 s at 128 Hz gives 896 samples") {
    const auto dir = temp_dir("ppg_single");
    std::string text = "value\n";
    for (int i = 0; i < 896; ++i) text += std::to_string(i % 10) + "\n";
    write_file(dir / "p.csv", text);
    const auto ppg = load_ppg(dir / "p.csv", 128.0);
    CHECK(ppg.samples.size() == 896);
    CHECK(ppg.rate == 128.0);
    CHECK(ppg.duration() == doctest::Approx(7.0));
    CHECK_THROWS_AS(load_ppg(dir / "p.csv"), UsageError);
}

TEST_CASE("two-column ppg infers the rate from uniform steps") {
    const auto dir = temp_dir("ppg_two");
    std::string text = "t,value\n";
    for (int i = 0; i < 64; ++i) {
        char ts[32];
        std::snprintf(ts, sizeof(ts), "%.10f", i * 0.0078125);
        text += std::string(ts) + "," + std::to_string(i % 5) + "\n";
    }
    write_file(dir / "p.csv", text);
    const auto ppg = load_ppg(dir / "p.csv");
    CHECK(ppg.rate == doctest::Approx(128.0).epsilon(1e-6));
}

TEST_CASE("a gap in two-column timestamps is a sampling error") {
    const auto dir = temp_dir("ppg_gap");
    std::string text = "t,value\n0.0,1\n0.1,2\n0.2,1\n0.7,2\n0.8,1\n";
    write_file(dir / "p.csv", text);
    CHECK_THROWS_AS(load_ppg(dir / "p.csv"), SamplingError);
}

TEST_CASE("empty ppg file is a format error") {
    const auto dir = temp_dir("ppg_empty");
    write_file(dir / "p.csv", "");
    CHECK_THROWS_AS(load_ppg(dir / "p.csv", 128.0), FormatError);
}

TEST_CASE("manifest round-trip preserves trials and rejects duplicates") {
    const auto dir = temp_dir("manifest");
    Dataset ds;
    ds.fps = 50.0;
    ds.ppg_rate = 128.0;
    for (int s = 1; s <= 2; ++s)
        for (Label label : {Label::Pct0, Label::Pct50, Label::Pct100}) {
            TrialRecord t;
            t.subject_id = "s" + std::to_string(s);
            t.label = label;
            t.landmark_path = dir / (t.subject_id + "_lm_" + to_string(label) + ".csv");
            t.ppg_path = dir / (t.subject_id + "_ppg_" + to_string(label) + ".csv");
            ds.trials.push_back(t);
        }
    save_manifest(ds, dir / "manifest.csv");
    const auto back = load_manifest(dir / "manifest.csv");
    CHECK(back.trials.size() == 6);
    CHECK(back.fps == 50.0);
    CHECK(back.ppg_rate == 128.0);
    CHECK(back.subject_ids() == std::vector<std::string>{"s1", "s2"});
    CHECK(back.trials[0].landmark_path == ds.trials[0].landmark_path);

    std::string text = "fps=50,ppg_rate=128\nsubject_id,label,landmark_path,ppg_path\n"
                       "s1,0,a.csv,b.csv\ns1,0,c.csv,d.csv\n";
    write_file(dir / "dup.csv", text);
    CHECK_THROWS_AS(load_manifest(dir / "dup.csv"), FormatError);
}

TEST_CASE("synthetic generation is deterministic and calibrated") {
    const auto dir1 = temp_dir("synth1");
    const auto dir2 = temp_dir("synth2");
    SynthConfig config;
    config.n_subjects = 4;
    config.seed = 7;
    config.include_unseen = true;

    config.out_dir = dir1;
    const auto ds1 = synth_dataset(config);
    config.out_dir = dir2;
    const auto ds2 = synth_dataset(config);
    CHECK(ds1.trials.size() == 16);  // 12 labeled + 4 unseen

    // byte-identical trees
    for (const auto& entry : fs::recursive_directory_iterator(dir1)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir1);
        if (rel == "manifest.csv") continue;  // embeds absolute-free relative paths anyway
        std::ifstream a(entry.path(), std::ios::binary);
        std::ifstream b(dir2 / rel, std::ios::binary);
        REQUIRE(b.good());
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    // per-subject movement ordering and beat-period calibration
    for (const auto& subject : ds1.subject_ids()) {
        std::map<Label, double> mean_move;
        std::map<Label, double> mean_period;
        for (const auto* trial : ds1.trials_for(subject)) {
            if (trial->label == Label::Unseen) continue;
            auto traj = load_landmark_trajectory(trial->landmark_path, ds1.fps);
            traj = derive_cheek_landmarks(traj);
            const auto d1 = average_movement(traj);
            double sum = 0.0;
            for (double v : d1.d) sum += v;
            mean_move[trial->label] = sum / static_cast<double>(d1.d.size());

            const auto ppg = load_ppg(trial->ppg_path, ds1.ppg_rate);
            const auto beats = segment_beats(ppg);
            REQUIRE(beats.size() >= 2);
            mean_period[trial->label] = interval_stats(beats).mean;
        }
        CHECK(mean_move[Label::Pct100] > mean_move[Label::Pct50]);
        CHECK(mean_move[Label::Pct50] >= mean_move[Label::Pct0]);
        CHECK(mean_period[Label::Pct0] > mean_period[Label::Pct50]);
        CHECK(mean_period[Label::Pct0] == doctest::Approx(1.03).epsilon(0.05));
        CHECK(mean_period[Label::Pct50] == doctest::Approx(0.86).epsilon(0.05));
    }

    // nose group moves least
    const auto traj = derive_cheek_landmarks(
        load_landmark_trajectory(ds1.trials[2].landmark_path, ds1.fps));
    const auto stats = group_movement_stats(average_movement(traj));
    for (std::size_t g = 0; g < stats.size(); ++g)
        if (g != 3) CHECK(stats[3].mean < stats[g].mean);
}

TEST_CASE("model save/load round-trips predictions exactly") {
    const auto dir = temp_dir("model");
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);

    std::vector<LabeledD1> d1_set;
    std::vector<LabeledD2> d2_set;
    for (int s = 0; s < 6; ++s) {
        for (Label label : {Label::Pct0, Label::Pct50, Label::Pct100}) {
            LabeledD1 d1;
            d1.label = label;
            const double base = label == Label::Pct100 ? 5.0 : (label == Label::Pct50 ? 1.0 : 0.4);
            for (auto& v : d1.features.d) v = base + 0.1 * n(rng);
            d1_set.push_back(d1);
            if (label == Label::Pct100) continue;
            LabeledD2 d2;
            d2.label = label;
            const double period = label == Label::Pct0 ? 1.03 : 0.86;
            for (auto& v : d2.features.f) v = period + 0.02 * n(rng);
            d2_set.push_back(d2);
        }
    }
    CascadeConfig config;
    config.nn1_epochs = 30;
    config.nn2_epochs = 30;
    config.seed = 9;
    const auto trained = fit_cascade(d1_set, d2_set, config);

    const auto path = dir / "model.json";
    save_model(trained.model, path);
    const auto loaded = load_model(path);
    CHECK(loaded.seed == 9);
    CHECK(loaded.nn1_epochs == 30);

    for (int trial = 0; trial < 100; ++trial) {
        MovementFeatures d1;
        for (auto& v : d1.d) v = std::abs(n(rng)) * 3.0;
        PpgFeatures d2;
        for (auto& v : d2.f) v = std::abs(n(rng));
        const auto p1 = predict(trained.model, d1, d2);
        const auto p2 = predict(loaded, d1, d2);
        CHECK(p1.level == p2.level);
        CHECK(p1.prob_a == p2.prob_a);
        CHECK(p1.prob_b == p2.prob_b);
        if (p1.level_probs) {
            REQUIRE(p2.level_probs.has_value());
            CHECK(p1.level_probs->first == p2.level_probs->first);
            CHECK(p1.level_probs->second == p2.level_probs->second);
        }
    }
}

TEST_CASE("model loader rejects bad files") {
    const auto dir = temp_dir("model_bad");
    write_file(dir / "trunc.json", "{\"format\":\"fex-cascade\",\"version\":1,\"nn");
    CHECK_THROWS_AS(load_model(dir / "trunc.json"), FormatError);

    write_file(dir / "ver.json", "{\"format\":\"fex-cascade\",\"version\":999}");
    CHECK_THROWS_AS(load_model(dir / "ver.json"), UnsupportedVersionError);

    // corrupted length: weight array shorter than its declared shape
    write_file(dir / "len.json",
               R"({"format":"fex-cascade","version":1,"seed":0,"nn1_epochs":1,"nn2_epochs":1,
                   "nn1":{"input_dim":128,"hidden_dims":[2],"output_dim":2,"elu_alpha":1.0,
                          "activation":"elu","use_batchnorm":true,
                          "scaler_mean":[], "scaler_sd":[],
                          "layers":[{"rows":128,"cols":2,"weight":[1.0,2.0],"bias":[0,0],
                                     "has_batchnorm":false}]},
                   "nn2":{}})");
    CHECK_THROWS_AS(load_model(dir / "len.json"), FormatError);
}
