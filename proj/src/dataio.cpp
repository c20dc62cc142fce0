#include "fex/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fex {
namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t row) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError("non-numeric cell '" + cell + "' at row " + std::to_string(row));
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

json layer_to_json(const Layer& layer) {
    json j;
    j["rows"] = layer.weight.rows;
    j["cols"] = layer.weight.cols;
    j["weight"] = layer.weight.a;
    j["bias"] = layer.bias;
    j["has_batchnorm"] = layer.has_batchnorm;
    if (layer.has_batchnorm) {
        j["gamma"] = layer.gamma;
        j["beta"] = layer.beta;
        j["running_mean"] = layer.running_mean;
        j["running_var"] = layer.running_var;
    }
    return j;
}

Layer layer_from_json(const json& j) {
    Layer layer;
    layer.weight = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    layer.weight.a = j.at("weight").get<std::vector<double>>();
    if (layer.weight.a.size() != layer.weight.rows * layer.weight.cols)
        throw FormatError("model file: weight length does not match its declared shape");
    layer.bias = j.at("bias").get<std::vector<double>>();
    if (layer.bias.size() != layer.weight.cols)
        throw FormatError("model file: bias length does not match its declared shape");
    layer.has_batchnorm = j.at("has_batchnorm").get<bool>();
    if (layer.has_batchnorm) {
        layer.gamma = j.at("gamma").get<std::vector<double>>();
        layer.beta = j.at("beta").get<std::vector<double>>();
        layer.running_mean = j.at("running_mean").get<std::vector<double>>();
        layer.running_var = j.at("running_var").get<std::vector<double>>();
        if (layer.gamma.size() != layer.weight.cols || layer.beta.size() != layer.weight.cols ||
            layer.running_mean.size() != layer.weight.cols ||
            layer.running_var.size() != layer.weight.cols)
            throw FormatError("model file: batchnorm parameter length mismatch");
    }
    return layer;
}

json mlp_to_json(const MlpModel& model) {
    json j;
    j["input_dim"] = model.config.input_dim;
    j["hidden_dims"] = model.config.hidden_dims;
    j["output_dim"] = model.config.output_dim;
    j["elu_alpha"] = model.config.elu_alpha;
    j["activation"] = model.config.activation == Activation::Elu ? "elu" : "identity";
    j["use_batchnorm"] = model.config.use_batchnorm;
    j["scaler_mean"] = model.scaler.mean;
    j["scaler_sd"] = model.scaler.sd;
    j["layers"] = json::array();
    for (const auto& layer : model.layers) j["layers"].push_back(layer_to_json(layer));
    return j;
}

MlpModel mlp_from_json(const json& j) {
    MlpModel model;
    model.config.input_dim = j.at("input_dim").get<std::size_t>();
    model.config.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    model.config.output_dim = j.at("output_dim").get<std::size_t>();
    model.config.elu_alpha = j.at("elu_alpha").get<double>();
    model.config.activation =
        j.at("activation").get<std::string>() == "elu" ? Activation::Elu : Activation::Identity;
    model.config.use_batchnorm = j.at("use_batchnorm").get<bool>();
    model.scaler.mean = j.at("scaler_mean").get<std::vector<double>>();
    model.scaler.sd = j.at("scaler_sd").get<std::vector<double>>();
    if (model.scaler.mean.size() != model.config.input_dim ||
        model.scaler.sd.size() != model.config.input_dim)
        throw FormatError("model file: scaler length mismatch");
    for (const auto& lj : j.at("layers")) model.layers.push_back(layer_from_json(lj));
    if (model.layers.size() != model.config.hidden_dims.size() + 1)
        throw FormatError("model file: layer count mismatch");
    return model;
}

}  // namespace

std::string to_string(Label label) {
    switch (label) {
        case Label::Pct0: return "0";
        case Label::Pct50: return "50";
        case Label::Pct100: return "100";
        case Label::Unseen: return "unseen";
    }
    throw UsageError("to_string: bad label");
}

Label parse_label(const std::string& text) {
    if (text == "0") return Label::Pct0;
    if (text == "50") return Label::Pct50;
    if (text == "100") return Label::Pct100;
    if (text == "unseen") return Label::Unseen;
    throw ParseError("unknown label '" + text + "'");
}

std::vector<std::string> Dataset::subject_ids() const {
    std::vector<std::string> ids;
    for (const auto& t : trials)
        if (std::find(ids.begin(), ids.end(), t.subject_id) == ids.end())
            ids.push_back(t.subject_id);
    return ids;
}

std::vector<const TrialRecord*> Dataset::trials_for(const std::string& subject_id) const {
    std::vector<const TrialRecord*> out;
    for (const auto& t : trials)
        if (t.subject_id == subject_id) out.push_back(&t);
    return out;
}

LandmarkTrajectory load_landmark_trajectory(const std::filesystem::path& path, double fps) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "frame")
        throw FormatError(path.string() + ": header must start with 'frame'");
    const std::size_t n_points = (header.size() - 1) / 2;
    if (header.size() != 1 + 2 * n_points ||
        (n_points != kInputLandmarks && n_points != kTotalLandmarks))
        throw FormatError(path.string() + ": expected 68 or 128 landmark columns, got " +
                          std::to_string((header.size() - 1) / 2.0));

    LandmarkTrajectory traj;
    traj.fps = fps;
    std::size_t row = 1;
    long long prev_frame = -1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(header.size()));
        const auto frame_idx = static_cast<long long>(parse_cell(cells[0], row));
        if (frame_idx <= prev_frame)
            throw FormatError(path.string() + ": frame indices not strictly increasing at row " +
                              std::to_string(row));
        prev_frame = frame_idx;
        std::vector<Point> pts(n_points);
        for (std::size_t p = 0; p < n_points; ++p) {
            pts[p].x = parse_cell(cells[1 + 2 * p], row);
            pts[p].y = parse_cell(cells[2 + 2 * p], row);
        }
        traj.frames.push_back(std::move(pts));
    }
    if (traj.frames.empty()) throw FormatError(path.string() + ": no data rows");
    return traj;
}

void save_landmark_trajectory(const LandmarkTrajectory& traj,
                              const std::filesystem::path& path) {
    auto out = open_output(path);
    const std::size_t n_points = traj.points_per_frame();
    out << "frame";
    for (std::size_t p = 0; p < n_points; ++p) out << ",x" << p << ",y" << p;
    out << "\n";
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        out << i;
        for (const auto& pt : traj.frames[i])
            out << ',' << fmt_double(pt.x) << ',' << fmt_double(pt.y);
        out << "\n";
    }
}

PpgRecord load_ppg(const std::filesystem::path& path, double rate) {
    auto in = open_input(path);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (first) {
            first = false;
            // optional header line
            double probe;
            auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), probe);
            if (ec != std::errc() || ptr != cells[0].data() + cells[0].size()) continue;
        }
        std::vector<double> vals;
        for (const auto& c : cells) vals.push_back(parse_cell(c, row));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw FormatError(path.string() + ": empty PPG file");
    const std::size_t n_cols = rows.front().size();
    if (n_cols != 1 && n_cols != 2)
        throw FormatError(path.string() + ": expected 1 or 2 columns");
    for (const auto& r : rows)
        if (r.size() != n_cols) throw FormatError(path.string() + ": ragged rows");

    PpgRecord ppg;
    if (n_cols == 1) {
        if (rate <= 0.0)
            throw UsageError(path.string() + ": single-column PPG requires a sampling rate");
        ppg.rate = rate;
        for (const auto& r : rows) ppg.samples.push_back(r[0]);
    } else {
        if (rows.size() < 2) throw FormatError(path.string() + ": need at least 2 samples");
        const double step = rows[1][0] - rows[0][0];
        if (step <= 0.0) throw SamplingError(path.string() + ": non-increasing timestamps");
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double d = rows[i][0] - rows[i - 1][0];
            if (std::abs(d - step) > 1e-6)
                throw SamplingError(path.string() + ": non-uniform sampling at row " +
                                    std::to_string(i + 1) + " (step " + fmt_double(d) +
                                    " vs " + fmt_double(step) + ")");
        }
        ppg.rate = 1.0 / step;
        ppg.t0 = rows[0][0];
        for (const auto& r : rows) ppg.samples.push_back(r[1]);
    }
    if (ppg.samples.size() < 2) throw FormatError(path.string() + ": need at least 2 samples");
    return ppg;
}

void save_ppg(const PpgRecord& ppg, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "value\n";
    for (double v : ppg.samples) out << fmt_double(v) << "\n";
}

Dataset load_manifest(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty manifest");
    // first line: fps,ppg_rate
    {
        const auto cells = split_csv(line);
        if (cells.size() != 2 || cells[0].rfind("fps=", 0) != 0 ||
            cells[1].rfind("ppg_rate=", 0) != 0)
            throw FormatError(path.string() + ": manifest must start with 'fps=..,ppg_rate=..'");
    }
    Dataset ds;
    const auto meta = split_csv(line);
    ds.fps = parse_cell(meta[0].substr(4), 1);
    ds.ppg_rate = parse_cell(meta[1].substr(9), 1);
    if (ds.fps <= 0.0 || ds.ppg_rate <= 0.0)
        throw FormatError(path.string() + ": fps and ppg_rate must be > 0");

    if (!std::getline(in, line) || line != "subject_id,label,landmark_path,ppg_path")
        throw FormatError(path.string() + ": missing manifest header row");

    const auto base = path.parent_path();
    std::set<std::pair<std::string, Label>> seen;
    std::size_t row = 2;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 4)
            throw FormatError(path.string() + ": row " + std::to_string(row) +
                              " must have 4 fields");
        TrialRecord trial;
        trial.subject_id = cells[0];
        trial.label = parse_label(cells[1]);
        trial.landmark_path = base / cells[2];
        trial.ppg_path = base / cells[3];
        if (trial.label != Label::Unseen &&
            !seen.insert({trial.subject_id, trial.label}).second)
            throw FormatError(path.string() + ": duplicate (subject,label) at row " +
                              std::to_string(row));
        ds.trials.push_back(std::move(trial));
    }
    return ds;
}

void save_manifest(const Dataset& dataset, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "fps=" << fmt_double(dataset.fps) << ",ppg_rate=" << fmt_double(dataset.ppg_rate)
        << "\n";
    out << "subject_id,label,landmark_path,ppg_path\n";
    const auto base = path.parent_path();
    for (const auto& t : dataset.trials)
        out << t.subject_id << ',' << to_string(t.label) << ','
            << std::filesystem::relative(t.landmark_path, base).generic_string() << ','
            << std::filesystem::relative(t.ppg_path, base).generic_string() << "\n";
}

void save_model(const CascadeModel& model, const std::filesystem::path& path) {
    json j;
    j["format"] = "fex-cascade";
    j["version"] = kModelFormatVersion;
    j["seed"] = model.seed;
    j["nn1_epochs"] = model.nn1_epochs;
    j["nn2_epochs"] = model.nn2_epochs;
    j["nn1"] = mlp_to_json(model.nn1);
    j["nn2"] = mlp_to_json(model.nn2);
    auto out = open_output(path);
    out << j.dump(1) << "\n";
}

CascadeModel load_model(const std::filesystem::path& path) {
    auto in = open_input(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": not a valid model file (" + e.what() + ")");
    }
    try {
        if (j.at("format").get<std::string>() != "fex-cascade")
            throw FormatError(path.string() + ": not a cascade model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw UnsupportedVersionError(path.string() + ": unsupported model version " +
                                          std::to_string(version));
        CascadeModel model;
        model.seed = j.at("seed").get<std::uint64_t>();
        model.nn1_epochs = j.at("nn1_epochs").get<std::size_t>();
        model.nn2_epochs = j.at("nn2_epochs").get<std::size_t>();
        model.nn1 = mlp_from_json(j.at("nn1"));
        model.nn2 = mlp_from_json(j.at("nn2"));
        if (model.nn1.config.input_dim != kTotalLandmarks ||
            model.nn2.config.input_dim != kPpgFeatureCount)
            throw FormatError(path.string() + ": model dimensions do not match the cascade");
        return model;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed model file (" + e.what() + ")");
    }
}

}  // namespace fex
