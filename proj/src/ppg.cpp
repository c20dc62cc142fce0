#include "fex/ppg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fex {
namespace {

struct Extremum {
    std::size_t index;  // plateau's first sample
    double value;
    bool is_max;
};

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double sample_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Alternating strict local extrema with plateau compression; boundary
// samples qualify by one-sided comparison.
std::vector<Extremum> find_extrema(const std::vector<double>& s) {
    // Compress plateaus to (first index, value) runs.
    std::vector<std::pair<std::size_t, double>> runs;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (runs.empty() || runs.back().second != s[i]) runs.emplace_back(i, s[i]);
    }
    std::vector<Extremum> out;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const bool down_left = r == 0 || runs[r - 1].second > runs[r].second;
        const bool down_right = r + 1 == runs.size() || runs[r + 1].second > runs[r].second;
        const bool up_left = r == 0 || runs[r - 1].second < runs[r].second;
        const bool up_right = r + 1 == runs.size() || runs[r + 1].second < runs[r].second;
        if (down_left && down_right)
            out.push_back({runs[r].first, runs[r].second, false});
        else if (up_left && up_right)
            out.push_back({runs[r].first, runs[r].second, true});
    }
    return out;
}

// Prominence of a max = min height over its flanking minima; maxima below
// the threshold are removed and their flanking minima merged (lower kept).
void prominence_filter(std::vector<Extremum>& ex, double threshold) {
    if (threshold <= 0.0) return;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < ex.size(); ++i) {
            if (!ex[i].is_max) continue;
            const double left = i > 0 ? ex[i].value - ex[i - 1].value : threshold;
            const double right = i + 1 < ex.size() ? ex[i].value - ex[i + 1].value : threshold;
            if (std::min(left, right) >= threshold) continue;
            // Drop this max; keep the lower of the flanking minima.
            std::size_t erase_min;
            if (i == 0 || i + 1 == ex.size())
                erase_min = ex.size();  // boundary max, nothing to merge
            else
                erase_min = ex[i - 1].value <= ex[i + 1].value ? i + 1 : i - 1;
            if (erase_min < ex.size() && erase_min > i) {
                ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(erase_min));
                ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(i));
            } else if (erase_min < ex.size()) {
                ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(i));
                ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(erase_min));
            } else {
                ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(i));
            }
            changed = true;
            break;
        }
    }
}

// Of two maxima closer than min_period, drop the lower; the separating
// minimum goes with it.
void period_filter(std::vector<Extremum>& ex, double min_period, double rate) {
    if (min_period <= 0.0) return;
    bool changed = true;
    while (changed) {
        changed = false;
        std::size_t prev_max = ex.size();
        for (std::size_t i = 0; i < ex.size(); ++i) {
            if (!ex[i].is_max) continue;
            if (prev_max != ex.size()) {
                const double dt =
                    static_cast<double>(ex[i].index - ex[prev_max].index) / rate;
                if (dt < min_period) {
                    const std::size_t victim =
                        ex[i].value < ex[prev_max].value ? i : prev_max;
                    // Remove the weaker max and the minimum adjacent to it
                    // between the two maxima.
                    const std::size_t sep = victim == i ? i - 1 : victim + 1;
                    const std::size_t a = std::min(victim, sep);
                    const std::size_t b = std::max(victim, sep);
                    ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(b));
                    ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(a));
                    changed = true;
                    break;
                }
            }
            prev_max = i;
        }
    }
}

}  // namespace

std::vector<Beat> segment_beats(const PpgRecord& ppg, double min_prominence,
                                double min_period) {
    if (ppg.samples.size() < 2) throw FormatError("segment_beats: need at least 2 samples");
    if (min_prominence < 0.0 || min_prominence >= 1.0)
        throw UsageError("segment_beats: min_prominence must be in [0,1)");
    for (std::size_t i = 0; i < ppg.samples.size(); ++i)
        if (!std::isfinite(ppg.samples[i]))
            throw NumericError("segment_beats: non-finite sample at index " +
                               std::to_string(i));

    auto extrema = find_extrema(ppg.samples);
    const auto [lo, hi] = std::minmax_element(ppg.samples.begin(), ppg.samples.end());
    const double range = *hi - *lo;
    prominence_filter(extrema, min_prominence * range);
    period_filter(extrema, min_period, ppg.rate);

    std::vector<Beat> beats;
    for (std::size_t i = 0; i + 2 < extrema.size(); ++i) {
        if (extrema[i].is_max || !extrema[i + 1].is_max || extrema[i + 2].is_max) continue;
        Beat b;
        b.t1 = ppg.t0 + static_cast<double>(extrema[i].index) / ppg.rate;
        b.t2 = ppg.t0 + static_cast<double>(extrema[i + 1].index) / ppg.rate;
        b.t3 = ppg.t0 + static_cast<double>(extrema[i + 2].index) / ppg.rate;
        b.a1 = extrema[i].value;
        b.a2 = extrema[i + 1].value;
        b.a3 = extrema[i + 2].value;
        beats.push_back(b);
    }
    return beats;
}

PpgFeatures extract_ppg_features(const std::vector<Beat>& beats) {
    if (beats.size() < kMinBeatsForFeatures)
        throw InsufficientBeatsError("extract_ppg_features: need at least 5 beats, found " +
                                         std::to_string(beats.size()),
                                     beats.size());
    std::vector<double> t12, t23, t13, a2, a1;
    for (const auto& b : beats) {
        t12.push_back(b.t2 - b.t1);
        t23.push_back(b.t3 - b.t2);
        t13.push_back(b.t3 - b.t1);
        a2.push_back(b.a2);
        a1.push_back(b.a1);
    }
    PpgFeatures out;
    std::size_t k = 0;
    for (std::size_t i = 0; i < 5; ++i) out.f[k++] = t12[i];
    for (std::size_t i = 0; i < 4; ++i) out.f[k++] = t23[i];
    for (std::size_t i = 0; i < 4; ++i) out.f[k++] = t13[i];
    out.f[k++] = sample_sd(a2);
    out.f[k++] = sample_sd(a1);
    out.f[k++] = sample_mean(t12);
    out.f[k++] = sample_mean(t23);
    out.f[k++] = sample_mean(t13);
    out.f[k++] = sample_sd(t12);
    out.f[k++] = sample_sd(t23);
    out.f[k++] = sample_sd(t13);
    return out;
}

IntervalStats interval_stats(const std::vector<Beat>& beats) {
    if (beats.size() < 2)
        throw InsufficientBeatsError("interval_stats: need at least 2 beats, found " +
                                         std::to_string(beats.size()),
                                     beats.size());
    std::vector<double> t13;
    for (const auto& b : beats) t13.push_back(b.t3 - b.t1);
    return {sample_mean(t13), sample_sd(t13)};
}

}  // namespace fex
