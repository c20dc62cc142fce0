#pragma once

#include <array>
#include <vector>

#include "fex/types.hpp"

namespace fex {

inline constexpr std::size_t kPpgFeatureCount = 21;
inline constexpr std::size_t kMinBeatsForFeatures = 5;

// D2: 21 beat-interval and amplitude-variability features.
// f1-f5   T2-T1 for beats 1-5
// f6-f9   T3-T2 for beats 1-4
// f10-f13 T3-T1 for beats 1-4
// f14     SD of amplitude at T2 over all beats
// f15     SD of amplitude at T1 over all beats
// f16-f18 means of the three interval series over all beats
// f19-f21 SDs of the three interval series over all beats
struct PpgFeatures {
    std::array<double, kPpgFeatureCount> f{};
};

struct IntervalStats {
    double mean = 0.0;
    double sd = 0.0;
};

// Segments the waveform into consecutive beats. Local extrema are found by
// strict neighbor comparison with plateau handling (the plateau's first
// sample is the extremum); boundary samples qualify by one-sided comparison.
// Maxima with prominence below min_prominence * signal range are discarded,
// and of two maxima closer than min_period the lower one is dropped.
std::vector<Beat> segment_beats(const PpgRecord& ppg, double min_prominence = 0.1,
                                double min_period = 0.3);

PpgFeatures extract_ppg_features(const std::vector<Beat>& beats);

// Mean and sample SD of T3-T1 across beats.
IntervalStats interval_stats(const std::vector<Beat>& beats);

}  // namespace fex
