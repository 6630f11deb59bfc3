/// @file metrics.hpp
/// @brief Segment-evaluation metrics and the summary score.

#pragma once

#include "msa/types.hpp"

#include <array>

namespace msa {

struct SegmentMetrics {
    double hr05f = 0.0;
    double hr3f = 0.0;
    double pwf = 0.0;
    double sf = 0.0;
    double summary = 0.0;
};

struct MetricsConfig {
    double frame_period = 0.1;
    bool trim_endpoints = false;
    // summary weights for (hr05f, hr3f, pwf, sf)
    std::array<double, 4> weights = {5.0 / 14.0, 2.0 / 14.0, 4.0 / 14.0, 3.0 / 14.0};
};

struct PrecisionRecallF {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Boundary hit-rate F-measure: maximum one-to-one matching of boundaries
/// within `window` seconds. With trim, the first and last boundary of each
/// list are excluded before matching.
PrecisionRecallF hit_rate_f(const std::vector<double>& ref,
                            const std::vector<double>& est, double window,
                            bool trim = false);

/// Pairwise frame-clustering F-measure over unordered same-label frame pairs.
PrecisionRecallF pairwise_f(const std::vector<int>& ref_labels,
                            const std::vector<int>& est_labels);

struct EntropyScores {
    double over = 0.0;  // S_o = 1 - H(est|ref)/log2(#est labels)
    double under = 0.0; // S_u = 1 - H(ref|est)/log2(#ref labels)
    double f = 0.0;     // harmonic mean
};

/// Normalized conditional-entropy scores; a side with <= 1 label scores 1.
EntropyScores entropy_scores(const std::vector<int>& ref_labels,
                             const std::vector<int>& est_labels);

double summary_score(const SegmentMetrics& m,
                     const std::array<double, 4>& weights = {
                         5.0 / 14.0, 2.0 / 14.0, 4.0 / 14.0, 3.0 / 14.0});

/// All four metrics for one song. Frame labels are sampled at
/// cfg.frame_period over the reference duration; the estimate is extended or
/// truncated to match.
SegmentMetrics evaluate_segmentation(const Annotation& ref, const Annotation& est,
                                     const MetricsConfig& cfg = {});

} // namespace msa
