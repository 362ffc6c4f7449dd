#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsn/data.hpp"
#include "wsn/labels.hpp"
#include "wsn/model.hpp"
#include "wsn/tensor.hpp"

namespace wsn::eval {

// ============================================================================
// Classification metrics
// ============================================================================

struct ConfusionCounts {
    long long tp = 0;
    long long tn = 0;
    long long fp = 0;
    long long fn = 0;
    long long total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(const LabelGrid& pred, const LabelGrid& truth);

struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // zero-denominator metrics report 0 and raise the matching flag
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

Prf1 precision_recall_f1(const ConfusionCounts& c);

// Area under the ROC curve by trapezoid over score thresholds; tied scores
// are grouped, which makes the result identical to pairwise ranking with
// half credit for ties. Throws UndefinedMetricError on single-class truth.
double auc(const Tensor& scores, const LabelGrid& truth);
double auc(const model::AnomalyScoreGrid& scores, const LabelGrid& truth);

struct MetricsReport {
    Prf1 prf;
    std::optional<double> auc;  // absent when the truth is single-class
    ConfusionCounts counts;
};

// Pooled metrics over aligned (scores, truth) grids at a fixed threshold.
MetricsReport evaluate_pooled(const std::vector<model::AnomalyScoreGrid>& scores,
                              const std::vector<LabelGrid>& truth, double threshold);

// Last `tail` steps of a full-window label grid, aligned with score grids.
LabelGrid tail_labels(const LabelGrid& full, std::size_t tail);

// ============================================================================
// Reliability resampling
// ============================================================================

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // population variance, so one trial gives 0
    double stddev = 0.0;
};

struct ResampleSummary {
    std::vector<MetricsReport> trials;
    Moments precision;
    Moments recall;
    Moments f1;
};

// Splits the windows into `segments` contiguous segments; each trial pools a
// random choice of `pick` segments. Per-trial seeds derive from `seed`.
ResampleSummary reliability_resample(const std::vector<model::AnomalyScoreGrid>& window_scores,
                                     const std::vector<LabelGrid>& window_truth, double threshold,
                                     std::size_t segments, std::size_t pick, std::size_t trials,
                                     std::uint64_t seed);

void write_resample_csv(const ResampleSummary& summary, std::ostream& out);

// ============================================================================
// Robustness sweep
// ============================================================================

struct RobustnessRow {
    double alpha = 0.0;
    MetricsReport metrics;
};

// One injection + evaluation per alpha on copies of the clean test windows.
std::vector<RobustnessRow> robustness_sweep(const model::Network& net,
                                            const model::ModelParams& params, double threshold,
                                            const data::LabeledWindowSet& clean_windows,
                                            const std::vector<double>& alphas, double rate,
                                            std::uint64_t seed);

void write_robustness_csv(const std::vector<RobustnessRow>& rows, std::ostream& out);

}  // namespace wsn::eval
