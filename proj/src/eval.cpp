#include "wsn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace wsn::eval {

namespace {

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// ============================================================================
// Confusion and ratio metrics
// ============================================================================

ConfusionCounts confusion(const LabelGrid& pred, const LabelGrid& truth) {
    if (pred.shape != truth.shape)
        throw DimensionError("confusion: prediction and truth grids have different shapes");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool t = truth.values[i] != 0;
        if (p && t) ++c.tp;
        else if (!p && !t) ++c.tn;
        else if (p && !t) ++c.fp;
        else ++c.fn;
    }
    return c;
}

Prf1 precision_recall_f1(const ConfusionCounts& c) {
    if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0)
        throw ContractError("precision_recall_f1: negative counts");
    Prf1 r;
    if (c.tp + c.fp > 0) {
        r.precision = double(c.tp) / double(c.tp + c.fp);
    } else {
        r.precision_degenerate = true;
    }
    if (c.tp + c.fn > 0) {
        r.recall = double(c.tp) / double(c.tp + c.fn);
    } else {
        r.recall_degenerate = true;
    }
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    } else {
        r.f1_degenerate = true;
    }
    return r;
}

// ============================================================================
// AUC
// ============================================================================

double auc(const Tensor& scores, const LabelGrid& truth) {
    if (scores.size() != truth.size())
        throw DimensionError("auc: scores and truth have different cell counts");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    long long positives = 0;
    for (auto v : truth.values) positives += v != 0;
    const long long negatives = static_cast<long long>(truth.size()) - positives;
    if (positives == 0 || negatives == 0)
        throw UndefinedMetricError("auc: truth contains a single class");

    // trapezoid accumulated as an integer so tied groups earn exact half credit
    long long area2 = 0;  // 2 * P * N * AUC
    long long tp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        long long dtp = 0, dfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (truth.values[order[j]] != 0) ++dtp;
            else ++dfp;
            ++j;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        i = j;
    }
    return double(area2) / (2.0 * double(positives) * double(negatives));
}

double auc(const model::AnomalyScoreGrid& scores, const LabelGrid& truth) {
    return auc(scores.scores, truth);
}

// ============================================================================
// Pooled evaluation
// ============================================================================

LabelGrid tail_labels(const LabelGrid& full, std::size_t tail) {
    if (full.shape.size() != 3 || tail == 0 || tail > full.shape[2])
        throw DimensionError("tail_labels: bad tail slice");
    LabelGrid out(full.shape[0], full.shape[1], tail);
    const std::size_t offset = full.shape[2] - tail;
    for (std::size_t i = 0; i < full.shape[0]; ++i)
        for (std::size_t j = 0; j < full.shape[1]; ++j)
            for (std::size_t k = 0; k < tail; ++k)
                out.at3(i, j, k) = full.at3(i, j, offset + k);
    return out;
}

MetricsReport evaluate_pooled(const std::vector<model::AnomalyScoreGrid>& scores,
                              const std::vector<LabelGrid>& truth, double threshold) {
    if (scores.size() != truth.size() || scores.empty())
        throw ContractError("evaluate_pooled: need matching nonempty score/truth sets");
    std::size_t cells = 0;
    for (const auto& g : scores) cells += g.scores.size();

    Tensor pooled_scores({cells});
    LabelGrid pooled_pred(1, 1, cells), pooled_truth(1, 1, cells);
    std::size_t at = 0;
    for (std::size_t w = 0; w < scores.size(); ++w) {
        if (scores[w].scores.size() != truth[w].size())
            throw DimensionError("evaluate_pooled: window " + std::to_string(w) +
                                 " score/truth shape mismatch");
        for (std::size_t i = 0; i < scores[w].scores.size(); ++i, ++at) {
            pooled_scores[at] = scores[w].scores[i];
            pooled_pred.values[at] = scores[w].scores[i] > threshold ? 1 : 0;
            pooled_truth.values[at] = truth[w].values[i];
        }
    }
    MetricsReport report;
    report.counts = confusion(pooled_pred, pooled_truth);
    report.prf = precision_recall_f1(report.counts);
    try {
        report.auc = auc(pooled_scores, pooled_truth);
    } catch (const UndefinedMetricError&) {
        report.auc = std::nullopt;
    }
    return report;
}

// ============================================================================
// Reliability resampling
// ============================================================================

namespace {

Moments moments_of(const std::vector<double>& xs) {
    Moments m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= double(xs.size());
    for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= double(xs.size());
    m.stddev = std::sqrt(m.var);
    return m;
}

}  // namespace

ResampleSummary reliability_resample(const std::vector<model::AnomalyScoreGrid>& window_scores,
                                     const std::vector<LabelGrid>& window_truth, double threshold,
                                     std::size_t segments, std::size_t pick, std::size_t trials,
                                     std::uint64_t seed) {
    if (segments < pick || pick < 1)
        throw ConfigError("reliability: need segments >= pick >= 1, got " +
                          std::to_string(segments) + " / " + std::to_string(pick));
    if (trials < 1) throw ConfigError("reliability: trials must be >= 1");
    if (window_scores.size() != window_truth.size() || window_scores.size() < segments)
        throw ConfigError("reliability: need at least one window per segment");

    // contiguous segments over the window list
    const std::size_t n = window_scores.size();
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    for (std::size_t s = 0; s < segments; ++s)
        bounds.emplace_back(s * n / segments, (s + 1) * n / segments);

    ResampleSummary summary;
    std::vector<double> ps, rs, fs;
    Rng master(seed);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(master.derive(trial));
        std::vector<std::size_t> segment_ids(segments);
        std::iota(segment_ids.begin(), segment_ids.end(), 0);
        for (std::size_t i = segments - 1; i > 0; --i)
            std::swap(segment_ids[i], segment_ids[rng.index(i + 1)]);
        segment_ids.resize(pick);
        std::sort(segment_ids.begin(), segment_ids.end());

        std::vector<model::AnomalyScoreGrid> scores;
        std::vector<LabelGrid> truth;
        for (std::size_t s : segment_ids) {
            for (std::size_t w = bounds[s].first; w < bounds[s].second; ++w) {
                scores.push_back(window_scores[w]);
                truth.push_back(window_truth[w]);
            }
        }
        summary.trials.push_back(evaluate_pooled(scores, truth, threshold));
        ps.push_back(summary.trials.back().prf.precision);
        rs.push_back(summary.trials.back().prf.recall);
        fs.push_back(summary.trials.back().prf.f1);
    }
    summary.precision = moments_of(ps);
    summary.recall = moments_of(rs);
    summary.f1 = moments_of(fs);
    return summary;
}

void write_resample_csv(const ResampleSummary& summary, std::ostream& out) {
    out << "trial,precision,recall,f1,auc\n";
    for (std::size_t i = 0; i < summary.trials.size(); ++i) {
        const auto& t = summary.trials[i];
        out << (i + 1) << "," << fmt_double(t.prf.precision) << "," << fmt_double(t.prf.recall)
            << "," << fmt_double(t.prf.f1) << ","
            << (t.auc ? fmt_double(*t.auc) : std::string("undefined")) << "\n";
    }
    out << "mean," << fmt_double(summary.precision.mean) << "," << fmt_double(summary.recall.mean)
        << "," << fmt_double(summary.f1.mean) << ",\n";
    out << "var," << fmt_double(summary.precision.var) << "," << fmt_double(summary.recall.var)
        << "," << fmt_double(summary.f1.var) << ",\n";
    out << "std," << fmt_double(summary.precision.stddev) << ","
        << fmt_double(summary.recall.stddev) << "," << fmt_double(summary.f1.stddev) << ",\n";
    if (!out.good()) throw IoError("reliability: csv write failed");
}

// ============================================================================
// Robustness sweep
// ============================================================================

std::vector<RobustnessRow> robustness_sweep(const model::Network& net,
                                            const model::ModelParams& params, double threshold,
                                            const data::LabeledWindowSet& clean_windows,
                                            const std::vector<double>& alphas, double rate,
                                            std::uint64_t seed) {
    if (alphas.empty()) throw ConfigError("robustness: alpha list is empty");
    for (double a : alphas)
        if (a == 0.0) throw ConfigError("robustness: alpha 0 is not an anomaly");
    if (!params.trained) throw ContractError("robustness: parameters are untrained");

    Rng master(seed);
    std::vector<RobustnessRow> rows;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const data::LabeledWindowSet injected =
            data::inject_anomalies(clean_windows, alphas[ai], rate, master.derive(ai));
        std::vector<model::AnomalyScoreGrid> scores;
        std::vector<LabelGrid> truth;
        const std::size_t tail = net.config().detect_tail;
        for (std::size_t w = 0; w < injected.count(); ++w) {
            scores.push_back(model::score(net, injected.windows[w], params));
            truth.push_back(tail_labels(injected.labels[w], tail));
        }
        RobustnessRow row;
        row.alpha = alphas[ai];
        row.metrics = evaluate_pooled(scores, truth, threshold);
        rows.push_back(row);
    }
    return rows;
}

void write_robustness_csv(const std::vector<RobustnessRow>& rows, std::ostream& out) {
    out << "alpha,precision,recall,f1,auc,tp,tn,fp,fn\n";
    for (const auto& r : rows) {
        out << fmt_double(r.alpha) << "," << fmt_double(r.metrics.prf.precision) << ","
            << fmt_double(r.metrics.prf.recall) << "," << fmt_double(r.metrics.prf.f1) << ","
            << (r.metrics.auc ? fmt_double(*r.metrics.auc) : std::string("undefined")) << ","
            << r.metrics.counts.tp << "," << r.metrics.counts.tn << "," << r.metrics.counts.fp
            << "," << r.metrics.counts.fn << "\n";
    }
    if (!out.good()) throw IoError("robustness: csv write failed");
}

}  // namespace wsn::eval
