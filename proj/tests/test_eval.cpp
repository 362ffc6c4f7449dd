#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "test_util.hpp"
#include "wsn/eval.hpp"

using namespace wsn;
using namespace wsn::eval;

namespace {

LabelGrid grid_of(const std::vector<int>& bits) {
    LabelGrid g(1, 1, bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) g.values[i] = bits[i] ? 1 : 0;
    return g;
}

// Exhaustive pairwise-ranking oracle with half credit for ties.
double auc_oracle(const Tensor& scores, const LabelGrid& truth) {
    long long wins = 0, ties = 0, p = 0, n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) (truth.values[i] ? p : n) += 1;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!truth.values[i]) continue;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (truth.values[j]) continue;
            if (scores[i] > scores[j]) ++wins;
            else if (scores[i] == scores[j]) ++ties;
        }
    }
    return double(2 * wins + ties) / (2.0 * double(p) * double(n));
}

}  // namespace

TEST_CASE("confusion counting") {
    const LabelGrid zeros = grid_of(std::vector<int>(6, 0));
    const ConfusionCounts all_tn = confusion(zeros, zeros);
    CHECK(all_tn.tn == 6);
    CHECK(all_tn.tp + all_tn.fp + all_tn.fn == 0);

    const LabelGrid truth = grid_of({1, 0, 1, 0});
    const LabelGrid inverted = grid_of({0, 1, 0, 1});
    const ConfusionCounts c = confusion(inverted, truth);
    CHECK(c.tp == 0);
    CHECK(c.tn == 0);
    CHECK(c.fp == 2);
    CHECK(c.fn == 2);

    // constructed 10-cell fixture: 3 TP, 1 FP, 1 FN, 5 TN
    const LabelGrid t10 = grid_of({1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
    const LabelGrid p10 = grid_of({1, 1, 1, 0, 1, 0, 0, 0, 0, 0});
    const ConfusionCounts c10 = confusion(p10, t10);
    CHECK(c10.tp == 3);
    CHECK(c10.fp == 1);
    CHECK(c10.fn == 1);
    CHECK(c10.tn == 5);
    CHECK(c10.total() == 10);

    CHECK_THROWS_AS(confusion(grid_of({1}), grid_of({1, 0})), DimensionError);
}

TEST_CASE("precision, recall, f1") {
    const Prf1 a = precision_recall_f1({3, 0, 1, 0});
    CHECK(a.precision == doctest::Approx(0.75).epsilon(1e-12));

    // the published operating point composes to the published f1
    const double p = 0.947, r = 0.923;
    const double f1 = 2.0 * p * r / (p + r);
    CHECK(std::fabs(f1 - 0.9349) < 0.0005);

    const Prf1 degenerate = precision_recall_f1({0, 5, 0, 0});
    CHECK(degenerate.precision == 0.0);
    CHECK(degenerate.precision_degenerate);
    CHECK(degenerate.recall_degenerate);
    CHECK(degenerate.f1_degenerate);
}

TEST_CASE("metric values stay in the unit interval with the mean bound") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionCounts c{static_cast<long long>(rng.index(20)),
                          static_cast<long long>(rng.index(20)),
                          static_cast<long long>(rng.index(20)),
                          static_cast<long long>(rng.index(20))};
        const Prf1 m = precision_recall_f1(c);
        CHECK(m.precision >= 0.0);
        CHECK(m.precision <= 1.0);
        CHECK(m.recall >= 0.0);
        CHECK(m.recall <= 1.0);
        CHECK(m.f1 >= 0.0);
        CHECK(m.f1 <= 1.0);
        CHECK(m.f1 <= (m.precision + m.recall) / 2.0 + 1e-12);
    }
}

TEST_CASE("auc on separable, constant, and random scores") {
    const LabelGrid truth = grid_of({1, 1, 0, 0});
    Tensor separable({4});
    separable[0] = 0.9;
    separable[1] = 0.8;
    separable[2] = 0.2;
    separable[3] = 0.1;
    CHECK(auc(separable, truth) == 1.0);

    Tensor constant({4});
    for (std::size_t i = 0; i < 4; ++i) constant[i] = 0.5;
    CHECK(auc(constant, truth) == 0.5);

    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t cells = 50;
        Tensor scores({cells});
        LabelGrid t(1, 1, cells);
        for (std::size_t i = 0; i < cells; ++i) {
            scores[i] = rng.index(12) * 0.125;  // force plenty of ties
            t.values[i] = rng.next_double() < 0.4 ? 1 : 0;
        }
        long long pos = t.count_positive();
        if (pos == 0 || pos == static_cast<long long>(cells)) continue;
        const double got = auc(scores, t);
        const double want = auc_oracle(scores, t);
        CHECK(got == want);  // identical integer numerators, one division each
    }

    CHECK_THROWS_AS(auc(constant, grid_of({0, 0, 0, 0})), UndefinedMetricError);
    CHECK_THROWS_AS(auc(constant, grid_of({1, 1, 1, 1})), UndefinedMetricError);
}

TEST_CASE("auc equals the exhaustive oracle on instances up to 200 cells") {
    Rng rng(23);
    for (std::size_t cells : {5ul, 17ul, 64ul, 200ul}) {
        Tensor scores({cells});
        LabelGrid t(1, 1, cells);
        for (std::size_t i = 0; i < cells; ++i) {
            scores[i] = rng.next_double() < 0.3 ? 0.5 : rng.next_double();
            t.values[i] = rng.next_double() < 0.5 ? 1 : 0;
        }
        t.values[0] = 1;
        t.values[1] = 0;
        CHECK(auc(scores, t) == auc_oracle(scores, t));
    }
}

TEST_CASE("metrics are invariant under joint permutation") {
    Rng rng(31);
    const std::size_t cells = 40;
    Tensor scores({cells});
    LabelGrid pred(1, 1, cells), truth(1, 1, cells);
    for (std::size_t i = 0; i < cells; ++i) {
        scores[i] = rng.next_double();
        pred.values[i] = scores[i] > 0.6 ? 1 : 0;
        truth.values[i] = rng.next_double() < 0.3 ? 1 : 0;
    }
    truth.values[3] = 1;
    truth.values[5] = 0;

    std::vector<std::size_t> perm(cells);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = cells - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Tensor pscores({cells});
    LabelGrid ppred(1, 1, cells), ptruth(1, 1, cells);
    for (std::size_t i = 0; i < cells; ++i) {
        pscores[i] = scores[perm[i]];
        ppred.values[i] = pred.values[perm[i]];
        ptruth.values[i] = truth.values[perm[i]];
    }

    const ConfusionCounts c1 = confusion(pred, truth), c2 = confusion(ppred, ptruth);
    CHECK(c1.tp == c2.tp);
    CHECK(c1.tn == c2.tn);
    CHECK(c1.fp == c2.fp);
    CHECK(c1.fn == c2.fn);
    CHECK(auc(scores, truth) == auc(pscores, ptruth));
}

TEST_CASE("reliability resampling: degenerate and deterministic cases") {
    // build 18 windows of trivially separable scores
    std::vector<model::AnomalyScoreGrid> scores;
    std::vector<LabelGrid> truth;
    Rng rng(7);
    for (int w = 0; w < 18; ++w) {
        model::AnomalyScoreGrid g;
        g.scores = Tensor({1, 1, 10});
        LabelGrid t(1, 1, 10);
        for (std::size_t k = 0; k < 10; ++k) {
            const bool anomalous = rng.next_double() < 0.3;
            t.values[k] = anomalous ? 1 : 0;
            g.scores[k] = anomalous ? 2.0 + rng.next_double() : rng.next_double();
        }
        scores.push_back(g);
        truth.push_back(t);
    }

    const ResampleSummary one =
        reliability_resample(scores, truth, 1.5, 9, 7, 1, 99);
    REQUIRE(one.trials.size() == 1);
    CHECK(one.precision.mean == one.trials[0].prf.precision);
    CHECK(one.precision.var == 0.0);
    CHECK(one.f1.var == 0.0);

    const ResampleSummary ten = reliability_resample(scores, truth, 1.5, 9, 7, 10, 123);
    REQUIRE(ten.trials.size() == 10);
    // perfectly separable scores give a constant metric, hence zero spread
    CHECK(ten.f1.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ten.f1.stddev == 0.0);

    const ResampleSummary again = reliability_resample(scores, truth, 1.5, 9, 7, 10, 123);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(ten.trials[i].prf.f1 == again.trials[i].prf.f1);

    CHECK_THROWS_AS(reliability_resample(scores, truth, 1.5, 7, 9, 10, 1), ConfigError);
    CHECK_THROWS_AS(reliability_resample(scores, truth, 1.5, 20, 2, 10, 1), ConfigError);

    std::ostringstream csv;
    write_resample_csv(ten, csv);
    CHECK(csv.str().find("trial,precision,recall,f1,auc") == 0);
    CHECK(csv.str().find("\nstd,") != std::string::npos);
}

TEST_CASE("robustness sweep validates inputs and reports one row per alpha") {
    const data::CleanDataset ds = data::synth_generate(4, 3, 400, 3);
    const data::LabeledWindowSet ws = data::make_windows(ds, 64, 32);

    model::ModelConfig cfg;
    cfg.window = 64;
    cfg.step = 32;
    cfg.detect_tail = 32;
    cfg.hidden_width = 8;
    cfg.attention_dim = 4;
    cfg.fusion_dim = 4;
    cfg.epochs = 3;
    cfg.seed = 5;
    const graph::AdjacencyMatrix adj = graph::build_adjacency(*ds.positions, 2, ds.node_ids);
    model::Network net(cfg, adj, 3);
    std::vector<Tensor> train_windows(ws.windows.begin(), ws.windows.begin() + 4);
    const model::TrainResult tr = model::train(net, train_windows);

    data::LabeledWindowSet test;
    test.series_min = ws.series_min;
    test.series_max = ws.series_max;
    for (std::size_t w = 4; w < ws.count(); ++w) {
        test.windows.push_back(ws.windows[w]);
        test.labels.push_back(ws.labels[w]);
        test.starts.push_back(ws.starts[w]);
    }

    const auto rows = robustness_sweep(net, tr.params, tr.tau, test, {-1.0, -0.1, 1.0}, 0.01, 9);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.metrics.counts.total() > 0);
        CHECK(r.metrics.prf.recall >= 0.0);
    }
    const auto rows2 = robustness_sweep(net, tr.params, tr.tau, test, {-1.0, -0.1, 1.0}, 0.01, 9);
    for (std::size_t i = 0; i < rows.size(); ++i)
        CHECK(rows[i].metrics.prf.recall == rows2[i].metrics.prf.recall);

    CHECK_THROWS_AS(robustness_sweep(net, tr.params, tr.tau, test, {}, 0.01, 9), ConfigError);
    CHECK_THROWS_AS(robustness_sweep(net, tr.params, tr.tau, test, {1.0, 0.0}, 0.01, 9),
                    ConfigError);

    std::ostringstream csv;
    write_robustness_csv(rows, csv);
    CHECK(csv.str().find("alpha,precision,recall,f1,auc") == 0);
}
