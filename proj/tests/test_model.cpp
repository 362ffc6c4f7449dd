#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "wsn/model.hpp"

using namespace wsn;
using namespace wsn::model;
using testutil::random_tensor;

namespace {

ModelConfig small_config(std::size_t w = 16) {
    ModelConfig cfg;
    cfg.window = w;
    cfg.step = w / 2;
    cfg.detect_tail = w / 2;
    cfg.hidden_width = 8;
    cfg.attention_dim = 4;
    cfg.fusion_dim = 3;
    cfg.epochs = 10;
    cfg.seed = 7;
    return cfg;
}

graph::AdjacencyMatrix ring_adjacency(std::size_t n) {
    graph::AdjacencyMatrix a;
    a.weights = Tensor({n, n});
    a.node_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        a.node_ids[i] = static_cast<int>(i + 1);
        a.weights.at(i, i) = 1.0;
        a.weights.at(i, (i + 1) % n) = 1.0;
        a.weights.at((i + 1) % n, i) = 1.0;
    }
    return a;
}

Tensor periodic_window(std::size_t n, std::size_t m, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({n, m, w});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            for (std::size_t t = 0; t < w; ++t)
                x.at3(i, j, t) = std::sin(2.0 * M_PI * double(t) / double(w) + phase) +
                                 0.05 * rng.normal();
        }
    return x;
}

}  // namespace

TEST_CASE("config validation") {
    ModelConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.window = 15;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.detect_tail = cfg.window + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.step = cfg.window + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("decompose: constant window has zero seasonal part in both modes") {
    Tensor x = Tensor::full({2, 2, 16}, 3.25);
    for (auto mode : {Decomposition::dwt, Decomposition::moving_average}) {
        ModelConfig cfg = small_config();
        cfg.decomposition = mode;
        const auto parts = decompose(x, cfg);
        CHECK(parts.seasonal.max_abs() < 1e-12);
        const std::size_t want = mode == Decomposition::dwt ? 8 : 16;
        CHECK(parts.trend.extent(2) == want);
        CHECK(parts.seasonal.extent(2) == want);
    }
}

TEST_CASE("decompose: dwt mode delegates to the level-1 transform exactly") {
    Rng rng(3);
    const Tensor x = random_tensor({3, 2, 16}, rng);
    ModelConfig cfg = small_config();
    const auto got = decompose(x, cfg);
    const auto want = signal::dwt_level1(x, signal::WaveletFilterPair::haar());
    for (std::size_t i = 0; i < got.trend.size(); ++i) {
        CHECK(got.trend[i] == want.trend[i]);
        CHECK(got.seasonal[i] == want.seasonal[i]);
    }
}

TEST_CASE("decompose: moving-average split is additive") {
    Rng rng(4);
    const Tensor x = random_tensor({2, 1, 20}, rng);
    ModelConfig cfg = small_config(20);
    cfg.decomposition = Decomposition::moving_average;
    cfg.moving_average_window = 5;
    const auto parts = decompose(x, cfg);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(parts.trend[i] + parts.seasonal[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("loss_mse examples and oracle") {
    Rng rng(5);
    const Tensor x = random_tensor({2, 3, 4}, rng);
    CHECK(loss_mse(x, x) == 0.0);

    Tensor shifted = x;
    for (double& v : shifted.data()) v += 1.0;
    CHECK(loss_mse(x, shifted) == doctest::Approx(1.0).epsilon(1e-12));

    const Tensor y = random_tensor({2, 3, 4}, rng);
    double want = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k) {
                const double d = x.at3(i, j, k) - y.at3(i, j, k);
                want += d * d;
            }
    want /= 24.0;
    CHECK(std::fabs(loss_mse(x, y) - want) < 1e-12);

    CHECK_THROWS_AS(loss_mse(x, Tensor({2, 3, 5})), DimensionError);
}

TEST_CASE("trend encoder: zero input with zero biases gives zero output") {
    ModelConfig cfg = small_config();
    Network net(cfg, ring_adjacency(3), 2);
    ModelParams params = ModelParams::init(cfg, 3, 2);
    for (Tensor* b : {&params.trend_b1, &params.trend_b2, &params.trend_b3})
        std::fill(b->data().begin(), b->data().end(), 0.0);

    Tape tape;
    const auto bound = net.bind(tape, params, false);
    Var zero_rows = tape.constant(Tensor({2 * 3, cfg.component_length()}));
    const auto mods = net.trend_encode(tape, zero_rows, bound);
    for (const auto& m : mods) CHECK(tape.value(m).max_abs() == 0.0);
}

TEST_CASE("trend encoder: gradients reach every MLP tensor") {
    ModelConfig cfg = small_config();
    Network net(cfg, ring_adjacency(3), 2);
    ModelParams params = ModelParams::init(cfg, 3, 2);
    Rng rng(11);
    const Tensor window = random_tensor({3, 2, cfg.window}, rng);

    Tape tape;
    const auto fwd = net.forward_loss(tape, window, params, true);
    tape.backward(fwd.loss);
    std::size_t nonzero = 0, total = 0;
    for (std::size_t i = 0; i < fwd.bound.vars.size(); ++i) {
        const auto& [name, var] = fwd.bound.vars[i];
        if (name.rfind("trend_mlp.", 0) == 0) {
            const Tensor& g = tape.grad(var);
            CHECK(g.max_abs() > 0.0);  // every MLP tensor receives gradient
            for (double v : g.data()) nonzero += v != 0.0;
            total += g.size();
        }
    }
    // dead relu units zero some entries; the bulk must stay live
    CHECK(nonzero * 2 > total);
}

TEST_CASE("encoders are node-permutation equivariant given permuted adjacency") {
    const std::size_t n = 4, m = 2;
    ModelConfig cfg = small_config();
    graph::AdjacencyMatrix adj = ring_adjacency(n);
    Rng rng(13);
    const Tensor window = periodic_window(n, m, cfg.window, 21);

    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    graph::AdjacencyMatrix padj;
    padj.weights = Tensor({n, n});
    padj.node_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        padj.node_ids[i] = adj.node_ids[perm[i]];
        for (std::size_t j = 0; j < n; ++j)
            padj.weights.at(i, j) = adj.weights.at(perm[i], perm[j]);
    }
    Tensor pwindow({n, m, cfg.window});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t t = 0; t < cfg.window; ++t)
                pwindow.at3(i, j, t) = window.at3(perm[i], j, t);

    ModelParams params = ModelParams::init(cfg, n, m);
    params.trained = true;
    Network net(cfg, adj, m);
    Network pnet(cfg, padj, m);
    const Tensor recon = net.reconstruct(window, params);
    const Tensor precon = pnet.reconstruct(pwindow, params);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t t = 0; t < cfg.window; ++t)
                CHECK(std::fabs(precon.at3(i, j, t) - recon.at3(perm[i], j, t)) < 1e-9);
}

TEST_CASE("seasonal attention rows sum to one") {
    ModelConfig cfg = small_config();
    Network net(cfg, ring_adjacency(3), 2);
    ModelParams params = ModelParams::init(cfg, 3, 2);
    params.trained = true;
    Rng rng(17);
    ForwardTrace trace;
    net.reconstruct(random_tensor({3, 2, cfg.window}, rng), params, &trace);
    const Tensor& attn = trace.attention_weights;
    REQUIRE(attn.rows() == 6 * cfg.component_length());  // one T x T map per series
    for (std::size_t i = 0; i < attn.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < attn.cols(); ++j) sum += attn.at(i, j);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("frequency attention concentrates on the dominant-amplitude bin") {
    // One series, four bins, identity maps: the scores between bins k and l
    // reduce to |X(k) X(l)|, so every attention row peaks at the dominant bin.
    const std::size_t t = 4;
    ModelConfig cfg = small_config(2 * t);  // component length 4
    cfg.attention_dim = 1;
    Network net(cfg, ring_adjacency(2), 1);
    ModelParams params = ModelParams::init(cfg, 2, 1);
    params.fdam_wq = Tensor::matrix(1, 1, {1.0});
    params.fdam_wk = Tensor::matrix(1, 1, {1.0});
    params.fdam_wv = Tensor::matrix(1, 1, {1.0});

    // strong direct component plus a faint alternation
    const std::vector<double> series = {10.0, 10.5, 9.5, 10.0};
    Tensor rows({2, t});
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t k = 0; k < t; ++k) rows.at(r, k) = series[k];

    Tape tape;
    const auto bound = net.bind(tape, params, false);
    ForwardTrace trace;
    net.seasonal_encode(tape, tape.constant(rows), bound, &trace);

    // hand-built expectation from the 4-bin spectrum
    const auto spectrum = signal::dft_series(series);
    Tensor logits({t, t});
    for (std::size_t a = 0; a < t; ++a)
        for (std::size_t b = 0; b < t; ++b)
            logits.at(a, b) = std::abs(spectrum[a] * spectrum[b]);
    const Tensor expected = softmax_rows(logits);

    for (std::size_t a = 0; a < t; ++a) {
        for (std::size_t b = 0; b < t; ++b)
            CHECK(std::fabs(trace.attention_weights.at(a, b) - expected.at(a, b)) < 1e-9);
        std::size_t best = 0;
        for (std::size_t b = 1; b < t; ++b)
            if (trace.attention_weights.at(a, b) > trace.attention_weights.at(a, best)) best = b;
        CHECK(best == 0);  // mass lands on the dominant (direct-component) bin
        CHECK(trace.attention_weights.at(a, 0) > 0.5);
    }
}

TEST_CASE("time-domain ablation equals attention arithmetic on raw series") {
    const std::size_t n = 3, m = 2;
    ModelConfig cfg = small_config();
    cfg.seasonal_attention = SeasonalAttention::time;
    Network net(cfg, ring_adjacency(n), m);
    ModelParams params = ModelParams::init(cfg, n, m);
    Rng rng(23);
    const std::size_t t = cfg.component_length();
    const Tensor rows = random_tensor({m * n, t}, rng);

    Tape tape;
    const auto bound = net.bind(tape, params, false);
    ForwardTrace trace;
    net.seasonal_encode(tape, tape.constant(rows), bound, &trace);

    // same arithmetic per series, no transform sandwich: tokens are the raw
    // time points, logits |q k^T| / sqrt(d_k)
    for (std::size_t r = 0; r < m * n; ++r) {
        Tensor col({t, 1});
        for (std::size_t i = 0; i < t; ++i) col.at(i, 0) = rows.at(r, i);
        const Tensor q = matmul(col, params.fdam_wq);
        const Tensor k = matmul(col, params.fdam_wk);
        const Tensor v = matmul(col, params.fdam_wv);
        Tensor logits = matmul(q, transpose(k));
        for (double& x : logits.data())
            x = std::fabs(x) / std::sqrt(double(cfg.attention_dim));
        const Tensor want = matmul(softmax_rows(logits), v);
        for (std::size_t i = 0; i < t; ++i)
            CHECK(std::fabs(trace.seasonal_attn_out.at(r, i) - want.at(i, 0)) < 1e-10);
    }
}

TEST_CASE("decode with identity output map inverts the decomposition") {
    const std::size_t n = 2, m = 2;
    ModelConfig cfg = small_config();
    Network net(cfg, ring_adjacency(n), m);
    ModelParams params = ModelParams::init(cfg, n, m);
    params.out_w = Tensor::identity(cfg.window);
    params.out_b = Tensor({1, cfg.window});

    Rng rng(31);
    const Tensor window = random_tensor({n, m, cfg.window}, rng);
    const auto parts = decompose(window, cfg);

    Tape tape;
    const auto bound = net.bind(tape, params, false);
    std::vector<Var> ztre, zsea;
    const Tensor trend_rows = window_to_rows(parts.trend);
    const Tensor seasonal_rows = window_to_rows(parts.seasonal);
    for (std::size_t mi = 0; mi < m; ++mi) {
        Tensor tr({n, cfg.component_length()}), se({n, cfg.component_length()});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cfg.component_length(); ++k) {
                tr.at(i, k) = trend_rows.at(mi * n + i, k);
                se.at(i, k) = seasonal_rows.at(mi * n + i, k);
            }
        ztre.push_back(tape.constant(tr));
        zsea.push_back(tape.constant(se));
    }
    Var out = net.decode(tape, ztre, zsea, bound);
    const Tensor recon = rows_to_window(tape.value(out), n, m);
    for (std::size_t i = 0; i < recon.size(); ++i)
        CHECK(std::fabs(recon[i] - window[i]) < 1e-10);

    // zero components give a bias-only reconstruction
    params.out_b = Tensor({1, cfg.window});
    for (std::size_t k = 0; k < cfg.window; ++k) params.out_b[k] = 0.25 * double(k);
    Tape tape2;
    const auto bound2 = net.bind(tape2, params, false);
    std::vector<Var> zt, zs;
    for (std::size_t mi = 0; mi < m; ++mi) {
        zt.push_back(tape2.constant(Tensor({n, cfg.component_length()})));
        zs.push_back(tape2.constant(Tensor({n, cfg.component_length()})));
    }
    const Tensor bias_only = tape2.value(net.decode(tape2, zt, zs, bound2));
    for (std::size_t r = 0; r < m * n; ++r)
        for (std::size_t k = 0; k < cfg.window; ++k)
            CHECK(bias_only.at(r, k) == params.out_b[k]);
}

TEST_CASE("reconstruction shape contract across configurations") {
    Rng rng(37);
    for (auto decomp : {Decomposition::dwt, Decomposition::moving_average}) {
        for (std::size_t n : {2ul, 4ul}) {
            ModelConfig cfg = small_config();
            cfg.decomposition = decomp;
            const std::size_t m = 2;
            Network net(cfg, ring_adjacency(n), m);
            ModelParams params = ModelParams::init(cfg, n, m);
            const Tensor window = random_tensor({n, m, cfg.window}, rng);
            const Tensor recon = net.reconstruct(window, params);
            REQUIRE(recon.shape() == std::vector<std::size_t>({n, m, cfg.window}));
        }
    }
}

TEST_CASE("end-to-end gradient check on a 4-node 2-modality W=16 instance") {
    ModelConfig cfg = small_config(16);
    const std::size_t n = 4, m = 2;
    Network net(cfg, ring_adjacency(n), m);
    const Tensor window = periodic_window(n, m, cfg.window, 3);

    for (std::uint64_t seed : {1ull, 2ull, 9ull}) {
        ModelConfig c2 = cfg;
        c2.seed = seed;
        ModelParams params = ModelParams::init(c2, n, m);

        Tape tape;
        const auto fwd = net.forward_loss(tape, window, params, true);
        tape.backward(fwd.loss);

        Rng pick(seed * 31 + 1);
        auto named = params.named_tensors();
        double max_rel = 0.0;
        for (int probe = 0; probe < 12; ++probe) {
            const std::size_t pi = pick.index(named.size());
            Tensor& tens = *named[pi].second;
            const std::size_t ei = pick.index(tens.size());
            const double analytic = tape.grad(fwd.bound.vars[pi].second)[ei];

            const double h = 1e-5;
            const double saved = tens[ei];
            tens[ei] = saved + h;
            const double up = net.loss_value(window, params);
            tens[ei] = saved - h;
            const double down = net.loss_value(window, params);
            tens[ei] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double rel = std::fabs(analytic - numeric) /
                               std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
            max_rel = std::max(max_rel, rel);
        }
        REQUIRE(max_rel < 1e-4);
    }
}

TEST_CASE("training reduces the loss and is deterministic") {
    const std::size_t n = 3, m = 2;
    ModelConfig cfg = small_config(16);
    cfg.epochs = 200;
    cfg.hidden_width = 8;
    Network net(cfg, ring_adjacency(n), m);
    std::vector<Tensor> windows;
    for (int i = 0; i < 3; ++i) windows.push_back(periodic_window(n, m, cfg.window, 40 + i));

    const TrainResult a = train(net, windows);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    CHECK(a.params.trained);
    CHECK(a.parameter_count > 0);

    const TrainResult b = train(net, windows);
    CHECK(a.epoch_loss.back() == b.epoch_loss.back());
    const auto na = a.params.named_tensors();
    const auto nb = b.params.named_tensors();
    for (std::size_t i = 0; i < na.size(); ++i)
        for (std::size_t z = 0; z < na[i].second->size(); ++z)
            REQUIRE((*na[i].second)[z] == (*nb[i].second)[z]);

    // identical scores, bit for bit
    const auto sa = score(net, windows[0], a.params);
    const auto sb = score(net, windows[0], b.params);
    for (std::size_t i = 0; i < sa.scores.size(); ++i) REQUIRE(sa.scores[i] == sb.scores[i]);
}

TEST_CASE("a constant window is learnable to near-zero loss") {
    const std::size_t n = 2, m = 2;
    ModelConfig cfg = small_config(16);
    cfg.epochs = 200;
    cfg.learning_rate = 0.005;  // one window gives only 200 optimizer steps
    Network net(cfg, ring_adjacency(n), m);
    const Tensor window = Tensor::full({n, m, cfg.window}, 0.75);
    const TrainResult r = train(net, {window});
    CHECK(r.epoch_loss.back() < 1e-4);
}

TEST_CASE("scoring arithmetic and the trained-params contract") {
    Rng rng(44);
    const Tensor x = random_tensor({2, 2, 8}, rng);
    const auto zero = residual_scores(x, x, 4);
    CHECK(zero.scores.max_abs() == 0.0);
    REQUIRE(zero.scores.shape() == std::vector<std::size_t>({2, 2, 4}));

    Tensor xhat = x;
    xhat.at3(1, 0, 6) += 2.0;  // residual 2 in the tail
    const auto grid = residual_scores(x, xhat, 4);
    CHECK(grid.scores.at3(1, 0, 2) == doctest::Approx(4.0).epsilon(1e-12));

    ModelConfig cfg = small_config();
    Network net(cfg, ring_adjacency(2), 2);
    ModelParams untrained = ModelParams::init(cfg, 2, 2);
    CHECK_THROWS_AS(score(net, random_tensor({2, 2, cfg.window}, rng), untrained),
                    ContractError);
}

TEST_CASE("threshold calibration and strict classification") {
    AnomalyScoreGrid g1, g2;
    g1.scores = Tensor({1, 1, 4});
    g2.scores = Tensor({1, 1, 4});
    CHECK(calibrate_threshold({g1, g2}) == 0.0);

    g2.scores.at3(0, 0, 2) = 0.73;
    CHECK(calibrate_threshold({g1, g2}) == 0.73);
    CHECK_THROWS_AS(calibrate_threshold({}), ContractError);

    AnomalyScoreGrid g;
    g.scores = Tensor({1, 1, 3});
    g.scores.at3(0, 0, 0) = 0.5;   // == tau -> 0
    g.scores.at3(0, 0, 1) = 0.5 + 1e-12;
    g.scores.at3(0, 0, 2) = 0.1;
    g.threshold = 0.5;
    const LabelGrid labels = classify(g);
    CHECK(labels.at3(0, 0, 0) == 0);
    CHECK(labels.at3(0, 0, 1) == 1);
    CHECK(labels.at3(0, 0, 2) == 0);
}

TEST_CASE("classification is monotone in the scores") {
    Rng rng(51);
    AnomalyScoreGrid g;
    g.scores = Tensor({2, 2, 5});
    for (double& v : g.scores.data()) v = rng.uniform(0.0, 1.0);
    g.threshold = 0.5;
    const LabelGrid before = classify(g);
    for (int trial = 0; trial < 20; ++trial) {
        AnomalyScoreGrid raised = g;
        const std::size_t cell = rng.index(raised.scores.size());
        raised.scores[cell] += rng.uniform(0.0, 2.0);
        const LabelGrid after = classify(raised);
        for (std::size_t i = 0; i < before.size(); ++i)
            if (before.values[i] == 1) CHECK(after.values[i] == 1);
    }
}

TEST_CASE("ablation switches change exactly the component they name") {
    const std::size_t n = 3, m = 2;
    const Tensor window = periodic_window(n, m, 16, 8);

    auto run = [&](SeasonalAttention sa, GraphMode gm) {
        ModelConfig cfg = small_config(16);
        cfg.seasonal_attention = sa;
        cfg.graph_mode = gm;
        Network net(cfg, ring_adjacency(n), m);
        ModelParams params = ModelParams::init(cfg, n, m);
        ForwardTrace trace;
        net.reconstruct(window, params, &trace);
        return trace;
    };

    // toggling the seasonal attention leaves the trend path untouched
    const ForwardTrace freq = run(SeasonalAttention::frequency, GraphMode::mfdgcn);
    const ForwardTrace time = run(SeasonalAttention::time, GraphMode::mfdgcn);
    REQUIRE(freq.trend_mlp_out.size() == time.trend_mlp_out.size());
    for (std::size_t i = 0; i < freq.trend_mlp_out.size(); ++i)
        REQUIRE(freq.trend_mlp_out[i] == time.trend_mlp_out[i]);

    // toggling the graph leaves both pre-graph activations untouched
    const ForwardTrace dyn = run(SeasonalAttention::frequency, GraphMode::mfdgcn);
    const ForwardTrace stat = run(SeasonalAttention::frequency, GraphMode::static_gcn);
    for (std::size_t i = 0; i < dyn.trend_mlp_out.size(); ++i)
        REQUIRE(dyn.trend_mlp_out[i] == stat.trend_mlp_out[i]);
    for (std::size_t i = 0; i < dyn.seasonal_attn_out.size(); ++i)
        REQUIRE(dyn.seasonal_attn_out[i] == stat.seasonal_attn_out[i]);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    const std::size_t n = 3, m = 2;
    ModelConfig cfg = small_config(16);
    cfg.epochs = 3;
    Network net(cfg, ring_adjacency(n), m);
    const TrainResult r = train(net, {periodic_window(n, m, cfg.window, 1)});

    Checkpoint ckpt{cfg, r.params, ring_adjacency(n), r.tau, cfg.seed};
    std::stringstream buffer;
    save_checkpoint(buffer, ckpt);
    const Checkpoint loaded = load_checkpoint(buffer);

    CHECK(loaded.tau == r.tau);
    CHECK(loaded.adjacency.node_ids == ckpt.adjacency.node_ids);
    for (std::size_t i = 0; i < ckpt.adjacency.weights.size(); ++i)
        CHECK(loaded.adjacency.weights[i] == ckpt.adjacency.weights[i]);
    CHECK(loaded.seed == cfg.seed);
    CHECK(loaded.params.trained);
    CHECK(loaded.config.window == cfg.window);
    CHECK(loaded.config.learning_rate == cfg.learning_rate);
    const auto got = loaded.params.named_tensors();
    const auto want = r.params.named_tensors();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].first == want[i].first);
        REQUIRE(got[i].second->shape() == want[i].second->shape());
        for (std::size_t z = 0; z < got[i].second->size(); ++z)
            REQUIRE((*got[i].second)[z] == (*want[i].second)[z]);
    }

    std::istringstream bad("not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
    CHECK_THROWS_AS(load_checkpoint_file("/nonexistent/ckpt.txt"), ContractError);
}

TEST_CASE("moving-average mode trains and reconstructs full length") {
    const std::size_t n = 2, m = 2;
    ModelConfig cfg = small_config(16);
    cfg.decomposition = Decomposition::moving_average;
    cfg.moving_average_window = 5;
    cfg.epochs = 5;
    Network net(cfg, ring_adjacency(n), m);
    const Tensor window = periodic_window(n, m, cfg.window, 99);
    CHECK(cfg.component_length() == 16);
    const TrainResult r = train(net, {window});
    const Tensor recon = net.reconstruct(window, r.params);
    CHECK(recon.extent(2) == 16);
}
