// Command-line front end: preprocess | train | detect | evaluate | inject | spectrum.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsn/data.hpp"
#include "wsn/eval.hpp"
#include "wsn/graph.hpp"
#include "wsn/model.hpp"
#include "wsn/signal.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace wsn;

namespace {

// Exit codes, one per error category.
enum ExitCode {
    kOk = 0,
    kInternal = 1,
    kIo = 2,
    kFormat = 3,
    kConfig = 4,
    kContract = 5,
    kDegenerateMetric = 6,
    kTraining = 7,
};

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for digest");
    std::ostringstream buf;
    buf << in.rdbuf();
    char out[24];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv64(buf.str())));
    return out;
}

std::string dir_digest(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::string combined;
    for (const auto& f : files) combined += f + ":" + file_digest(f) + "\n";
    char out[24];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv64(combined)));
    return out;
}

struct RunContext {
    std::string command;
    model::ModelConfig config;
    json options = json::object();
    json inputs = json::object();
    std::vector<std::string> overrides;
    std::string out_dir;

    void note_input(const std::string& path) {
        if (fs::is_directory(path)) inputs[path] = dir_digest(path);
        else inputs[path] = file_digest(path);
    }

    void write_manifest() const {
        fs::create_directories(out_dir);
        json manifest;
        manifest["command"] = command;
        json cfg = json::object();
        for (const auto& [k, v] : config.entries()) cfg[k] = v;
        manifest["model_config"] = cfg;
        manifest["options"] = options;
        manifest["inputs"] = inputs;
        manifest["overrides"] = overrides;
        std::ofstream out(fs::path(out_dir) / "run_config.json");
        if (!out) throw IoError("cannot write run_config.json in '" + out_dir + "'");
        out << manifest.dump(2) << "\n";
    }
};

// Loads the base config file, then applies command-line overrides in order.
model::ModelConfig resolve_config(const std::string& config_path,
                                  const std::vector<std::pair<std::string, std::string>>& cli_kv,
                                  RunContext& ctx) {
    model::ModelConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot open config file '" + config_path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw FormatError("config file is not valid JSON: " + std::string(e.what()));
        }
        for (const auto& [key, value] : j.items()) {
            if (value.is_string()) cfg.set_entry(key, value.get<std::string>());
            else cfg.set_entry(key, value.dump());
        }
        ctx.note_input(config_path);
    }
    for (const auto& [key, value] : cli_kv) {
        cfg.set_entry(key, value);
        ctx.overrides.push_back(key + "=" + value);
    }
    cfg.validate();
    return cfg;
}

graph::AdjacencyMatrix adjacency_for(const data::CleanDataset& ds,
                                     const std::string& positions_path, std::size_t knn,
                                     RunContext& ctx) {
    Tensor coords;
    std::vector<int> ids;
    if (!positions_path.empty()) {
        std::ifstream in(positions_path);
        if (!in) throw IoError("cannot open positions file '" + positions_path + "'");
        const graph::Positions pos = graph::load_positions(in);
        ctx.note_input(positions_path);
        // align position rows with the dataset's node order
        coords = Tensor({ds.n_nodes(), 2});
        for (std::size_t i = 0; i < ds.n_nodes(); ++i) {
            bool found = false;
            for (std::size_t r = 0; r < pos.node_ids.size(); ++r) {
                if (pos.node_ids[r] == ds.node_ids[i]) {
                    coords.at(i, 0) = pos.coords.at(r, 0);
                    coords.at(i, 1) = pos.coords.at(r, 1);
                    found = true;
                    break;
                }
            }
            if (!found)
                throw ConfigError("positions file lacks node " +
                                  std::to_string(ds.node_ids[i]));
        }
        ids = ds.node_ids;
    } else if (ds.positions) {
        coords = *ds.positions;
        ids = ds.node_ids;
    } else {
        throw ConfigError("no sensor positions available: pass --positions");
    }
    const std::size_t k = std::min<std::size_t>(knn, ds.n_nodes() - 1);
    std::vector<std::string> warnings;
    graph::AdjacencyMatrix adj = graph::build_adjacency(coords, k, ids, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return adj;
}

data::CleanDataset load_dataset(const std::string& data_dir, RunContext& ctx) {
    const data::CleanDataset ds = data::read_archive(data_dir);
    ctx.note_input(data_dir);
    return ds;
}

void write_loss_csv(const std::vector<double>& losses, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
        out << (e + 1) << "," << fmt_double(losses[e]) << "\n";
}

struct ScoredCell {
    int node_id;
    std::string modality;
    std::size_t t;
    double score;
    int label;
};

void write_scores_csv(const std::vector<ScoredCell>& cells, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "node,modality,t,score,label\n";
    for (const auto& c : cells)
        out << c.node_id << "," << c.modality << "," << c.t << "," << fmt_double(c.score) << ","
            << c.label << "\n";
}

json metrics_to_json(const eval::MetricsReport& m) {
    json j;
    j["precision"] = m.prf.precision;
    j["recall"] = m.prf.recall;
    j["f1"] = m.prf.f1;
    if (m.auc) j["auc"] = *m.auc;
    else j["auc"] = nullptr;
    j["counts"] = {{"tp", m.counts.tp}, {"tn", m.counts.tn}, {"fp", m.counts.fp},
                   {"fn", m.counts.fn}};
    j["degenerate"] = {{"precision", m.prf.precision_degenerate},
                       {"recall", m.prf.recall_degenerate},
                       {"f1", m.prf.f1_degenerate},
                       {"auc", !m.auc.has_value()}};
    return j;
}

// ============================================================================
// preprocess
// ============================================================================

int cmd_preprocess(const std::string& input, const std::string& synth_spec,
                   const std::string& out_dir, double period, std::size_t max_gap,
                   std::vector<int> exclude, std::uint64_t seed) {
    RunContext ctx;
    ctx.command = "preprocess";
    ctx.out_dir = out_dir;
    ctx.options = {{"input", input}, {"synth", synth_spec}, {"period", period},
                   {"max_gap", max_gap}, {"seed", seed}};

    data::CleanDataset ds;
    if (!synth_spec.empty()) {
        std::size_t n = 0, m = 0, t = 0;
        if (std::sscanf(synth_spec.c_str(), "%zu,%zu,%zu", &n, &m, &t) != 3)
            throw ConfigError("--synth expects N,M,T");
        ds = data::synth_generate(n, m, t, seed);
    } else {
        if (input.empty()) throw ConfigError("preprocess needs --input or --synth");
        const data::RawReadingLog log = data::ingest_ibrl_file(input);
        ctx.note_input(input);
        data::CleaningOptions opt;
        opt.sample_period_seconds = period;
        opt.max_gap_samples = max_gap;
        if (!exclude.empty()) opt.excluded_nodes = std::move(exclude);
        ds = data::clean_and_align(log, opt);
    }

    data::write_archive(ds, out_dir);
    json report;
    report["skipped_rows"] = ds.skipped_rows;
    report["dropped_rows"] = ds.dropped_rows;
    report["exclusions"] = ds.exclusion_log;
    report["nodes"] = ds.node_ids;
    report["samples"] = ds.n_samples();
    json degenerate = json::array();
    for (const auto& [id, mod] : ds.degenerate_series) degenerate.push_back({id, mod});
    report["degenerate_series"] = degenerate;
    std::ofstream rep(fs::path(out_dir) / "cleaning_report.json");
    if (!rep) throw IoError("cannot write cleaning report");
    rep << report.dump(2) << "\n";
    ctx.write_manifest();
    std::cout << "archive written to " << out_dir << " (" << ds.n_nodes() << " nodes, "
              << ds.n_samples() << " samples; dropped " << ds.dropped_rows << ", skipped "
              << ds.skipped_rows << ")\n";
    return kOk;
}

// ============================================================================
// train
// ============================================================================

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::vector<std::pair<std::string, std::string>>& cli_kv,
              const std::string& positions, std::size_t knn, double train_frac,
              const std::string& out_dir) {
    RunContext ctx;
    ctx.command = "train";
    ctx.out_dir = out_dir;
    ctx.config = resolve_config(config_path, cli_kv, ctx);
    ctx.options = {{"data", data_dir}, {"positions", positions}, {"knn", knn},
                   {"train_frac", train_frac}};

    const data::CleanDataset ds = load_dataset(data_dir, ctx);
    const graph::AdjacencyMatrix adj = adjacency_for(ds, positions, knn, ctx);
    model::Network net(ctx.config, adj, ds.n_modalities());

    const data::LabeledWindowSet ws = make_windows(ds, ctx.config.window, ctx.config.step);
    if (!(train_frac > 0.0 && train_frac <= 1.0))
        throw ConfigError("--train-frac must lie in (0, 1]");
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(train_frac * double(ws.count())));
    std::vector<Tensor> train_windows(ws.windows.begin(), ws.windows.begin() + n_train);

    const model::TrainResult result = model::train(net, train_windows, &std::cout);

    fs::create_directories(out_dir);
    write_loss_csv(result.epoch_loss, (fs::path(out_dir) / "loss.csv").string());
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.txt").string();
    model::save_checkpoint_file(ckpt_path,
                                {ctx.config, result.params, adj, result.tau, ctx.config.seed});
    ctx.write_manifest();
    std::cout << "trained on " << n_train << " of " << ws.count() << " windows; final loss "
              << fmt_double(result.epoch_loss.back()) << "\n";
    std::cout << "parameters " << result.parameter_count << ", threshold "
              << fmt_double(result.tau) << "\n";
    std::cout << "checkpoint " << ckpt_path << " digest " << file_digest(ckpt_path) << "\n";
    return kOk;
}

// ============================================================================
// detect
// ============================================================================

int cmd_detect(const std::string& data_dir, const std::string& ckpt_path,
               const std::string& out_dir) {
    RunContext ctx;
    ctx.command = "detect";
    ctx.out_dir = out_dir;
    const model::Checkpoint ckpt = model::load_checkpoint_file(ckpt_path);
    ctx.config = ckpt.config;
    ctx.note_input(ckpt_path);
    ctx.options = {{"data", data_dir}, {"checkpoint", ckpt_path}};

    const data::CleanDataset ds = load_dataset(data_dir, ctx);
    if (ds.n_nodes() != ckpt.params.n_nodes || ds.n_modalities() != ckpt.params.n_modalities)
        throw ContractError("dataset has " + std::to_string(ds.n_nodes()) + " nodes / " +
                            std::to_string(ds.n_modalities()) +
                            " modalities but the checkpoint was trained for " +
                            std::to_string(ckpt.params.n_nodes) + " / " +
                            std::to_string(ckpt.params.n_modalities));
    model::Network net(ckpt.config, ckpt.adjacency, ds.n_modalities());
    const data::LabeledWindowSet ws = make_windows(ds, ckpt.config.window, ckpt.config.step);

    std::vector<ScoredCell> cells;
    const std::size_t tail = ckpt.config.detect_tail;
    for (std::size_t w = 0; w < ws.count(); ++w) {
        model::AnomalyScoreGrid grid = model::score(net, ws.windows[w], ckpt.params);
        grid.threshold = ckpt.tau;
        const LabelGrid labels = model::classify(grid);
        for (std::size_t i = 0; i < ds.n_nodes(); ++i)
            for (std::size_t j = 0; j < ds.n_modalities(); ++j)
                for (std::size_t k = 0; k < tail; ++k) {
                    const std::size_t t = ws.starts[w] + ckpt.config.window - tail + k;
                    cells.push_back({ds.node_ids[i], ds.modalities[j], t,
                                     grid.scores.at3(i, j, k), labels.at3(i, j, k)});
                }
    }

    fs::create_directories(out_dir);
    write_scores_csv(cells, (fs::path(out_dir) / "scores.csv").string());
    std::ofstream labels_csv(fs::path(out_dir) / "labels.csv");
    if (!labels_csv) throw IoError("cannot write labels.csv");
    labels_csv << "node,modality,t,label\n";
    for (const auto& c : cells)
        labels_csv << c.node_id << "," << c.modality << "," << c.t << "," << c.label << "\n";
    json thr;
    thr["threshold"] = ckpt.tau;
    std::ofstream thr_out(fs::path(out_dir) / "threshold.json");
    thr_out << thr.dump(2) << "\n";
    ctx.write_manifest();

    std::size_t positives = 0;
    for (const auto& c : cells) positives += c.label;
    std::cout << "scored " << cells.size() << " cells over " << ws.count() << " windows; "
              << positives << " flagged; threshold " << fmt_double(ckpt.tau) << "\n";
    return kOk;
}

// ============================================================================
// evaluate
// ============================================================================

struct ScoreRow {
    std::string key;  // node,modality,t
    double score;
    int pred;
};

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scores file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "node,modality,t,score,label")
        throw FormatError("scores file lacks the node,modality,t,score,label header");
    std::vector<ScoreRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string node, mod, t, score, label;
        if (!std::getline(row, node, ',') || !std::getline(row, mod, ',') ||
            !std::getline(row, t, ',') || !std::getline(row, score, ',') ||
            !std::getline(row, label, ','))
            throw FormatError("scores file: malformed line " + std::to_string(lineno));
        rows.push_back({node + "," + mod + "," + t, std::strtod(score.c_str(), nullptr),
                        label == "1" ? 1 : 0});
    }
    if (rows.empty()) throw FormatError("scores file has no data rows");
    return rows;
}

std::set<std::string> read_truth_keys(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open labels file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("node,modality,t,label", 0) != 0)
        throw FormatError("labels file lacks the node,modality,t,label header");
    std::set<std::string> keys;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string node, mod, t, label;
        if (!std::getline(row, node, ',') || !std::getline(row, mod, ',') ||
            !std::getline(row, t, ',') || !std::getline(row, label, ','))
            throw FormatError("labels file: malformed line");
        if (label == "1") keys.insert(node + "," + mod + "," + t);
    }
    return keys;
}

int cmd_evaluate(const std::string& scores_path, const std::string& labels_path,
                 const std::string& out_dir, bool reliability, std::size_t segments,
                 std::size_t pick, std::size_t trials, std::uint64_t seed,
                 const std::string& robustness_ckpt, const std::string& robustness_data,
                 const std::string& alphas_csv, double rate, double threshold_override,
                 bool has_threshold_override) {
    RunContext ctx;
    ctx.command = "evaluate";
    ctx.out_dir = out_dir;
    fs::create_directories(out_dir);

    // robustness mode: checkpoint + clean data + alpha sweep
    if (!robustness_ckpt.empty()) {
        const model::Checkpoint ckpt = model::load_checkpoint_file(robustness_ckpt);
        ctx.config = ckpt.config;
        ctx.note_input(robustness_ckpt);
        const data::CleanDataset ds = load_dataset(robustness_data, ctx);
        model::Network net(ckpt.config, ckpt.adjacency, ds.n_modalities());
        const data::LabeledWindowSet ws =
            make_windows(ds, ckpt.config.window, ckpt.config.step);
        std::vector<double> alphas;
        std::istringstream alist(alphas_csv);
        std::string tok;
        while (std::getline(alist, tok, ',')) alphas.push_back(std::strtod(tok.c_str(), nullptr));
        const auto rows = eval::robustness_sweep(net, ckpt.params, ckpt.tau, ws, alphas, rate,
                                                 seed);
        std::ofstream csv(fs::path(out_dir) / "robustness.csv");
        if (!csv) throw IoError("cannot write robustness.csv");
        eval::write_robustness_csv(rows, csv);
        ctx.options = {{"mode", "robustness"}, {"alphas", alphas_csv}, {"rate", rate},
                       {"seed", seed}};
        ctx.write_manifest();
        std::cout << "robustness sweep over " << rows.size() << " alphas written\n";
        return kOk;
    }

    const std::vector<ScoreRow> rows = read_scores_csv(scores_path);
    ctx.note_input(scores_path);
    const std::set<std::string> truth_keys = read_truth_keys(labels_path);
    ctx.note_input(labels_path);
    ctx.options = {{"mode", reliability ? "reliability" : "single"},
                   {"scores", scores_path},
                   {"labels", labels_path}};

    Tensor scores({rows.size()});
    LabelGrid pred(1, 1, rows.size()), truth(1, 1, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        scores[i] = rows[i].score;
        pred.values[i] = rows[i].pred;
        truth.values[i] = truth_keys.count(rows[i].key) ? 1 : 0;
    }

    if (reliability) {
        // windows are recovered from row order: scores.csv lists whole tails
        if (segments < 1) throw ConfigError("--segments must be >= 1");
        std::vector<model::AnomalyScoreGrid> window_scores;
        std::vector<LabelGrid> window_truth;
        const std::size_t per = rows.size() / segments;
        if (per == 0) throw ConfigError("fewer scored cells than segments");
        double thr = has_threshold_override ? threshold_override : 0.0;
        if (!has_threshold_override) {
            // derive a threshold consistent with the predicted labels
            double max_neg = 0.0;
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (!rows[i].pred) max_neg = std::max(max_neg, rows[i].score);
            thr = max_neg;
        }
        for (std::size_t s = 0; s < segments; ++s) {
            const std::size_t a = s * rows.size() / segments;
            const std::size_t b = (s + 1) * rows.size() / segments;
            model::AnomalyScoreGrid g;
            g.scores = Tensor({1, 1, b - a});
            LabelGrid t(1, 1, b - a);
            for (std::size_t i = a; i < b; ++i) {
                g.scores[i - a] = scores[i];
                t.values[i - a] = truth.values[i];
            }
            window_scores.push_back(std::move(g));
            window_truth.push_back(std::move(t));
        }
        const eval::ResampleSummary summary = eval::reliability_resample(
            window_scores, window_truth, thr, segments, pick, trials, seed);
        std::ofstream csv(fs::path(out_dir) / "reliability.csv");
        if (!csv) throw IoError("cannot write reliability.csv");
        eval::write_resample_csv(summary, csv);
        ctx.write_manifest();
        std::cout << "reliability: f1 mean " << fmt_double(summary.f1.mean) << " std "
                  << fmt_double(summary.f1.stddev) << "\n";
        return kOk;
    }

    eval::MetricsReport report;
    report.counts = eval::confusion(pred, truth);
    report.prf = eval::precision_recall_f1(report.counts);
    bool degenerate_truth = false;
    try {
        report.auc = eval::auc(scores, truth);
    } catch (const UndefinedMetricError&) {
        report.auc = std::nullopt;
        degenerate_truth = true;
    }
    std::ofstream mj(fs::path(out_dir) / "metrics.json");
    if (!mj) throw IoError("cannot write metrics.json");
    mj << metrics_to_json(report).dump(2) << "\n";
    ctx.write_manifest();
    std::cout << "precision " << fmt_double(report.prf.precision) << " recall "
              << fmt_double(report.prf.recall) << " f1 " << fmt_double(report.prf.f1) << " auc "
              << (report.auc ? fmt_double(*report.auc) : std::string("undefined")) << "\n";
    return degenerate_truth ? kDegenerateMetric : kOk;
}

// ============================================================================
// inject
// ============================================================================

int cmd_inject(const std::string& data_dir, const std::string& out_dir, double alpha, double rate,
               std::uint64_t seed, bool correlation, int node_id, std::size_t span_start,
               std::size_t span_len, const std::string& altered, const std::string& partner) {
    RunContext ctx;
    ctx.command = "inject";
    ctx.out_dir = out_dir;
    const data::CleanDataset ds = load_dataset(data_dir, ctx);

    data::DatasetInjection result;
    if (correlation) {
        std::size_t node_row = ds.n_nodes();
        for (std::size_t i = 0; i < ds.n_nodes(); ++i)
            if (ds.node_ids[i] == node_id) node_row = i;
        if (node_row == ds.n_nodes())
            throw ConfigError("node " + std::to_string(node_id) + " not in dataset");
        std::size_t altered_idx = 0, partner_idx = 1;
        for (std::size_t j = 0; j < ds.modalities.size(); ++j) {
            if (ds.modalities[j] == altered) altered_idx = j;
            if (ds.modalities[j] == partner) partner_idx = j;
        }
        result = data::inject_correlation_anomaly_dataset(ds, node_row, span_start, span_len,
                                                          seed, altered_idx, partner_idx);
        ctx.options = {{"mode", "correlation"}, {"node", node_id}, {"span_start", span_start},
                       {"span_len", span_len}, {"seed", seed}};
    } else {
        std::vector<std::string> warnings;
        result = data::inject_anomalies_dataset(ds, alpha, rate, seed, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        ctx.options = {{"mode", "point"}, {"alpha", alpha}, {"rate", rate}, {"seed", seed}};
    }

    data::write_archive(result.data, out_dir);
    std::ofstream labels(fs::path(out_dir) / "labels.csv");
    if (!labels) throw IoError("cannot write labels.csv");
    data::write_labels_csv(result.data, result.labels, result.records, labels);
    ctx.write_manifest();
    std::cout << "injected " << result.records.size() << " cells; labels in " << out_dir
              << "/labels.csv\n";
    return kOk;
}

// ============================================================================
// spectrum
// ============================================================================

int cmd_spectrum(const std::string& data_dir, const std::string& out_dir,
                 std::vector<int> nodes, std::vector<std::string> modalities) {
    RunContext ctx;
    ctx.command = "spectrum";
    ctx.out_dir = out_dir;
    const data::CleanDataset ds = load_dataset(data_dir, ctx);
    fs::create_directories(out_dir);
    if (nodes.empty()) nodes = ds.node_ids;
    if (modalities.empty()) modalities = ds.modalities;
    ctx.options = {{"nodes", nodes}, {"modalities", modalities}};

    std::size_t written = 0;
    for (int id : nodes) {
        std::size_t row = ds.n_nodes();
        for (std::size_t i = 0; i < ds.n_nodes(); ++i)
            if (ds.node_ids[i] == id) row = i;
        if (row == ds.n_nodes())
            throw ConfigError("node " + std::to_string(id) + " not in dataset");
        for (const auto& mod : modalities) {
            std::size_t col = ds.n_modalities();
            for (std::size_t j = 0; j < ds.n_modalities(); ++j)
                if (ds.modalities[j] == mod) col = j;
            if (col == ds.n_modalities())
                throw ConfigError("modality '" + mod + "' not in dataset");
            std::vector<double> series(ds.n_samples());
            for (std::size_t k = 0; k < ds.n_samples(); ++k)
                series[k] = ds.values.at3(row, col, k);
            const std::string name =
                "spectrum_" + std::to_string(id) + "_" + mod + ".csv";
            std::ofstream out(fs::path(out_dir) / name);
            if (!out) throw IoError("cannot write " + name);
            signal::spectrum_report(series, out);
            ++written;
        }
    }
    ctx.write_manifest();
    std::cout << "wrote " << written << " spectrum files to " << out_dir << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WSN anomaly detection: wavelet decomposition, frequency-domain attention, "
                 "dynamic graph convolution"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "ingest a raw sensor log into a clean archive");
    std::string pre_input, pre_synth, pre_out = "archive";
    double pre_period = 31.0;
    std::size_t pre_gap = 10;
    std::vector<int> pre_exclude;
    std::uint64_t pre_seed = 1;
    pre->add_option("--input", pre_input, "raw log file");
    pre->add_option("--synth", pre_synth, "generate synthetic data instead: N,M,T");
    pre->add_option("--out", pre_out, "archive directory")->required();
    pre->add_option("--period", pre_period, "sampling period in seconds");
    pre->add_option("--max-gap", pre_gap, "longest gap filled by interpolation");
    pre->add_option("--exclude-nodes", pre_exclude, "node ids to drop");
    pre->add_option("--seed", pre_seed, "seed for --synth");

    // shared model-config overrides
    auto add_config_flags = [](CLI::App* cmd, std::string& config_path,
                               std::map<std::string, std::string>& kv) {
        cmd->add_option("--config", config_path, "JSON config file");
        static const std::vector<std::string> keys = {
            "window", "step", "detect_tail", "hidden_width", "mfdgcn_depth", "attention_dim",
            "fusion_dim", "learning_rate", "epochs", "seed", "decomposition",
            "seasonal_attention", "graph", "moving_average_window", "spatial_per_instant",
            "fusion_prose_indexing"};
        for (const auto& key : keys)
            cmd->add_option("--" + key, kv[key], "override config key " + key);
    };

    // train
    auto* tr = app.add_subcommand("train", "train the autoencoder and calibrate the threshold");
    std::string tr_data, tr_config, tr_positions, tr_out = "run";
    std::map<std::string, std::string> tr_kv;
    std::size_t tr_knn = 4;
    double tr_frac = 1.0;
    tr->add_option("--data", tr_data, "clean archive directory")->required();
    tr->add_option("--positions", tr_positions, "node_id,x,y CSV for the adjacency");
    tr->add_option("--knn", tr_knn, "neighbors in the adjacency graph");
    tr->add_option("--train-frac", tr_frac, "leading fraction of windows used for training");
    tr->add_option("--out", tr_out, "run directory");
    add_config_flags(tr, tr_config, tr_kv);

    // detect
    auto* de = app.add_subcommand("detect", "score windows against a trained checkpoint");
    std::string de_data, de_ckpt, de_out = "run";
    de->add_option("--data", de_data, "clean archive directory")->required();
    de->add_option("--checkpoint", de_ckpt, "checkpoint file")->required();
    de->add_option("--out", de_out, "run directory");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics from scores and truth labels");
    std::string ev_scores, ev_labels, ev_out = "run", ev_ckpt, ev_data;
    std::string ev_alphas = "-1,-0.5,-0.1,0.1,0.5,1";
    bool ev_reliability = false;
    std::size_t ev_segments = 9, ev_pick = 7, ev_trials = 10;
    std::uint64_t ev_seed = 1;
    double ev_rate = 0.01, ev_threshold = 0.0;
    ev->add_option("--scores", ev_scores, "scores.csv from detect");
    ev->add_option("--labels", ev_labels, "truth labels.csv");
    ev->add_option("--out", ev_out, "run directory");
    ev->add_flag("--reliability", ev_reliability, "segment-resampling reliability analysis");
    ev->add_option("--segments", ev_segments, "segments for --reliability");
    ev->add_option("--pick", ev_pick, "segments drawn per trial");
    ev->add_option("--trials", ev_trials, "number of trials");
    ev->add_option("--seed", ev_seed, "resampling / injection seed");
    auto* ev_thr_opt = ev->add_option("--threshold", ev_threshold,
                                      "score threshold for --reliability");
    ev->add_option("--robustness-checkpoint", ev_ckpt, "run an alpha sweep with this model");
    ev->add_option("--robustness-data", ev_data, "clean archive for the sweep");
    ev->add_option("--alphas", ev_alphas, "comma-separated alpha list");
    ev->add_option("--rate", ev_rate, "injected cell fraction");

    // inject
    auto* in = app.add_subcommand("inject", "perturb a dataset and emit truth labels");
    std::string in_data, in_out = "injected";
    double in_alpha = 1.0, in_rate = 0.01;
    std::uint64_t in_seed = 1;
    bool in_corr = false;
    int in_node = 0;
    std::size_t in_span_start = 0, in_span_len = 0;
    std::string in_altered = "humidity", in_partner = "temperature";
    in->add_option("--data", in_data, "clean archive directory")->required();
    in->add_option("--out", in_out, "output archive directory");
    in->add_option("--alpha", in_alpha, "range-scaled shift coefficient");
    in->add_option("--rate", in_rate, "fraction of cells perturbed");
    in->add_option("--seed", in_seed, "selection seed");
    in->add_flag("--correlation", in_corr, "flip a modality's correlation over a span");
    in->add_option("--node", in_node, "node id for --correlation");
    in->add_option("--span-start", in_span_start, "span start for --correlation");
    in->add_option("--span-len", in_span_len, "span length for --correlation");
    in->add_option("--altered", in_altered, "modality rewritten by --correlation");
    in->add_option("--partner", in_partner, "modality the rewrite tracks");

    // spectrum
    auto* sp = app.add_subcommand("spectrum", "amplitude-vs-frequency tables per series");
    std::string sp_data, sp_out = "spectra";
    std::vector<int> sp_nodes;
    std::vector<std::string> sp_mods;
    sp->add_option("--data", sp_data, "clean archive directory")->required();
    sp->add_option("--out", sp_out, "output directory");
    sp->add_option("--node", sp_nodes, "node ids (default: all)");
    sp->add_option("--modality", sp_mods, "modalities (default: all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed())
            return cmd_preprocess(pre_input, pre_synth, pre_out, pre_period, pre_gap,
                                  pre_exclude, pre_seed);
        if (tr->parsed()) {
            std::vector<std::pair<std::string, std::string>> kv;
            for (const auto& [key, value] : tr_kv)
                if (!value.empty()) kv.emplace_back(key, value);
            return cmd_train(tr_data, tr_config, kv, tr_positions, tr_knn, tr_frac, tr_out);
        }
        if (de->parsed()) return cmd_detect(de_data, de_ckpt, de_out);
        if (ev->parsed())
            return cmd_evaluate(ev_scores, ev_labels, ev_out, ev_reliability, ev_segments,
                                ev_pick, ev_trials, ev_seed, ev_ckpt, ev_data, ev_alphas,
                                ev_rate, ev_threshold, ev_thr_opt->count() > 0);
        if (in->parsed())
            return cmd_inject(in_data, in_out, in_alpha, in_rate, in_seed, in_corr, in_node,
                              in_span_start, in_span_len, in_altered, in_partner);
        if (sp->parsed()) return cmd_spectrum(sp_data, sp_out, sp_nodes, sp_mods);
    } catch (const UndefinedMetricError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDegenerateMetric;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFormat;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTraining;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kContract;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
