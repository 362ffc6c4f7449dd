#include "wsn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wsn::data {

namespace {

using json = nlohmann::json;

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Civil-date conversion (proleptic Gregorian, days since 1970-01-01).
long long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, int& y, int& m, int& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long long yy = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::size_t modality_index(const CleanDataset& ds, const std::string& name) {
    for (std::size_t j = 0; j < ds.modalities.size(); ++j)
        if (ds.modalities[j] == name) return j;
    throw FormatError("labels: unknown modality '" + name + "'");
}

std::size_t node_index(const CleanDataset& ds, int node_id) {
    for (std::size_t i = 0; i < ds.node_ids.size(); ++i)
        if (ds.node_ids[i] == node_id) return i;
    throw FormatError("labels: unknown node id " + std::to_string(node_id));
}

// Z-scores an aligned raw tensor and fills the dataset statistics.
CleanDataset normalize_dataset(Tensor raw, std::vector<int> node_ids,
                               std::vector<std::string> modalities, double period,
                               double sigma_floor) {
    const std::size_t n = raw.extent(0), m = raw.extent(1), t = raw.extent(2);
    CleanDataset ds;
    ds.node_ids = std::move(node_ids);
    ds.modalities = std::move(modalities);
    ds.sample_period_seconds = period;
    ds.mean = Tensor({n, m});
    ds.stddev = Tensor({n, m});
    ds.series_min = Tensor({n, m});
    ds.series_max = Tensor({n, m});
    ds.values = Tensor({n, m, t});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double mu = 0.0;
            for (std::size_t k = 0; k < t; ++k) mu += raw.at3(i, j, k);
            mu /= static_cast<double>(t);
            double var = 0.0;
            for (std::size_t k = 0; k < t; ++k) {
                const double d = raw.at3(i, j, k) - mu;
                var += d * d;
            }
            double sigma = std::sqrt(var / static_cast<double>(t));
            ds.mean.at(i, j) = mu;
            if (sigma < sigma_floor) {
                ds.degenerate_series.emplace_back(ds.node_ids[i], ds.modalities[j]);
                for (std::size_t k = 0; k < t; ++k) ds.values.at3(i, j, k) = 0.0;
                ds.stddev.at(i, j) = 1.0;  // denormalization recovers mu
                ds.series_min.at(i, j) = 0.0;
                ds.series_max.at(i, j) = 0.0;
                continue;
            }
            ds.stddev.at(i, j) = sigma;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t k = 0; k < t; ++k) {
                const double z = (raw.at3(i, j, k) - mu) / sigma;
                ds.values.at3(i, j, k) = z;
                lo = std::min(lo, z);
                hi = std::max(hi, z);
            }
            ds.series_min.at(i, j) = lo;
            ds.series_max.at(i, j) = hi;
        }
    }
    return ds;
}

}  // namespace

// ============================================================================
// Ingestion
// ============================================================================

RawReadingLog ingest_ibrl(std::istream& in) {
    if (!in.good()) throw IoError("ingest: unreadable source");
    RawReadingLog log;
    std::string line;
    while (std::getline(in, line)) {
        for (char& c : line)
            if (c == ',') c = ' ';
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        std::string date, time;
        RawReading r;
        int year = 0, month = 0, day = 0, hour = 0, minute = 0;
        double second = 0.0;
        if (!(row >> date >> time >> r.epoch >> r.node_id >> r.temperature >> r.humidity >>
              r.light >> r.voltage) ||
            std::sscanf(date.c_str(), "%d-%d-%d", &year, &month, &day) != 3 ||
            std::sscanf(time.c_str(), "%d:%d:%lf", &hour, &minute, &second) != 3 ||
            r.node_id < 1) {
            ++log.skipped_rows;
            continue;
        }
        r.timestamp = static_cast<double>(days_from_civil(year, month, day)) * 86400.0 +
                      hour * 3600.0 + minute * 60.0 + second;
        log.rows.push_back(r);
    }
    if (log.rows.empty()) throw FormatError("ingest: no valid rows in source");
    std::stable_sort(log.rows.begin(), log.rows.end(),
                     [](const RawReading& a, const RawReading& b) {
                         return a.timestamp < b.timestamp;
                     });
    return log;
}

RawReadingLog ingest_ibrl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("ingest: cannot open '" + path + "'");
    return ingest_ibrl(in);
}

// ============================================================================
// Cleaning
// ============================================================================

CleanDataset clean_and_align(const RawReadingLog& log, const CleaningOptions& opt) {
    if (log.rows.empty()) throw ContractError("clean_and_align: empty log");

    std::size_t dropped = 0;
    std::set<int> node_set;
    std::vector<const RawReading*> kept;
    kept.reserve(log.rows.size());
    for (const auto& r : log.rows) {
        if (std::find(opt.excluded_nodes.begin(), opt.excluded_nodes.end(), r.node_id) !=
            opt.excluded_nodes.end())
            continue;
        if (r.temperature > opt.max_temperature || r.humidity < opt.min_humidity) {
            ++dropped;
            continue;
        }
        kept.push_back(&r);
        node_set.insert(r.node_id);
    }
    if (kept.empty()) throw FormatError("clean_and_align: no rows survive the range rules");

    std::vector<int> node_ids(node_set.begin(), node_set.end());
    std::map<int, std::size_t> node_index_map;
    for (std::size_t i = 0; i < node_ids.size(); ++i) node_index_map[node_ids[i]] = i;

    CleanDataset ds_meta;  // carries the exclusion log while we build
    for (int ex : opt.excluded_nodes)
        ds_meta.exclusion_log.push_back("node " + std::to_string(ex) + " excluded by policy");

    // resample onto the uniform grid
    const double t0 = kept.front()->timestamp;
    double t_max = t0;
    for (const auto* r : kept) t_max = std::max(t_max, r->timestamp);
    const std::size_t total =
        static_cast<std::size_t>(std::llround((t_max - t0) / opt.sample_period_seconds)) + 1;
    const std::size_t n = node_ids.size(), m = kModalities.size();

    Tensor sums({n, m, total}), counts({n, m, total});
    for (const auto* r : kept) {
        const std::size_t i = node_index_map[r->node_id];
        const std::size_t k = static_cast<std::size_t>(
            std::llround((r->timestamp - t0) / opt.sample_period_seconds));
        const double vals[3] = {r->humidity, r->temperature, r->voltage};
        for (std::size_t j = 0; j < m; ++j) {
            sums.at3(i, j, k) += vals[j];
            counts.at3(i, j, k) += 1.0;
        }
    }
    Tensor grid({n, m, total});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < total; ++k)
                grid.at3(i, j, k) = counts.at3(i, j, k) > 0.0
                                        ? sums.at3(i, j, k) / counts.at3(i, j, k)
                                        : kMissing;

    // drop nodes that are mostly missing, mirroring the policy exclusions
    std::vector<bool> node_alive(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t missing = 0;
        for (std::size_t k = 0; k < total; ++k)
            if (std::isnan(grid.at3(i, 0, k))) ++missing;
        if (static_cast<double>(missing) >
            opt.max_missing_fraction * static_cast<double>(total)) {
            node_alive[i] = false;
            ds_meta.exclusion_log.push_back(
                "node " + std::to_string(node_ids[i]) + " excluded: " + std::to_string(missing) +
                "/" + std::to_string(total) + " samples missing");
        }
    }

    std::vector<int> live_ids;
    std::vector<std::size_t> live_rows;
    for (std::size_t i = 0; i < n; ++i)
        if (node_alive[i]) {
            live_ids.push_back(node_ids[i]);
            live_rows.push_back(i);
        }
    if (live_ids.empty()) throw FormatError("clean_and_align: every node was excluded");

    // interpolate short gaps; longer gaps stay missing and split the range
    for (std::size_t i : live_rows) {
        for (std::size_t j = 0; j < m; ++j) {
            std::size_t k = 0;
            while (k < total) {
                if (!std::isnan(grid.at3(i, j, k))) {
                    ++k;
                    continue;
                }
                std::size_t end = k;
                while (end < total && std::isnan(grid.at3(i, j, end))) ++end;
                const bool bounded = k > 0 && end < total;
                if (bounded && end - k <= opt.max_gap_samples) {
                    const double a = grid.at3(i, j, k - 1), b = grid.at3(i, j, end);
                    for (std::size_t g = k; g < end; ++g) {
                        const double frac = static_cast<double>(g - k + 1) /
                                            static_cast<double>(end - k + 1);
                        grid.at3(i, j, g) = a + (b - a) * frac;
                    }
                }
                k = end;
            }
        }
    }

    // the usable range is the longest stretch with every cell defined
    std::size_t best_start = 0, best_len = 0, run_start = 0, run_len = 0;
    for (std::size_t k = 0; k < total; ++k) {
        bool complete = true;
        for (std::size_t ri = 0; ri < live_rows.size() && complete; ++ri)
            for (std::size_t j = 0; j < m; ++j)
                if (std::isnan(grid.at3(live_rows[ri], j, k))) {
                    complete = false;
                    break;
                }
        if (complete) {
            if (run_len == 0) run_start = k;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
        } else {
            run_len = 0;
        }
    }
    if (best_len < 2) throw FormatError("clean_and_align: no usable aligned range");
    if (best_len < total)
        ds_meta.exclusion_log.push_back("usable range cropped to samples [" +
                                        std::to_string(best_start) + ", " +
                                        std::to_string(best_start + best_len) + ") of " +
                                        std::to_string(total));

    Tensor raw({live_rows.size(), m, best_len});
    for (std::size_t ri = 0; ri < live_rows.size(); ++ri)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < best_len; ++k)
                raw.at3(ri, j, k) = grid.at3(live_rows[ri], j, best_start + k);

    CleanDataset ds = normalize_dataset(std::move(raw), live_ids,
                                        std::vector<std::string>(kModalities),
                                        opt.sample_period_seconds, opt.sigma_floor);
    ds.exclusion_log = std::move(ds_meta.exclusion_log);
    ds.dropped_rows = dropped;
    ds.skipped_rows = log.skipped_rows;
    return ds;
}

void write_ibrl_log(const CleanDataset& ds, std::ostream& out) {
    if (ds.n_modalities() != 3)
        throw ContractError("write_ibrl_log: needs the humidity/temperature/voltage layout");
    const long long base_day = days_from_civil(2004, 3, 1);
    for (std::size_t k = 0; k < ds.n_samples(); ++k) {
        const double seconds_of_epoch = static_cast<double>(k) * ds.sample_period_seconds;
        const long long day = base_day + static_cast<long long>(seconds_of_epoch / 86400.0);
        const double rem = seconds_of_epoch - std::floor(seconds_of_epoch / 86400.0) * 86400.0;
        int y, mo, d;
        civil_from_days(day, y, mo, d);
        const int hh = static_cast<int>(rem / 3600.0);
        const int mi = static_cast<int>((rem - hh * 3600.0) / 60.0);
        const double ss = rem - hh * 3600.0 - mi * 60.0;
        char stamp[64];
        std::snprintf(stamp, sizeof(stamp), "%04d-%02d-%02d %02d:%02d:%06.3f", y, mo, d, hh, mi,
                      ss);
        for (std::size_t i = 0; i < ds.n_nodes(); ++i) {
            out << stamp << " " << (k + 1) << " " << ds.node_ids[i] << " "
                << fmt_double(ds.denormalize(i, 1, ds.values.at3(i, 1, k))) << " "
                << fmt_double(ds.denormalize(i, 0, ds.values.at3(i, 0, k))) << " 0 "
                << fmt_double(ds.denormalize(i, 2, ds.values.at3(i, 2, k))) << "\n";
        }
    }
    if (!out.good()) throw IoError("write_ibrl_log: write failed");
}

// ============================================================================
// Archive
// ============================================================================

void write_archive(const CleanDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("archive: cannot create directory '" + dir + "'");

    for (std::size_t j = 0; j < ds.n_modalities(); ++j) {
        std::ofstream csv(fs::path(dir) / (ds.modalities[j] + ".csv"));
        if (!csv) throw IoError("archive: cannot write modality csv in '" + dir + "'");
        csv << "t";
        for (int id : ds.node_ids) csv << "," << id;
        csv << "\n";
        for (std::size_t k = 0; k < ds.n_samples(); ++k) {
            csv << k;
            for (std::size_t i = 0; i < ds.n_nodes(); ++i)
                csv << "," << fmt_double(ds.values.at3(i, j, k));
            csv << "\n";
        }
        if (!csv.good()) throw IoError("archive: write failed for " + ds.modalities[j]);
    }

    json meta;
    meta["format"] = "wsn-anomaly-archive v1";
    meta["node_ids"] = ds.node_ids;
    meta["modalities"] = ds.modalities;
    meta["sample_period_seconds"] = ds.sample_period_seconds;
    meta["dropped_rows"] = ds.dropped_rows;
    meta["skipped_rows"] = ds.skipped_rows;
    meta["exclusions"] = ds.exclusion_log;
    auto matrix = [&](const Tensor& t) {
        json rows = json::array();
        for (std::size_t i = 0; i < t.rows(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    meta["mean"] = matrix(ds.mean);
    meta["stddev"] = matrix(ds.stddev);
    meta["normalized_min"] = matrix(ds.series_min);
    meta["normalized_max"] = matrix(ds.series_max);
    json degenerate = json::array();
    for (const auto& [id, mod] : ds.degenerate_series) degenerate.push_back({id, mod});
    meta["degenerate_series"] = degenerate;
    if (ds.positions) meta["positions"] = matrix(*ds.positions);

    std::ofstream mj(fs::path(dir) / "meta.json");
    if (!mj) throw IoError("archive: cannot write meta.json in '" + dir + "'");
    mj << meta.dump(2) << "\n";
    if (!mj.good()) throw IoError("archive: meta.json write failed");
}

CleanDataset read_archive(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mj(fs::path(dir) / "meta.json");
    if (!mj) throw IoError("archive: cannot open '" + dir + "/meta.json'");
    json meta;
    try {
        mj >> meta;
    } catch (const json::exception& e) {
        throw FormatError("archive: meta.json is not valid JSON: " + std::string(e.what()));
    }
    if (meta.value("format", "") != "wsn-anomaly-archive v1")
        throw FormatError("archive: unknown format tag in meta.json");

    CleanDataset ds;
    ds.node_ids = meta.at("node_ids").get<std::vector<int>>();
    ds.modalities = meta.at("modalities").get<std::vector<std::string>>();
    ds.sample_period_seconds = meta.value("sample_period_seconds", 31.0);
    ds.dropped_rows = meta.value("dropped_rows", 0u);
    ds.skipped_rows = meta.value("skipped_rows", 0u);
    if (meta.contains("exclusions"))
        ds.exclusion_log = meta.at("exclusions").get<std::vector<std::string>>();

    const std::size_t n = ds.node_ids.size(), m = ds.modalities.size();
    auto matrix = [&](const char* key) {
        const json& rows = meta.at(key);
        if (rows.size() != n) throw FormatError(std::string("archive: bad row count in ") + key);
        Tensor t({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) t.at(i, j) = rows[i][j].get<double>();
        return t;
    };
    ds.mean = matrix("mean");
    ds.stddev = matrix("stddev");
    ds.series_min = matrix("normalized_min");
    ds.series_max = matrix("normalized_max");
    if (meta.contains("degenerate_series"))
        for (const auto& entry : meta.at("degenerate_series"))
            ds.degenerate_series.emplace_back(entry[0].get<int>(), entry[1].get<std::string>());
    if (meta.contains("positions")) {
        const json& rows = meta.at("positions");
        Tensor pos({rows.size(), 2});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            pos.at(i, 0) = rows[i][0].get<double>();
            pos.at(i, 1) = rows[i][1].get<double>();
        }
        ds.positions = std::move(pos);
    }

    std::vector<std::vector<std::vector<double>>> columns(m);
    std::size_t samples = 0;
    for (std::size_t j = 0; j < m; ++j) {
        std::ifstream csv(fs::path(dir) / (ds.modalities[j] + ".csv"));
        if (!csv) throw IoError("archive: cannot open modality csv for " + ds.modalities[j]);
        std::string line;
        if (!std::getline(csv, line)) throw FormatError("archive: empty csv " + ds.modalities[j]);
        std::vector<std::vector<double>> series(n);
        while (std::getline(csv, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string field;
            std::getline(row, field, ',');  // t column
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(row, field, ','))
                    throw FormatError("archive: short row in " + ds.modalities[j] + ".csv");
                series[i].push_back(std::strtod(field.c_str(), nullptr));
            }
        }
        if (j == 0) samples = series[0].size();
        if (series[0].size() != samples)
            throw FormatError("archive: modality lengths disagree");
        columns[j] = std::move(series);
    }
    if (samples == 0) throw FormatError("archive: no samples");
    ds.values = Tensor({n, m, samples});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < samples; ++k) ds.values.at3(i, j, k) = columns[j][i][k];
    return ds;
}

// ============================================================================
// Windows
// ============================================================================

LabeledWindowSet make_windows(const CleanDataset& ds, std::size_t window, std::size_t step) {
    const std::size_t total = ds.n_samples();
    if (total < window)
        throw ConfigError("make_windows: " + std::to_string(total) + " samples < window " +
                          std::to_string(window));
    if (step == 0) throw ConfigError("make_windows: step must be positive");
    LabeledWindowSet ws;
    ws.series_min = ds.series_min;
    ws.series_max = ds.series_max;
    const std::size_t count = (total - window) / step + 1;
    const std::size_t n = ds.n_nodes(), m = ds.n_modalities();
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * step;
        Tensor win({n, m, window});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t k = 0; k < window; ++k)
                    win.at3(i, j, k) = ds.values.at3(i, j, start + k);
        ws.windows.push_back(std::move(win));
        ws.labels.emplace_back(n, m, window);
        ws.starts.push_back(start);
    }
    return ws;
}

// ============================================================================
// Injection
// ============================================================================

namespace {

void validate_injection_args(double alpha, double rate) {
    if (alpha == 0.0) throw ConfigError("inject: alpha must be nonzero");
    if (!(rate > 0.0 && rate < 1.0))
        throw ConfigError("inject: rate must lie strictly between 0 and 1");
}

std::vector<std::size_t> sample_distinct(std::size_t population, std::size_t k, Rng& rng) {
    std::set<std::size_t> chosen;
    while (chosen.size() < k) chosen.insert(rng.index(population));
    return {chosen.begin(), chosen.end()};
}

}  // namespace

LabeledWindowSet inject_anomalies(const LabeledWindowSet& ws, double alpha, double rate,
                                  std::uint64_t seed, std::vector<std::string>* warnings) {
    validate_injection_args(alpha, rate);
    if (ws.windows.empty()) throw ContractError("inject: empty window set");
    LabeledWindowSet out = ws;
    const std::size_t n = ws.windows[0].extent(0), m = ws.windows[0].extent(1),
                      w = ws.windows[0].extent(2);
    const std::size_t cells = ws.windows.size() * n * m * w;
    const std::size_t k = static_cast<std::size_t>(std::llround(rate * double(cells)));
    if (k == 0) {
        if (warnings)
            warnings->push_back("inject: rate " + fmt_double(rate) + " selects zero of " +
                                std::to_string(cells) + " cells; nothing injected");
        return out;
    }
    Rng rng(seed);
    for (std::size_t idx : sample_distinct(cells, k, rng)) {
        const std::size_t wi = idx / (n * m * w);
        const std::size_t rem = idx % (n * m * w);
        const std::size_t i = rem / (m * w);
        const std::size_t j = (rem / w) % m;
        const std::size_t t = rem % w;
        const double range = ws.series_max.at(i, j) - ws.series_min.at(i, j);
        out.windows[wi].at3(i, j, t) += alpha * range;
        out.labels[wi].at3(i, j, t) = 1;
        out.injections.push_back({wi, i, j, t, alpha});
    }
    return out;
}

namespace {

// Rebuilds `altered` inside [span_start, span_end) so its correlation with
// `partner` flips sign, clamped into the series' clean range.
void flip_correlation_span(const Tensor& window_before, Tensor& window, LabelGrid& labels,
                           std::size_t node, std::size_t altered, std::size_t partner,
                           std::size_t span_start, std::size_t span_len, double lo, double hi,
                           Rng& rng) {
    const std::size_t w = window.extent(2);
    double mu_a = 0.0, mu_p = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
        mu_a += window_before.at3(node, altered, t);
        mu_p += window_before.at3(node, partner, t);
    }
    mu_a /= double(w);
    mu_p /= double(w);
    double var_a = 0.0, var_p = 0.0, cov = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
        const double da = window_before.at3(node, altered, t) - mu_a;
        const double dp = window_before.at3(node, partner, t) - mu_p;
        var_a += da * da;
        var_p += dp * dp;
        cov += da * dp;
    }
    const double sd_a = std::sqrt(var_a / double(w)), sd_p = std::sqrt(var_p / double(w));
    const double flip = cov >= 0.0 ? -1.0 : 1.0;  // oppose the clean sign
    const double aux_phase = rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t t = span_start; t < span_start + span_len; ++t) {
        const double dp = window_before.at3(node, partner, t) - mu_p;
        // a quadrature term keeps the rewrite away from the clean series even
        // where the partner crosses its mean, without leaving the value range
        const double aux = std::sin(2.0 * M_PI * 3.0 * double(t - span_start) /
                                        double(span_len) + aux_phase);
        double v = mu_a + flip * 3.5 * dp * (sd_p > 0.0 ? sd_a / sd_p : 1.0) +
                   2.0 * sd_a * aux + 0.05 * sd_a * rng.normal();
        v = std::clamp(v, lo, hi);
        window.at3(node, altered, t) = v;
        labels.at3(node, altered, t) = 1;
    }
}

}  // namespace

LabeledWindowSet inject_correlation_anomaly(const LabeledWindowSet& ws, std::size_t window_index,
                                            std::size_t node, std::size_t span_start,
                                            std::size_t span_len, std::uint64_t seed,
                                            std::size_t altered_modality,
                                            std::size_t partner_modality) {
    if (window_index >= ws.windows.size())
        throw ConfigError("inject_correlation: window index out of range");
    const Tensor& win = ws.windows[window_index];
    if (node >= win.extent(0)) throw ConfigError("inject_correlation: node out of range");
    if (altered_modality >= win.extent(1) || partner_modality >= win.extent(1) ||
        altered_modality == partner_modality)
        throw ConfigError("inject_correlation: bad modality pair");
    if (span_start + span_len > win.extent(2))
        throw ConfigError("inject_correlation: span exceeds the window bounds");
    LabeledWindowSet out = ws;
    if (span_len == 0) return out;

    Rng rng(seed);
    flip_correlation_span(win, out.windows[window_index], out.labels[window_index], node,
                          altered_modality, partner_modality, span_start, span_len,
                          ws.series_min.at(node, altered_modality),
                          ws.series_max.at(node, altered_modality), rng);
    for (std::size_t t = span_start; t < span_start + span_len; ++t)
        out.injections.push_back({window_index, node, altered_modality, t, 0.0});
    return out;
}

DatasetInjection inject_anomalies_dataset(const CleanDataset& ds, double alpha, double rate,
                                          std::uint64_t seed,
                                          std::vector<std::string>* warnings) {
    validate_injection_args(alpha, rate);
    DatasetInjection out{ds, LabelGrid(ds.n_nodes(), ds.n_modalities(), ds.n_samples()), {}};
    const std::size_t n = ds.n_nodes(), m = ds.n_modalities(), total = ds.n_samples();
    const std::size_t cells = n * m * total;
    const std::size_t k = static_cast<std::size_t>(std::llround(rate * double(cells)));
    if (k == 0) {
        if (warnings)
            warnings->push_back("inject: rate " + fmt_double(rate) + " selects zero of " +
                                std::to_string(cells) + " cells; nothing injected");
        return out;
    }
    Rng rng(seed);
    for (std::size_t idx : sample_distinct(cells, k, rng)) {
        const std::size_t i = idx / (m * total);
        const std::size_t j = (idx / total) % m;
        const std::size_t t = idx % total;
        const double range = ds.series_max.at(i, j) - ds.series_min.at(i, j);
        out.data.values.at3(i, j, t) += alpha * range;
        out.labels.at3(i, j, t) = 1;
        out.records.push_back({0, i, j, t, alpha});
    }
    return out;
}

DatasetInjection inject_correlation_anomaly_dataset(const CleanDataset& ds, std::size_t node,
                                                    std::size_t span_start, std::size_t span_len,
                                                    std::uint64_t seed,
                                                    std::size_t altered_modality,
                                                    std::size_t partner_modality) {
    if (node >= ds.n_nodes()) throw ConfigError("inject_correlation: node out of range");
    if (altered_modality >= ds.n_modalities() || partner_modality >= ds.n_modalities() ||
        altered_modality == partner_modality)
        throw ConfigError("inject_correlation: bad modality pair");
    if (span_start + span_len > ds.n_samples())
        throw ConfigError("inject_correlation: span exceeds the dataset bounds");
    DatasetInjection out{ds, LabelGrid(ds.n_nodes(), ds.n_modalities(), ds.n_samples()), {}};
    if (span_len == 0) return out;
    Rng rng(seed);
    flip_correlation_span(ds.values, out.data.values, out.labels, node, altered_modality,
                          partner_modality, span_start, span_len,
                          ds.series_min.at(node, altered_modality),
                          ds.series_max.at(node, altered_modality), rng);
    for (std::size_t t = span_start; t < span_start + span_len; ++t)
        out.records.push_back({0, node, altered_modality, t, 0.0});
    return out;
}

void write_labels_csv(const CleanDataset& ds, const LabelGrid& labels,
                      const std::vector<InjectionRecord>& records, std::ostream& out) {
    out << "node,modality,t,label,alpha\n";
    auto alpha_of = [&](std::size_t i, std::size_t j, std::size_t t) {
        for (const auto& r : records)
            if (r.node == i && r.modality == j && r.t == t) return r.alpha;
        return 0.0;
    };
    for (std::size_t i = 0; i < labels.shape[0]; ++i)
        for (std::size_t j = 0; j < labels.shape[1]; ++j)
            for (std::size_t t = 0; t < labels.shape[2]; ++t)
                if (labels.at3(i, j, t))
                    out << ds.node_ids[i] << "," << ds.modalities[j] << "," << t << ",1,"
                        << fmt_double(alpha_of(i, j, t)) << "\n";
    if (!out.good()) throw IoError("labels: write failed");
}

LabelGrid read_labels_csv(const CleanDataset& ds, std::istream& in) {
    LabelGrid labels(ds.n_nodes(), ds.n_modalities(), ds.n_samples());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("labels: empty file");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string node_s, mod_s, t_s, label_s, alpha_s;
        if (!std::getline(row, node_s, ',') || !std::getline(row, mod_s, ',') ||
            !std::getline(row, t_s, ',') || !std::getline(row, label_s, ','))
            throw FormatError("labels: malformed line " + std::to_string(lineno));
        std::getline(row, alpha_s, ',');
        std::size_t i = 0, j = 0, t = 0;
        try {
            i = node_index(ds, std::stoi(node_s));
            j = modality_index(ds, mod_s);
            t = std::stoul(t_s);
        } catch (const std::logic_error&) {
            throw FormatError("labels: malformed fields on line " + std::to_string(lineno));
        }
        if (t >= ds.n_samples())
            throw FormatError("labels: time index out of range on line " +
                              std::to_string(lineno));
        labels.at3(i, j, t) = label_s == "1" ? 1 : 0;
    }
    return labels;
}

// ============================================================================
// Synthetic data
// ============================================================================

CleanDataset synth_generate(std::size_t n_nodes, std::size_t n_modalities, std::size_t t,
                            std::uint64_t seed, const SynthOptions& opt) {
    if (n_nodes < 1 || n_modalities < 1 || t < 1)
        throw ConfigError("synth: extents must be >= 1");
    Rng rng(seed);

    // jittered-grid layout keeps neighbor distances well separated from the
    // layout diameter
    const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(double(n_nodes))));
    const std::size_t rows = (n_nodes + cols - 1) / cols;
    Tensor positions({n_nodes, 2});
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double cx = (double(i % cols) + 0.5) / double(cols);
        const double cy = (double(i / cols) + 0.5) / double(rows);
        positions.at(i, 0) = cx + rng.uniform(-0.1, 0.1) / double(cols);
        positions.at(i, 1) = cy + rng.uniform(-0.1, 0.1) / double(rows);
    }

    // spatially smooth local field from a grid of kernel anchors
    const std::size_t anchors = 9;
    std::vector<double> anchor_x(anchors), anchor_y(anchors), anchor_phase(anchors),
        anchor_period(anchors);
    // anchor periods divide the 2*period_long master cycle, so the waveform
    // repeats and windows anywhere on the timeline share the same shapes
    const double master = 2.0 * opt.period_long;
    const double period_choices[4] = {master / 5.0, master / 4.0, master / 2.0, master};
    for (std::size_t a = 0; a < anchors; ++a) {
        anchor_x[a] = (double(a % 3) + 0.5) / 3.0;
        anchor_y[a] = (double(a / 3) + 0.5) / 3.0;
        anchor_phase[a] = rng.uniform(0.0, 2.0 * M_PI);
        anchor_period[a] = period_choices[rng.index(4)];
    }
    const double ell = 0.4;
    Tensor anchor_w({n_nodes, anchors});
    for (std::size_t i = 0; i < n_nodes; ++i) {
        double norm = 0.0;
        for (std::size_t a = 0; a < anchors; ++a) {
            const double dx = positions.at(i, 0) - anchor_x[a];
            const double dy = positions.at(i, 1) - anchor_y[a];
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * ell * ell));
            anchor_w.at(i, a) = w;
            norm += w * w;
        }
        norm = std::sqrt(norm);
        for (std::size_t a = 0; a < anchors; ++a) anchor_w.at(i, a) /= norm;
    }

    std::vector<double> node_phase(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i)
        node_phase[i] = rng.uniform(-opt.node_phase_spread, opt.node_phase_spread);

    Tensor raw({n_nodes, n_modalities, t});
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t k = 0; k < t; ++k) {
            const double tt = static_cast<double>(k);
            double local = 0.0;
            for (std::size_t a = 0; a < anchors; ++a)
                local += anchor_w.at(i, a) *
                         std::sin(2.0 * M_PI * tt / anchor_period[a] + anchor_phase[a]);
            const double core =
                std::sin(2.0 * M_PI * tt / opt.period_long + node_phase[i]) +
                0.5 * std::sin(2.0 * M_PI * tt / opt.period_short + 2.0 * node_phase[i]) +
                opt.local_field_weight * local;

            for (std::size_t j = 0; j < n_modalities; ++j) {
                double v = 0.0;
                if (j == 0) {  // humidity, anti-correlated with temperature
                    v = 45.0 + 10.0 * (opt.modality_coupling * core + opt.noise_std * rng.normal());
                } else if (j == 1) {  // temperature
                    v = 22.0 + 4.0 * (core + opt.noise_std * rng.normal());
                } else if (j == 2) {  // voltage, slow independent drift
                    v = 2.75 +
                        0.15 * std::sin(2.0 * M_PI * tt / master + 0.5 * node_phase[i]) +
                        0.15 * opt.noise_std * rng.normal();
                } else {  // extra synthetic modalities
                    v = std::sin(2.0 * M_PI * tt / (opt.period_long * (1.0 + 0.3 * double(j))) +
                                 double(j) * node_phase[i]) +
                        opt.noise_std * rng.normal();
                }
                raw.at3(i, j, k) = v;
            }
        }
    }

    std::vector<int> ids(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) ids[i] = static_cast<int>(101 + i);
    std::vector<std::string> mods;
    for (std::size_t j = 0; j < n_modalities; ++j)
        mods.push_back(j < kModalities.size() ? kModalities[j]
                                              : "modality_" + std::to_string(j));
    CleanDataset ds = normalize_dataset(std::move(raw), std::move(ids), std::move(mods), 31.0,
                                        1e-12);
    ds.positions = std::move(positions);
    return ds;
}

}  // namespace wsn::data
