#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsn/labels.hpp"
#include "wsn/tensor.hpp"

namespace wsn::data {

// Canonical modality order used across datasets, reports and labels.
inline const std::vector<std::string> kModalities = {"humidity", "temperature", "voltage"};

// ============================================================================
// Raw log ingestion (date time epoch moteid temperature humidity light voltage)
// ============================================================================

struct RawReading {
    double timestamp = 0.0;  // seconds; parsed from the date + time fields
    long long epoch = 0;
    int node_id = 0;
    double temperature = 0.0;
    double humidity = 0.0;
    double light = 0.0;
    double voltage = 0.0;
};

struct RawReadingLog {
    std::vector<RawReading> rows;  // sorted by timestamp
    std::size_t skipped_rows = 0;  // malformed lines
};

RawReadingLog ingest_ibrl(std::istream& in);
RawReadingLog ingest_ibrl_file(const std::string& path);

// ============================================================================
// Cleaning and alignment
// ============================================================================

struct CleaningOptions {
    std::vector<int> excluded_nodes = {5, 15};
    double max_temperature = 120.0;  // degrees C
    double min_humidity = 0.0;       // percent
    double sample_period_seconds = 31.0;
    std::size_t max_gap_samples = 10;      // longer gaps split the usable range
    double max_missing_fraction = 0.5;     // nodes beyond this are excluded
    double sigma_floor = 1e-12;
};

struct CleanDataset {
    Tensor values;       // N x M x T, z-scored per (node, modality)
    Tensor mean;         // N x M
    Tensor stddev;       // N x M
    Tensor series_min;   // N x M over the normalized values
    Tensor series_max;   // N x M
    std::vector<int> node_ids;
    std::vector<std::string> modalities;
    std::optional<Tensor> positions;  // N x 2 when the layout is known
    std::vector<std::string> exclusion_log;
    std::vector<std::pair<int, std::string>> degenerate_series;  // (node_id, modality)
    std::size_t dropped_rows = 0;   // removed by the range rules
    std::size_t skipped_rows = 0;   // carried over from ingestion
    double sample_period_seconds = 31.0;

    std::size_t n_nodes() const { return values.extent(0); }
    std::size_t n_modalities() const { return values.extent(1); }
    std::size_t n_samples() const { return values.extent(2); }

    // Undoes the z-score for one cell.
    double denormalize(std::size_t node, std::size_t modality, double v) const {
        return v * stddev.at(node, modality) + mean.at(node, modality);
    }
};

CleanDataset clean_and_align(const RawReadingLog& log, const CleaningOptions& opt = {});

// Serializes a dataset back into log rows (used for round-trip checks and to
// feed synthetic data through the preprocessing entry point).
void write_ibrl_log(const CleanDataset& ds, std::ostream& out);

// Archive on disk: one CSV per modality (rows = time, columns = node ids)
// plus a meta.json sidecar with the normalization statistics.
void write_archive(const CleanDataset& ds, const std::string& dir);
CleanDataset read_archive(const std::string& dir);

// ============================================================================
// Windowing and anomaly injection
// ============================================================================

struct InjectionRecord {
    std::size_t window = 0;  // window index (dataset-level records use 0)
    std::size_t node = 0;    // row index into the dataset
    std::size_t modality = 0;
    std::size_t t = 0;  // time index within the window (or absolute for datasets)
    double alpha = 0.0; // 0 marks a correlation-type injection
};

struct LabeledWindowSet {
    std::vector<Tensor> windows;      // each N x M x W
    std::vector<LabelGrid> labels;    // aligned N x M x W
    std::vector<std::size_t> starts;  // window start sample indices
    Tensor series_min;                // N x M, from the source dataset
    Tensor series_max;
    std::vector<InjectionRecord> injections;

    std::size_t count() const { return windows.size(); }
};

LabeledWindowSet make_windows(const CleanDataset& ds, std::size_t window, std::size_t step);

// Point injection x' = x + alpha * (max - min) on `rate` of all cells.
LabeledWindowSet inject_anomalies(const LabeledWindowSet& ws, double alpha, double rate,
                                  std::uint64_t seed,
                                  std::vector<std::string>* warnings = nullptr);

// Regenerates one modality inside a span so that its correlation with the
// partner modality flips sign while every sample stays inside the series'
// clean value range.
LabeledWindowSet inject_correlation_anomaly(const LabeledWindowSet& ws, std::size_t window_index,
                                            std::size_t node, std::size_t span_start,
                                            std::size_t span_len, std::uint64_t seed,
                                            std::size_t altered_modality = 0,
                                            std::size_t partner_modality = 1);

struct DatasetInjection {
    CleanDataset data;   // perturbed copy
    LabelGrid labels;    // N x M x T, absolute time
    std::vector<InjectionRecord> records;
};

DatasetInjection inject_anomalies_dataset(const CleanDataset& ds, double alpha, double rate,
                                          std::uint64_t seed,
                                          std::vector<std::string>* warnings = nullptr);

DatasetInjection inject_correlation_anomaly_dataset(const CleanDataset& ds, std::size_t node,
                                                    std::size_t span_start, std::size_t span_len,
                                                    std::uint64_t seed,
                                                    std::size_t altered_modality = 0,
                                                    std::size_t partner_modality = 1);

// Label sidecar CSV: `node,modality,t,label,alpha` (injected cells only).
void write_labels_csv(const CleanDataset& ds, const LabelGrid& labels,
                      const std::vector<InjectionRecord>& records, std::ostream& out);
LabelGrid read_labels_csv(const CleanDataset& ds, std::istream& in);

// ============================================================================
// Synthetic data
// ============================================================================

struct SynthOptions {
    double period_long = 200.0;   // samples
    double period_short = 50.0;
    double noise_std = 0.05;
    double modality_coupling = -0.85;  // humidity vs temperature
    double local_field_weight = 0.8;   // spatially correlated share
    double node_phase_spread = 0.3;    // radians
};

// Jittered-grid sensor layout with shared sinusoidal bases, spatially
// correlated local components and anti-correlated humidity/temperature.
CleanDataset synth_generate(std::size_t n_nodes, std::size_t n_modalities, std::size_t t,
                            std::uint64_t seed, const SynthOptions& opt = {});

}  // namespace wsn::data
