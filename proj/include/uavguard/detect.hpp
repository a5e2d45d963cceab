#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavguard/matrix.hpp"
#include "uavguard/predictor.hpp"
#include "uavguard/telemetry.hpp"

namespace uavguard::detect {

using LossVector = std::vector<double>;

// Per-row mean squared error across features.
LossVector pointwise_loss(const Matrix& predicted, const Matrix& truth);

// Nearest-rank percentile at 100 - anomaly_ratio: the element at 1-based
// rank ceil((100 - A) / 100 * N) of the sorted losses, clamped to [1, N].
double percentile_threshold(std::span<const double> losses, double anomaly_ratio);

// Strict comparison: loss > threshold.
std::vector<bool> flag(std::span<const double> losses, double threshold);

struct Metrics {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    // False when the ratio's denominator was zero; the value is then 0.
    bool precision_defined = true;
    bool recall_defined = true;
    bool f_score_defined = true;
    double anomaly_ratio = 0.0; // percent, as configured for the threshold

    std::size_t total() const noexcept { return tp + tn + fp + fn; }
    bool operator==(const Metrics&) const = default;
};

Metrics evaluate(const std::vector<bool>& predicted, const std::vector<bool>& truth);
Metrics from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);

// Per-record losses of a predictor over a windowed dataset. Each record's
// loss is the mean over every window whose target covers it; records no
// target covers are not scored.
struct ScoredRecords {
    std::vector<std::size_t> record_index; // ascending
    LossVector losses;
};

ScoredRecords score(const Predictor& predictor, const telemetry::WindowedDataset& data);

enum class ThresholdSource {
    Train,  // percentile of the supplied training losses
    Pooled, // percentile of training and evaluation losses together
};

ThresholdSource parse_threshold_source(const std::string& name);

struct DetectConfig {
    double anomaly_ratio = 20.0; // percent
    ThresholdSource threshold_source = ThresholdSource::Train;
};

struct DetectionResult {
    std::vector<std::size_t> record_index;
    LossVector losses;
    double threshold = 0.0;
    double anomaly_ratio = 0.0; // percent
    std::vector<bool> predicted;
    std::vector<bool> ground_truth; // empty when no labels were supplied
    std::optional<Metrics> metrics;
};

// labels, when given, are indexed by record position in the series the
// evaluation windows were cut from.
DetectionResult detect(const Predictor& predictor, const telemetry::WindowedDataset& eval_data,
                       std::span<const double> train_losses, const DetectConfig& config,
                       const std::vector<bool>* labels = nullptr);

// {accuracy, precision, recall, f_score, tp, tn, fp, fn, threshold, anomaly_ratio}
std::string render_metrics_json(const DetectionResult& result);
// index,loss,predicted,truth
std::string render_records_csv(const DetectionResult& result);

} // namespace uavguard::detect
