#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "uavguard/config.hpp"
#include "uavguard/detect.hpp"
#include "uavguard/forecast.hpp"
#include "uavguard/inject.hpp"
#include "uavguard/telemetry.hpp"
#include "uavguard/tiersim.hpp"

// Experiment recipes shared by the command-line tool and the acceptance suite.
namespace uavguard::pipeline {

// Named output files in write order.
using Artifacts = std::vector<std::pair<std::string, std::string>>;

// Reads config.data (or generates a synthetic mission from config.seed),
// imputes missing cells and restricts modeling to config.features.
telemetry::TelemetrySeries load_clean_series(const config::RunConfig& config);

// Applies the configured injection scheme. Variance injection touches the
// every-nth records with the first variance target.
inject::LabeledSeries apply_injection(const telemetry::TelemetrySeries& clean, const config::RunConfig& config);

struct TrainedDetector {
    forecast::MlpPredictor model;
    telemetry::NormStats stats;
};

// Reconstruction model (horizon = seq_len) trained with stride-1 windows on
// the clean train split and validated on the clean val split.
TrainedDetector train_detector(const telemetry::TelemetrySeries& clean, const config::RunConfig& config);

struct DetectionRun {
    detect::DetectionResult result; // record_index refers to the full series
    tiersim::AnomalyReport report;
    std::size_t test_offset = 0;
};

// Threshold from losses on the injected train split, detection on the
// injected test split; both use non-overlapping windows.
DetectionRun run_detection(const TrainedDetector& detector, const inject::LabeledSeries& injected,
                           const config::RunConfig& config);
// labels may be null; metrics are then absent.
DetectionRun run_detection(const TrainedDetector& detector, const telemetry::TelemetrySeries& series,
                           const std::vector<bool>* labels, const config::RunConfig& config);

struct ForecastRun {
    forecast::MlpPredictor model;
    forecast::EvalReport model_report;
    forecast::EvalReport persistence_report;
};

// Forecast-mode windows (stride 1) over already-scaled matrices.
ForecastRun run_forecast(const Matrix& train, const Matrix& val, const Matrix& test,
                         const forecast::PredictorConfig& model);
// Splits and normalizes a series, then runs run_forecast.
ForecastRun run_forecast(const telemetry::TelemetrySeries& clean, const config::RunConfig& config,
                         telemetry::NormStats* stats_out = nullptr);
std::string render_forecast(const ForecastRun& run);

// Streams the test split at config.stream_batch on the detection tier, with
// the offline threshold and a latency model fitted to config.latency_table.
tiersim::StreamResult run_stream(const TrainedDetector& detector, const telemetry::TelemetrySeries& series,
                                 const std::vector<bool>* labels, const config::RunConfig& config);

struct BatchSweep {
    tiersim::LatencyFit fit;
    tiersim::LatencyModel model;
    std::vector<tiersim::StreamStats> rows;
};

// Streams the injected test split through the detector at each batch size on
// the tier the policy assigns to detection.
BatchSweep run_batch_sweep(const TrainedDetector& detector, const inject::LabeledSeries& injected,
                           const config::RunConfig& config);
std::string render_latency_fit(const tiersim::LatencyFit& fit, const tiersim::LatencyModel& model);

// Per-target detection rows: target_value,accuracy,precision,recall,f_score
std::string run_variance_sweep(const TrainedDetector& detector, const telemetry::TelemetrySeries& clean,
                               const config::RunConfig& config);

// ---- recipes ----------------------------------------------------------------

Artifacts experiment_detect(const config::RunConfig& config); // nth / poisson / random per config
Artifacts experiment_variance_sweep(const config::RunConfig& config);
Artifacts experiment_batch_sweep(const config::RunConfig& config);

} // namespace uavguard::pipeline
