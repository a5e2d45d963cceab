#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uavguard/detect.hpp"
#include "uavguard/matrix.hpp"
#include "uavguard/predictor.hpp"

namespace uavguard::tiersim {

enum class TierName { Onboard, Edge, Cloud };

std::string tier_name(TierName tier);
TierName parse_tier(const std::string& name);

struct Tier {
    TierName name = TierName::Onboard;
    double compute_factor = 1.0; // relative per-record cost
    double link_latency_ms = 0.0; // to the next tier up
    std::string model_class;
};

// The three tiers in onboard, edge, cloud order.
struct Deployment {
    std::array<Tier, 3> tiers;

    const Tier& tier(TierName name) const { return tiers[static_cast<std::size_t>(name)]; }
    Tier& tier(TierName name) { return tiers[static_cast<std::size_t>(name)]; }
    // Data is produced onboard, so a batch handled at `name` crosses every
    // link below it.
    double uplink_latency_s(TierName name) const;
};

// onboard 4 / 5 ms / small, edge 1.5 / 20 ms / medium, cloud 1 / 0 ms / large.
Deployment default_deployment();
// Throws ConfigError unless factors are positive and non-increasing upward
// and latencies are non-negative.
void validate(const Deployment& deployment);

enum class Task { Inference, Detection, Forecasting, Finetuning };

std::string task_name(Task task);
Task parse_task(const std::string& name);

using PlacementPolicy = std::map<Task, TierName>;

PlacementPolicy default_policy();
TierName place(Task task, const PlacementPolicy& policy);

// ---- latency --------------------------------------------------------------

// Per run, per batch and per record costs, in seconds.
struct LatencyModel {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

struct LatencyFit {
    double a_prime = 0.0;
    double b_prime = 0.0;
    std::vector<double> relative_residuals; // (fitted - observed) / observed, input order
    double max_relative_residual = 0.0;

    double predict(double batch_size) const { return a_prime + b_prime / batch_size; }
};

using LatencyTable = std::vector<std::pair<double, double>>; // (batch size, elapsed seconds)

// Measured batch-size latencies (average elapsed seconds); default latency_table.
const LatencyTable& reference_latency_table();

// Ordinary least squares for elapsed = a' + b' / B.
LatencyFit fit_latency_model(const LatencyTable& table);

// Model whose simulated elapsed time for N records reproduces the fitted
// curve: a = a', and each batch's overhead plus uplink latency equals b' / N.
LatencyModel from_fit(const LatencyFit& fit, std::size_t records, double uplink_latency_s, double c = 0.0);

// Closed-form logical clock: a + sum over batches of
// (b + c * |batch| * compute_factor + uplink latency).
double simulated_elapsed(std::size_t records, std::size_t batch_size, const LatencyModel& model,
                         double compute_factor, double uplink_latency_s);

// ---- streaming ------------------------------------------------------------

struct AnomalyReport {
    std::string mission_id;
    TierName tier = TierName::Edge;
    std::vector<std::pair<std::size_t, std::size_t>> ranges; // inclusive record indices
    double threshold = 0.0;
    std::optional<detect::Metrics> metrics;
    std::uint64_t timestamp = 0; // data time of the last record covered
    double clock_s = 0.0;        // simulated time at emission
};

// Inclusive runs of consecutive flagged record indices, sorted.
std::vector<std::pair<std::size_t, std::size_t>> flagged_ranges(const std::vector<std::size_t>& record_index,
                                                                 const std::vector<bool>& predicted);

struct ReportMeta {
    std::string mission_id = "mission";
    TierName tier = TierName::Edge;
    std::uint64_t timestamp = 0;
};

AnomalyReport emit_report(const detect::DetectionResult& detection, const ReportMeta& meta);

// One JSON object per line.
std::string render_report(const AnomalyReport& report);

struct StreamStats {
    std::size_t batch_size = 0;
    std::size_t records = 0;
    std::size_t batches = 0;
    std::size_t scored_records = 0;
    double elapsed_s = 0.0;
    std::optional<detect::Metrics> metrics;
};

struct StreamConfig {
    std::size_t batch_size = 32;
    double threshold = 0.0;     // precomputed from training losses
    double anomaly_ratio = 20.0; // recorded in metrics
    TierName tier = TierName::Edge;
    std::string mission_id = "mission";
};

struct StreamResult {
    StreamStats stats;
    std::vector<AnomalyReport> reports; // one per batch that flagged something
};

// Records arrive in order and are grouped into batches. The detector keeps a
// rolling buffer and scores each complete non-overlapping window of
// predictor.input_rows() records as soon as it has arrived, so losses and
// metrics do not depend on the batch size. `timestamps` and `labels` are
// optional (empty / null).
StreamResult simulate_stream(const Matrix& features, const std::vector<std::uint64_t>& timestamps,
                             const std::vector<bool>* labels, const Predictor& predictor,
                             const Deployment& deployment, const LatencyModel& model, const StreamConfig& config);

std::vector<StreamStats> run_batch_experiment(const Matrix& features, const std::vector<std::uint64_t>& timestamps,
                                              const std::vector<bool>* labels, const Predictor& predictor,
                                              const Deployment& deployment, const LatencyModel& model,
                                              const StreamConfig& config, const std::vector<std::size_t>& batch_sizes);

// batch_size,elapsed_s,accuracy,precision,recall,f_score
std::string render_batch_csv(const std::vector<StreamStats>& rows);

} // namespace uavguard::tiersim
