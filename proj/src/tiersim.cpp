#include "uavguard/tiersim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::tiersim {

namespace {

constexpr std::array<const char*, 3> kTierNames = {"onboard", "edge", "cloud"};
constexpr std::array<const char*, 4> kTaskNames = {"inference", "detection", "forecasting", "finetuning"};

nlohmann::ordered_json metrics_json(const detect::Metrics& m) {
    nlohmann::ordered_json j;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f_score"] = m.f_score;
    j["tp"] = m.tp;
    j["tn"] = m.tn;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    return j;
}

} // namespace

std::string tier_name(TierName tier) { return kTierNames[static_cast<std::size_t>(tier)]; }

TierName parse_tier(const std::string& name) {
    for (std::size_t i = 0; i < kTierNames.size(); ++i) {
        if (name == kTierNames[i]) return static_cast<TierName>(i);
    }
    throw ConfigError("unknown tier '" + name + "' (expected onboard, edge or cloud)");
}

std::string task_name(Task task) { return kTaskNames[static_cast<std::size_t>(task)]; }

Task parse_task(const std::string& name) {
    for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
        if (name == kTaskNames[i]) return static_cast<Task>(i);
    }
    throw ConfigError("unknown task '" + name + "'");
}

double Deployment::uplink_latency_s(TierName name) const {
    double ms = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(name); ++i) ms += tiers[i].link_latency_ms;
    return ms / 1000.0;
}

Deployment default_deployment() {
    return {{{
        {TierName::Onboard, 4.0, 5.0, "small"},
        {TierName::Edge, 1.5, 20.0, "medium"},
        {TierName::Cloud, 1.0, 0.0, "large"},
    }}};
}

void validate(const Deployment& d) {
    for (const auto& t : d.tiers) {
        if (!(t.compute_factor > 0.0)) throw ConfigError(tier_name(t.name) + " compute factor must be positive");
        if (!(t.link_latency_ms >= 0.0)) throw ConfigError(tier_name(t.name) + " link latency must be non-negative");
    }
    const auto& f = d.tiers;
    if (f[2].compute_factor > f[1].compute_factor || f[1].compute_factor > f[0].compute_factor) {
        throw ConfigError("compute factors must satisfy cloud <= edge <= onboard");
    }
}

PlacementPolicy default_policy() {
    return {
        {Task::Inference, TierName::Onboard},
        {Task::Detection, TierName::Edge},
        {Task::Forecasting, TierName::Cloud},
        {Task::Finetuning, TierName::Cloud},
    };
}

TierName place(Task task, const PlacementPolicy& policy) {
    const auto it = policy.find(task);
    if (it == policy.end()) throw ConfigError("placement policy has no tier for " + task_name(task));
    return it->second;
}

const LatencyTable& reference_latency_table() {
    static const LatencyTable table = {{4, 61.92}, {8, 34.30}, {16, 18.22}, {32, 12.72}, {64, 10.90}, {128, 9.08}};
    return table;
}

LatencyFit fit_latency_model(const LatencyTable& table) {
    if (table.size() < 2) throw FitError("latency fit needs at least two points");
    double sx = 0, sy = 0;
    for (const auto& [b, t] : table) {
        if (!(b > 0.0)) throw FitError("batch sizes must be positive");
        if (!(t > 0.0)) throw FitError("elapsed times must be positive");
        sx += 1.0 / b;
        sy += t;
    }
    const double n = static_cast<double>(table.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (const auto& [b, t] : table) {
        const double dx = 1.0 / b - mx;
        sxx += dx * dx;
        sxy += dx * (t - my);
    }
    if (sxx <= 1e-300) throw FitError("latency fit is singular: all batch sizes are equal");

    LatencyFit fit;
    fit.b_prime = sxy / sxx;
    fit.a_prime = my - fit.b_prime * mx;
    for (const auto& [b, t] : table) {
        const double r = (fit.predict(b) - t) / t;
        fit.relative_residuals.push_back(r);
        fit.max_relative_residual = std::max(fit.max_relative_residual, std::abs(r));
    }
    return fit;
}

LatencyModel from_fit(const LatencyFit& fit, std::size_t records, double uplink_latency_s, double c) {
    if (records == 0) throw ConfigError("latency model needs a positive record count");
    LatencyModel m;
    m.a = std::max(0.0, fit.a_prime);
    m.b = std::max(0.0, fit.b_prime / static_cast<double>(records) - uplink_latency_s);
    m.c = std::max(0.0, c);
    return m;
}

double simulated_elapsed(std::size_t records, std::size_t batch_size, const LatencyModel& model,
                         double compute_factor, double uplink_latency_s) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    double clock = model.a;
    for (std::size_t start = 0; start < records; start += batch_size) {
        const std::size_t n = std::min(batch_size, records - start);
        clock += model.b + model.c * static_cast<double>(n) * compute_factor + uplink_latency_s;
    }
    return clock;
}

std::vector<std::pair<std::size_t, std::size_t>> flagged_ranges(const std::vector<std::size_t>& record_index,
                                                                 const std::vector<bool>& predicted) {
    if (record_index.size() != predicted.size()) {
        throw DimensionError("record index and flags differ in length");
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!predicted[i]) continue;
        const std::size_t r = record_index[i];
        if (!out.empty() && out.back().second + 1 == r && i > 0 && predicted[i - 1]) {
            out.back().second = r;
        } else {
            out.emplace_back(r, r);
        }
    }
    return out;
}

AnomalyReport emit_report(const detect::DetectionResult& detection, const ReportMeta& meta) {
    AnomalyReport r;
    r.mission_id = meta.mission_id;
    r.tier = meta.tier;
    r.ranges = flagged_ranges(detection.record_index, detection.predicted);
    r.threshold = detection.threshold;
    r.metrics = detection.metrics;
    r.timestamp = meta.timestamp;
    return r;
}

std::string render_report(const AnomalyReport& report) {
    nlohmann::ordered_json j;
    j["mission_id"] = report.mission_id;
    j["tier"] = tier_name(report.tier);
    j["timestamp"] = report.timestamp;
    j["clock_s"] = report.clock_s;
    j["threshold"] = report.threshold;
    auto ranges = nlohmann::ordered_json::array();
    for (const auto& [first, last] : report.ranges) ranges.push_back({first, last});
    j["ranges"] = ranges;
    j["metrics"] = report.metrics ? metrics_json(*report.metrics) : nlohmann::ordered_json(nullptr);
    return j.dump() + "\n";
}

StreamResult simulate_stream(const Matrix& features, const std::vector<std::uint64_t>& timestamps,
                             const std::vector<bool>* labels, const Predictor& predictor,
                             const Deployment& deployment, const LatencyModel& model, const StreamConfig& config) {
    if (config.batch_size == 0) throw ConfigError("batch size must be at least 1");
    validate(deployment);
    const std::size_t n = features.rows();
    const std::size_t len = predictor.input_rows();
    if (predictor.output_rows() != len || predictor.feature_count() != features.cols()) {
        throw DimensionError("streaming detection needs a reconstruction predictor over " +
                             std::to_string(features.cols()) + " features");
    }
    if (!timestamps.empty() && timestamps.size() != n) throw DimensionError("timestamps do not match records");
    if (labels && labels->size() != n) throw DimensionError("labels do not match records");

    const Tier& tier = deployment.tier(config.tier);
    const double uplink = deployment.uplink_latency_s(config.tier);

    StreamResult result;
    auto& stats = result.stats;
    stats.batch_size = config.batch_size;
    stats.records = n;

    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::vector<std::size_t> batch_index;
    std::vector<bool> batch_flags;
    std::size_t scored_upto = 0;
    double clock = model.a;
    Matrix window(len, features.cols());

    for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t end = std::min(n, start + config.batch_size);
        clock += model.b + model.c * static_cast<double>(end - start) * tier.compute_factor + uplink;
        ++stats.batches;

        batch_index.clear();
        batch_flags.clear();
        bool any = false;
        while (len > 0 && scored_upto + len <= end) {
            for (std::size_t r = 0; r < len; ++r) {
                std::copy_n(features.row(scored_upto + r).begin(), features.cols(), window.row(r).begin());
            }
            const auto losses = detect::pointwise_loss(predictor.predict(window), window);
            for (std::size_t r = 0; r < len; ++r) {
                const std::size_t idx = scored_upto + r;
                const bool flagged = losses[r] > config.threshold;
                batch_index.push_back(idx);
                batch_flags.push_back(flagged);
                any = any || flagged;
                if (labels) {
                    const bool truth = (*labels)[idx];
                    if (flagged && truth) ++tp;
                    else if (!flagged && !truth) ++tn;
                    else if (flagged) ++fp;
                    else ++fn;
                }
            }
            scored_upto += len;
            stats.scored_records += len;
        }
        if (any) {
            AnomalyReport r;
            r.mission_id = config.mission_id;
            r.tier = config.tier;
            r.ranges = flagged_ranges(batch_index, batch_flags);
            r.threshold = config.threshold;
            if (labels) {
                r.metrics = detect::from_counts(tp, tn, fp, fn);
                r.metrics->anomaly_ratio = config.anomaly_ratio;
            }
            r.timestamp = timestamps.empty() ? end - 1 : timestamps[end - 1];
            r.clock_s = clock;
            result.reports.push_back(std::move(r));
        }
    }
    stats.elapsed_s = clock;
    if (labels && stats.scored_records > 0) {
        stats.metrics = detect::from_counts(tp, tn, fp, fn);
        stats.metrics->anomaly_ratio = config.anomaly_ratio;
    }
    return result;
}

std::vector<StreamStats> run_batch_experiment(const Matrix& features, const std::vector<std::uint64_t>& timestamps,
                                              const std::vector<bool>* labels, const Predictor& predictor,
                                              const Deployment& deployment, const LatencyModel& model,
                                              const StreamConfig& config, const std::vector<std::size_t>& batch_sizes) {
    if (batch_sizes.empty()) throw ConfigError("batch size list is empty");
    std::vector<StreamStats> rows;
    for (std::size_t b : batch_sizes) {
        auto c = config;
        c.batch_size = b;
        rows.push_back(simulate_stream(features, timestamps, labels, predictor, deployment, model, c).stats);
    }
    return rows;
}

std::string render_batch_csv(const std::vector<StreamStats>& rows) {
    std::ostringstream out;
    out << "batch_size,elapsed_s,accuracy,precision,recall,f_score\n";
    for (const auto& r : rows) {
        out << r.batch_size << ',' << text::format_double(r.elapsed_s);
        if (r.metrics) {
            out << ',' << text::format_double(r.metrics->accuracy) << ',' << text::format_double(r.metrics->precision)
                << ',' << text::format_double(r.metrics->recall) << ',' << text::format_double(r.metrics->f_score);
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
    return out.str();
}

} // namespace uavguard::tiersim
