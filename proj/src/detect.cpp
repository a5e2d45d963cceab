#include "uavguard/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::detect {

LossVector pointwise_loss(const Matrix& predicted, const Matrix& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
        throw DimensionError("prediction is " + std::to_string(predicted.rows()) + "x" +
                             std::to_string(predicted.cols()) + " but truth is " +
                             std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
    }
    LossVector out(predicted.rows(), 0.0);
    if (predicted.cols() == 0) {
        return out;
    }
    for (std::size_t i = 0; i < predicted.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < predicted.cols(); ++j) {
            const double e = predicted(i, j) - truth(i, j);
            sum += e * e;
        }
        out[i] = sum / static_cast<double>(predicted.cols());
    }
    return out;
}

double percentile_threshold(std::span<const double> losses, double anomaly_ratio) {
    if (losses.empty()) {
        throw InputError("cannot take a percentile of an empty loss vector");
    }
    if (!(anomaly_ratio > 0.0 && anomaly_ratio < 100.0)) {
        throw ConfigError("anomaly ratio must lie in (0, 100)");
    }
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // Rank computed as (100 - A) * N / 100 so exact products stay exact.
    const double raw = std::ceil((100.0 - anomaly_ratio) * n / 100.0 - 1e-9);
    const auto rank = static_cast<std::size_t>(std::clamp(raw, 1.0, n));
    return sorted[rank - 1];
}

std::vector<bool> flag(std::span<const double> losses, double threshold) {
    std::vector<bool> out;
    out.reserve(losses.size());
    for (const double l : losses) out.push_back(l > threshold);
    return out;
}

Metrics evaluate(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("predicted and ground-truth labels differ in length (" +
                             std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()) +
                             ")");
    }
    if (predicted.empty()) {
        throw InputError("cannot evaluate empty label vectors");
    }
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && truth[i]) ++tp;
        else if (!predicted[i] && !truth[i]) ++tn;
        else if (predicted[i]) ++fp;
        else ++fn;
    }
    return from_counts(tp, tn, fp, fn);
}

Metrics from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
    Metrics m{.tp = tp, .tn = tn, .fp = fp, .fn = fn};
    if (m.total() == 0) {
        throw InputError("cannot evaluate empty label vectors");
    }
    const auto ratio = [](std::size_t num, std::size_t den) {
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(m.tp + m.tn, m.total());
    m.precision_defined = m.tp + m.fp > 0;
    m.precision = m.precision_defined ? ratio(m.tp, m.tp + m.fp) : 0.0;
    m.recall_defined = m.tp + m.fn > 0;
    m.recall = m.recall_defined ? ratio(m.tp, m.tp + m.fn) : 0.0;
    m.f_score_defined = m.precision + m.recall > 0.0;
    m.f_score = m.f_score_defined ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

ScoredRecords score(const Predictor& predictor, const telemetry::WindowedDataset& data) {
    if (predictor.input_rows() != data.spec.seq_len || predictor.output_rows() != data.target_rows() ||
        predictor.feature_count() != data.feature_count) {
        throw DimensionError("predictor expects " + std::to_string(predictor.input_rows()) + "x" +
                             std::to_string(predictor.feature_count()) + " -> " +
                             std::to_string(predictor.output_rows()) + " rows, data provides " +
                             std::to_string(data.spec.seq_len) + "x" +
                             std::to_string(data.feature_count) + " -> " +
                             std::to_string(data.target_rows()) + " rows");
    }
    // Ordered map keeps record indices ascending.
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& win : data.windows) {
        const auto losses = pointwise_loss(predictor.predict(win.input), win.target);
        for (std::size_t r = 0; r < losses.size(); ++r) {
            auto& slot = acc[win.target_start + r];
            slot.first += losses[r];
            slot.second += 1;
        }
    }
    ScoredRecords out;
    out.record_index.reserve(acc.size());
    out.losses.reserve(acc.size());
    for (const auto& [index, sum] : acc) {
        out.record_index.push_back(index);
        out.losses.push_back(sum.first / static_cast<double>(sum.second));
    }
    return out;
}

ThresholdSource parse_threshold_source(const std::string& name) {
    if (name == "train") return ThresholdSource::Train;
    if (name == "pooled") return ThresholdSource::Pooled;
    throw ConfigError("unknown threshold source '" + name + "'");
}

DetectionResult detect(const Predictor& predictor, const telemetry::WindowedDataset& eval_data,
                       std::span<const double> train_losses, const DetectConfig& config,
                       const std::vector<bool>* labels) {
    if (train_losses.empty()) {
        throw InputError("detection needs a non-empty training loss vector");
    }
    auto scored = score(predictor, eval_data);

    DetectionResult result;
    result.anomaly_ratio = config.anomaly_ratio;
    if (config.threshold_source == ThresholdSource::Train) {
        result.threshold = percentile_threshold(train_losses, config.anomaly_ratio);
    } else {
        std::vector<double> pooled(train_losses.begin(), train_losses.end());
        pooled.insert(pooled.end(), scored.losses.begin(), scored.losses.end());
        result.threshold = percentile_threshold(pooled, config.anomaly_ratio);
    }
    result.predicted = flag(scored.losses, result.threshold);
    result.record_index = std::move(scored.record_index);
    result.losses = std::move(scored.losses);

    if (labels) {
        for (const auto i : result.record_index) {
            if (i >= labels->size()) {
                throw DimensionError("label vector has " + std::to_string(labels->size()) +
                                     " entries but record " + std::to_string(i) + " was scored");
            }
            result.ground_truth.push_back((*labels)[i]);
        }
        result.metrics = evaluate(result.predicted, result.ground_truth);
        result.metrics->anomaly_ratio = config.anomaly_ratio;
    }
    return result;
}

std::string render_metrics_json(const DetectionResult& result) {
    nlohmann::ordered_json j;
    if (result.metrics) {
        const auto& m = *result.metrics;
        j["accuracy"] = m.accuracy;
        j["precision"] = m.precision;
        j["recall"] = m.recall;
        j["f_score"] = m.f_score;
        j["tp"] = m.tp;
        j["tn"] = m.tn;
        j["fp"] = m.fp;
        j["fn"] = m.fn;
    } else {
        for (const char* key : {"accuracy", "precision", "recall", "f_score", "tp", "tn", "fp", "fn"}) {
            j[key] = nullptr;
        }
    }
    j["threshold"] = result.threshold;
    j["anomaly_ratio"] = result.anomaly_ratio;
    auto undefined = nlohmann::ordered_json::array();
    if (result.metrics) {
        if (!result.metrics->precision_defined) undefined.push_back("precision");
        if (!result.metrics->recall_defined) undefined.push_back("recall");
        if (!result.metrics->f_score_defined) undefined.push_back("f_score");
    }
    j["undefined"] = undefined;
    j["evaluated_records"] = result.losses.size();
    return j.dump(2) + "\n";
}

std::string render_records_csv(const DetectionResult& result) {
    std::string out = "index,loss,predicted,truth\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
        out += std::to_string(result.record_index[i]) + "," + text::format_double(result.losses[i]) +
               "," + (result.predicted[i] ? "1" : "0") + ",";
        if (!result.ground_truth.empty()) out += result.ground_truth[i] ? "1" : "0";
        out += "\n";
    }
    return out;
}

} // namespace uavguard::detect
