#include "uavguard/pipeline.hpp"

#include <sstream>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::pipeline {

namespace {

constexpr std::uint64_t kInjectSalt = 0x2545f4914f6cdd1dULL;

telemetry::TelemetrySeries slice(const telemetry::TelemetrySeries& s, std::size_t first, std::size_t count) {
    telemetry::TelemetrySeries out;
    out.feature_names = s.feature_names;
    out.records.assign(s.records.begin() + static_cast<std::ptrdiff_t>(first),
                       s.records.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

Matrix scaled(const telemetry::TelemetrySeries& s, const telemetry::NormStats& stats) {
    return telemetry::normalized_matrix(s, stats);
}

struct InjectedSplits {
    telemetry::SplitSizes sizes;
    Matrix train;
    Matrix test;
    std::vector<bool> test_labels;
    std::vector<std::uint64_t> test_timestamps;
};

InjectedSplits split_injected(const TrainedDetector& d, const telemetry::TelemetrySeries& series,
                              const std::vector<bool>* labels, const config::RunConfig& config) {
    if (labels && labels->size() != series.size()) throw DimensionError("labels do not match records");
    InjectedSplits s;
    s.sizes = telemetry::split_sizes(series.size(), config.split);
    const std::size_t offset = s.sizes.train + s.sizes.val;
    auto named = series;
    named.feature_names = d.stats.feature_names;
    s.train = scaled(slice(named, 0, s.sizes.train), d.stats);
    s.test = scaled(slice(named, offset, s.sizes.test), d.stats);
    if (labels) s.test_labels.assign(labels->begin() + static_cast<std::ptrdiff_t>(offset), labels->end());
    for (std::size_t i = offset; i < series.size(); ++i) {
        s.test_timestamps.push_back(static_cast<std::uint64_t>(series.records[i].timestamp));
    }
    return s;
}

telemetry::WindowSpec blocks(std::size_t len) { return {.seq_len = len, .stride = len}; }

} // namespace

telemetry::TelemetrySeries load_clean_series(const config::RunConfig& config) {
    telemetry::TelemetrySeries series;
    if (config.data.empty()) {
        series = telemetry::generate_mission(config.synthetic, config.seed);
    } else {
        series = telemetry::read_labeled_csv(config.data).series;
    }
    if (telemetry::count_missing(series) > 0) series = telemetry::impute_missing(series, config.impute);
    series.feature_names = config.features;
    return series;
}

inject::LabeledSeries apply_injection(const telemetry::TelemetrySeries& clean, const config::RunConfig& config) {
    const std::uint64_t seed = config.seed ^ kInjectSalt;
    switch (config.scheme) {
    case config::InjectScheme::EveryNth: return inject::inject_every_nth(clean, config.inject_n, config.perturb);
    case config::InjectScheme::Random:
        return inject::inject_random(clean, config.inject_fraction, config.perturb, seed, config.random_mode);
    case config::InjectScheme::Variance:
        return inject::inject_variance(clean, config.perturb.feature, config.variance_targets.front(),
                                       inject::every_nth_indices(clean.size(), config.inject_n));
    case config::InjectScheme::Poisson: return inject::inject_poisson(clean, config.inject_lambda, config.perturb, seed);
    }
    throw ConfigError("unknown injection scheme");
}

TrainedDetector train_detector(const telemetry::TelemetrySeries& clean, const config::RunConfig& config) {
    const auto parts = telemetry::split(clean, config.split);
    auto stats = config.norm_source == config::NormSource::Train ? telemetry::fit_normalize(parts.train)
                                                                 : telemetry::fit_normalize(clean);
    auto mc = config.model;
    mc.horizon = mc.seq_len;
    const telemetry::WindowSpec spec{.seq_len = mc.seq_len, .stride = 1};
    const auto train_ds = telemetry::window(scaled(parts.train, stats), spec);
    const auto val_ds = telemetry::window(scaled(parts.val, stats), spec);
    auto model = forecast::train(forecast::init_predictor(mc, clean.feature_count()), train_ds, val_ds);
    return {std::move(model), std::move(stats)};
}

DetectionRun run_detection(const TrainedDetector& detector, const inject::LabeledSeries& injected,
                           const config::RunConfig& config) {
    return run_detection(detector, injected.series, &injected.labels, config);
}

DetectionRun run_detection(const TrainedDetector& detector, const telemetry::TelemetrySeries& series,
                           const std::vector<bool>* labels, const config::RunConfig& config) {
    const std::size_t len = detector.model.input_rows();
    const auto s = split_injected(detector, series, labels, config);
    const auto train_losses = detect::score(detector.model, telemetry::window(s.train, blocks(len))).losses;

    DetectionRun run;
    run.test_offset = s.sizes.train + s.sizes.val;
    run.result = detect::detect(detector.model, telemetry::window(s.test, blocks(len)), train_losses, config.detect,
                                labels ? &s.test_labels : nullptr);
    for (auto& i : run.result.record_index) i += run.test_offset;
    run.report = tiersim::emit_report(run.result, {.mission_id = config.mission_id,
                                                   .tier = tiersim::place(tiersim::Task::Detection, config.policy),
                                                   .timestamp = s.test_timestamps.back()});
    return run;
}

ForecastRun run_forecast(const Matrix& train, const Matrix& val, const Matrix& test,
                         const forecast::PredictorConfig& model) {
    const telemetry::WindowSpec spec{.seq_len = model.seq_len, .stride = 1, .mode = telemetry::WindowMode::Forecast,
                                     .horizon = model.horizon};
    const auto train_ds = telemetry::window(train, spec);
    const auto val_ds = telemetry::window(val, spec);
    const auto test_ds = telemetry::window(test, spec);
    ForecastRun run{forecast::train(forecast::init_predictor(model, train.cols()), train_ds, val_ds), {}, {}};
    run.model_report = forecast::evaluate_forecast(run.model, test_ds);
    run.persistence_report = forecast::evaluate_forecast(
        forecast::PersistencePredictor(model.seq_len, model.horizon, train.cols()), test_ds);
    return run;
}

ForecastRun run_forecast(const telemetry::TelemetrySeries& clean, const config::RunConfig& config,
                         telemetry::NormStats* stats_out) {
    const auto parts = telemetry::split(clean, config.split);
    const auto stats = config.norm_source == config::NormSource::Train ? telemetry::fit_normalize(parts.train)
                                                                       : telemetry::fit_normalize(clean);
    if (stats_out) *stats_out = stats;
    return run_forecast(scaled(parts.train, stats), scaled(parts.val, stats), scaled(parts.test, stats), config.model);
}

std::string render_forecast(const ForecastRun& run) {
    std::string out = "[model]\n" + forecast::render_eval_report(run.model_report) + "[persistence]\n" +
                      forecast::render_eval_report(run.persistence_report);
    const double p = run.persistence_report.test_mse;
    out += "mse_ratio=" + (p > 0.0 ? text::format_double(run.model_report.test_mse / p) : std::string("nan")) + "\n";
    return out;
}

namespace {

struct StreamSetup {
    InjectedSplits splits;
    tiersim::LatencyFit fit;
    tiersim::LatencyModel model;
    tiersim::StreamConfig stream;
};

StreamSetup stream_setup(const TrainedDetector& detector, const telemetry::TelemetrySeries& series,
                         const std::vector<bool>* labels, const config::RunConfig& config) {
    const auto offline = run_detection(detector, series, labels, config);
    StreamSetup s{split_injected(detector, series, labels, config), {}, {}, {}};
    const auto tier = tiersim::place(tiersim::Task::Detection, config.policy);
    s.fit = tiersim::fit_latency_model(config.latency_table);
    s.model = tiersim::from_fit(s.fit, s.splits.test.rows(), config.deployment.uplink_latency_s(tier),
                                config.per_record_cost_s);
    s.stream = {.batch_size = config.stream_batch,
                .threshold = offline.result.threshold,
                .anomaly_ratio = config.detect.anomaly_ratio,
                .tier = tier,
                .mission_id = config.mission_id};
    return s;
}

} // namespace

tiersim::StreamResult run_stream(const TrainedDetector& detector, const telemetry::TelemetrySeries& series,
                                 const std::vector<bool>* labels, const config::RunConfig& config) {
    const auto s = stream_setup(detector, series, labels, config);
    return tiersim::simulate_stream(s.splits.test, s.splits.test_timestamps, labels ? &s.splits.test_labels : nullptr,
                                    detector.model, config.deployment, s.model, s.stream);
}

BatchSweep run_batch_sweep(const TrainedDetector& detector, const inject::LabeledSeries& injected,
                           const config::RunConfig& config) {
    const auto s = stream_setup(detector, injected.series, &injected.labels, config);
    BatchSweep sweep{s.fit, s.model, {}};
    sweep.rows = tiersim::run_batch_experiment(s.splits.test, s.splits.test_timestamps, &s.splits.test_labels,
                                               detector.model, config.deployment, s.model, s.stream, config.batches);
    return sweep;
}

std::string render_latency_fit(const tiersim::LatencyFit& fit, const tiersim::LatencyModel& model) {
    std::ostringstream out;
    out << "a_prime=" << text::format_double(fit.a_prime) << '\n'
        << "b_prime=" << text::format_double(fit.b_prime) << '\n'
        << "max_relative_residual=" << text::format_double(fit.max_relative_residual) << '\n';
    for (double r : fit.relative_residuals) out << "relative_residual=" << text::format_double(r) << '\n';
    out << "model_a=" << text::format_double(model.a) << '\n'
        << "model_b=" << text::format_double(model.b) << '\n'
        << "model_c=" << text::format_double(model.c) << '\n';
    return out.str();
}

std::string run_variance_sweep(const TrainedDetector& detector, const telemetry::TelemetrySeries& clean,
                               const config::RunConfig& config) {
    const auto indices = inject::every_nth_indices(clean.size(), config.inject_n);
    std::string out = "target_value,accuracy,precision,recall,f_score\n";
    for (double target : config.variance_targets) {
        const auto injected = inject::inject_variance(clean, config.perturb.feature, target, indices);
        const auto run = run_detection(detector, injected, config);
        const auto& m = *run.result.metrics;
        out += text::format_double(target) + "," + text::format_double(m.accuracy) + "," +
               text::format_double(m.precision) + "," + text::format_double(m.recall) + "," +
               text::format_double(m.f_score) + "\n";
    }
    return out;
}

Artifacts experiment_detect(const config::RunConfig& config) {
    const auto clean = load_clean_series(config);
    const auto injected = apply_injection(clean, config);
    const auto detector = train_detector(clean, config);
    const auto run = run_detection(detector, injected, config);
    return {
        {"injected.csv", telemetry::to_csv(injected.series, &injected.labels)},
        {"injection.json", inject::render_meta(injected.meta)},
        {"norm.csv", telemetry::render_norm_stats(detector.stats)},
        {"model.txt", forecast::render_checkpoint(detector.model)},
        {"metrics.json", detect::render_metrics_json(run.result)},
        {"records.csv", detect::render_records_csv(run.result)},
        {"reports.jsonl", tiersim::render_report(run.report)},
    };
}

Artifacts experiment_variance_sweep(const config::RunConfig& config) {
    const auto clean = load_clean_series(config);
    const auto detector = train_detector(clean, config);
    return {
        {"norm.csv", telemetry::render_norm_stats(detector.stats)},
        {"model.txt", forecast::render_checkpoint(detector.model)},
        {"variance.csv", run_variance_sweep(detector, clean, config)},
    };
}

Artifacts experiment_batch_sweep(const config::RunConfig& config) {
    const auto clean = load_clean_series(config);
    const auto injected = apply_injection(clean, config);
    const auto detector = train_detector(clean, config);
    const auto sweep = run_batch_sweep(detector, injected, config);
    return {
        {"norm.csv", telemetry::render_norm_stats(detector.stats)},
        {"model.txt", forecast::render_checkpoint(detector.model)},
        {"latency_fit.txt", render_latency_fit(sweep.fit, sweep.model)},
        {"batch.csv", tiersim::render_batch_csv(sweep.rows)},
    };
}

} // namespace uavguard::pipeline
