// uavguard: command-line entry point for ingestion, injection, detection,
// forecasting, packet datasets and tier simulation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uavguard/config.hpp"
#include "uavguard/error.hpp"
#include "uavguard/packetset.hpp"
#include "uavguard/pipeline.hpp"
#include "uavguard/text.hpp"

namespace fs = std::filesystem;
using namespace uavguard;
using pipeline::Artifacts;

namespace {

struct Run {
    config::RunConfig cfg;
    std::vector<std::string> inputs; // files whose hashes go into the manifest
};

using Handler = std::function<Artifacts(Run&)>;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& require(const std::string& value, const std::string& key) {
    if (value.empty()) throw ConfigError("command needs --" + key);
    return value;
}

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

pipeline::TrainedDetector load_detector(Run& run) {
    const auto& model = require(run.cfg.model_path, "model");
    const auto& norm = require(run.cfg.norm_path, "norm");
    run.inputs.push_back(model);
    run.inputs.push_back(norm);
    return {forecast::load_checkpoint(model), telemetry::parse_norm_stats(read_file(norm))};
}

std::string render_history(const forecast::MlpPredictor& m) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < m.history().size(); ++e) {
        out += std::to_string(e + 1) + "," + text::format_double(m.history()[e].train) + "," +
               text::format_double(m.history()[e].val) + "\n";
    }
    return out;
}

void track_data(Run& run) {
    if (!run.cfg.data.empty()) run.inputs.push_back(run.cfg.data);
}

// ---- command handlers -------------------------------------------------------

Artifacts cmd_generate(Run& run) {
    return {{"mission.csv", telemetry::to_csv(telemetry::generate_mission(run.cfg.synthetic, run.cfg.seed))}};
}

Artifacts cmd_ingest(Run& run) {
    track_data(run);
    telemetry::TelemetrySeries raw = run.cfg.data.empty()
                                         ? telemetry::generate_mission(run.cfg.synthetic, run.cfg.seed)
                                         : telemetry::read_labeled_csv(run.cfg.data).series;
    const auto missing = telemetry::count_missing(raw);
    const auto clean = pipeline::load_clean_series(run.cfg);
    const auto parts = telemetry::split(clean, run.cfg.split);
    const auto stats = run.cfg.norm_source == config::NormSource::Train ? telemetry::fit_normalize(parts.train)
                                                                        : telemetry::fit_normalize(clean);
    nlohmann::ordered_json summary;
    summary["records"] = clean.size();
    summary["missing_cells_imputed"] = missing;
    summary["train_records"] = parts.train.size();
    summary["val_records"] = parts.val.size();
    summary["test_records"] = parts.test.size();
    summary["features"] = clean.feature_names;
    return {
        {"clean.csv", telemetry::to_csv(clean)},
        {"norm.csv", telemetry::render_norm_stats(stats)},
        {"summary.json", summary.dump(2) + "\n"},
    };
}

Artifacts cmd_inject(Run& run) {
    track_data(run);
    const auto injected = pipeline::apply_injection(pipeline::load_clean_series(run.cfg), run.cfg);
    return {
        {"injected.csv", telemetry::to_csv(injected.series, &injected.labels)},
        {"injection.json", inject::render_meta(injected.meta)},
    };
}

Artifacts cmd_train(Run& run) {
    track_data(run);
    const auto detector = pipeline::train_detector(pipeline::load_clean_series(run.cfg), run.cfg);
    return {
        {"model.txt", forecast::render_checkpoint(detector.model)},
        {"norm.csv", telemetry::render_norm_stats(detector.stats)},
        {"history.csv", render_history(detector.model)},
    };
}

Artifacts cmd_detect(Run& run) {
    const auto& data = require(run.cfg.data, "data");
    run.inputs.push_back(data);
    const auto detector = load_detector(run);
    const auto csv = telemetry::read_labeled_csv(data);
    const auto result = pipeline::run_detection(detector, csv.series, csv.has_labels ? &csv.labels : nullptr, run.cfg);
    return {
        {"metrics.json", detect::render_metrics_json(result.result)},
        {"records.csv", detect::render_records_csv(result.result)},
        {"reports.jsonl", tiersim::render_report(result.report)},
    };
}

Artifacts cmd_forecast(Run& run) {
    track_data(run);
    telemetry::NormStats stats;
    const auto result = pipeline::run_forecast(pipeline::load_clean_series(run.cfg), run.cfg, &stats);
    return {
        {"forecast_model.txt", forecast::render_checkpoint(result.model)},
        {"norm.csv", telemetry::render_norm_stats(stats)},
        {"forecast.txt", pipeline::render_forecast(result)},
    };
}

Artifacts cmd_packetset_build(Run& run) {
    const auto& path = require(run.cfg.packets, "packets");
    run.inputs.push_back(path);
    const auto sessions = packetset::extract_sessions(packetset::read_packet_log(path),
                                                      {.idle_timeout_s = run.cfg.session_timeout_s});
    std::mt19937_64 seeds(run.cfg.seed);
    std::vector<packetset::FinetuneSample> samples;
    std::vector<packetset::PacketRecord> truth;
    std::string summary = "session,packets,samples\n";
    for (const auto& s : sessions) {
        const auto triples = packetset::build_windows(s, run.cfg.context);
        summary += s.id + "," + std::to_string(s.packets.size()) + "," + std::to_string(triples.size()) + "\n";
        for (const auto& t : triples) {
            samples.push_back(packetset::make_pair(t, seeds()));
            truth.push_back(t.next);
        }
    }
    std::string truth_csv = "sport,dport,flags,seq,ack,length\n";
    for (const auto& p : truth) {
        truth_csv += std::to_string(p.sport) + "," + std::to_string(p.dport) + "," + p.flags + "," +
                     std::to_string(p.seq) + "," + std::to_string(p.ack) + "," + std::to_string(p.length) + "\n";
    }
    return {
        {"samples.txt", packetset::render_samples(samples)},
        {"truth.csv", truth_csv},
        {"sessions.csv", summary},
    };
}

Artifacts cmd_packetset_score(Run& run) {
    const auto& pred = require(run.cfg.pred, "pred");
    const auto& truth = require(run.cfg.truth, "truth");
    run.inputs.push_back(pred);
    run.inputs.push_back(truth);
    const auto report = packetset::score_fields(packetset::read_packet_fields(pred), packetset::read_packet_fields(truth));
    return {{"score.txt", packetset::render_field_report(report)}};
}

Artifacts cmd_simulate(Run& run) {
    std::optional<pipeline::TrainedDetector> detector;
    telemetry::TelemetrySeries series;
    std::vector<bool> labels;
    bool has_labels = true;
    if (run.cfg.data.empty()) {
        const auto clean = pipeline::load_clean_series(run.cfg);
        auto injected = pipeline::apply_injection(clean, run.cfg);
        detector.emplace(run.cfg.model_path.empty() ? pipeline::train_detector(clean, run.cfg) : load_detector(run));
        series = std::move(injected.series);
        labels = std::move(injected.labels);
    } else {
        run.inputs.push_back(run.cfg.data);
        detector.emplace(load_detector(run));
        auto csv = telemetry::read_labeled_csv(run.cfg.data);
        series = std::move(csv.series);
        labels = std::move(csv.labels);
        has_labels = csv.has_labels;
    }
    const auto result = pipeline::run_stream(*detector, series, has_labels ? &labels : nullptr, run.cfg);
    const auto& st = result.stats;
    nlohmann::ordered_json j;
    j["tier"] = tiersim::tier_name(tiersim::place(tiersim::Task::Detection, run.cfg.policy));
    j["batch_size"] = st.batch_size;
    j["records"] = st.records;
    j["batches"] = st.batches;
    j["scored_records"] = st.scored_records;
    j["elapsed_s"] = st.elapsed_s;
    if (st.metrics) {
        j["metrics"] = {{"accuracy", st.metrics->accuracy}, {"precision", st.metrics->precision},
                        {"recall", st.metrics->recall},     {"f_score", st.metrics->f_score},
                        {"tp", st.metrics->tp},             {"tn", st.metrics->tn},
                        {"fp", st.metrics->fp},             {"fn", st.metrics->fn}};
    } else {
        j["metrics"] = nullptr;
    }
    std::string reports;
    for (const auto& r : result.reports) reports += tiersim::render_report(r);
    return {{"stream.json", j.dump(2) + "\n"}, {"reports.jsonl", reports}};
}

Artifacts cmd_experiment_detect(Run& run) {
    track_data(run);
    return pipeline::experiment_detect(run.cfg);
}

Artifacts cmd_experiment_variance(Run& run) {
    track_data(run);
    return pipeline::experiment_variance_sweep(run.cfg);
}

Artifacts cmd_experiment_batch(Run& run) {
    track_data(run);
    return pipeline::experiment_batch_sweep(run.cfg);
}

// ---- plumbing ---------------------------------------------------------------

struct Leaf {
    std::string name; // e.g. "experiment nth"
    CLI::App* app = nullptr;
    Handler handler;
    std::string config_path;
    std::string out_dir = "out";
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    config::KeyValues forced; // fixed by the command itself
};

void add_leaf(std::vector<std::unique_ptr<Leaf>>& leaves, CLI::App* parent, const std::string& name,
              const std::string& full_name, const std::string& description, Handler handler,
              config::KeyValues forced = {}) {
    auto leaf = std::make_unique<Leaf>();
    leaf->forced = std::move(forced);
    leaf->name = full_name;
    leaf->app = parent->add_subcommand(name, description);
    leaf->handler = std::move(handler);
    leaf->app->add_option("--config", leaf->config_path, "key=value config file or a run manifest");
    leaf->app->add_option("--out", leaf->out_dir, "output directory")->capture_default_str();
    for (const auto& k : config::known_keys()) {
        if (leaf->forced.count(std::string(k.key))) continue;
        std::string names = "--" + dashed(std::string(k.key));
        if (k.key == "inject_n") names += ",--n";
        if (k.key == "inject_lambda") names += ",--lambda";
        auto* opt = leaf->app->add_option(names, leaf->values[std::string(k.key)], std::string(k.help));
        if (!k.default_value.empty()) opt->default_str(std::string(k.default_value));
        leaf->options[std::string(k.key)] = opt;
    }
    leaves.push_back(std::move(leaf));
}

void write_outputs(const Leaf& leaf, const Run& run, const config::KeyValues& values, const Artifacts& files) {
    std::error_code ec;
    fs::create_directories(leaf.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + leaf.out_dir + "': " + ec.message());

    nlohmann::ordered_json manifest;
    manifest["tool"] = "uavguard";
    manifest["command"] = leaf.name;
    manifest["seed"] = run.cfg.seed;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : values) cfg[k] = v;
    manifest["config"] = cfg;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    for (const auto& path : run.inputs) inputs[path] = text::fnv1a_hex(read_file(path));
    manifest["inputs"] = inputs;
    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();

    for (const auto& [name, body] : files) {
        const auto path = fs::path(leaf.out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out || !(out << body)) throw IoError("cannot write '" + path.string() + "'");
        outputs[name] = text::fnv1a_hex(body);
    }
    manifest["outputs"] = outputs;
    const auto path = fs::path(leaf.out_dir) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << manifest.dump(2) << '\n')) throw IoError("cannot write '" + path.string() + "'");
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io: return 2;
    case ErrorKind::Config: return 3;
    default: return 4;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uavguard - UAV telemetry anomaly detection, packet datasets and tier simulation"};
    app.require_subcommand(1);
    std::vector<std::unique_ptr<Leaf>> leaves;

    add_leaf(leaves, &app, "generate", "generate", "write a synthetic mission CSV", cmd_generate);
    add_leaf(leaves, &app, "ingest", "ingest", "parse, impute and normalize sensor data", cmd_ingest);
    add_leaf(leaves, &app, "inject", "inject", "inject labeled anomalies", cmd_inject);
    add_leaf(leaves, &app, "train", "train", "train the reconstruction model", cmd_train);
    add_leaf(leaves, &app, "detect", "detect", "detect anomalies with a trained model", cmd_detect);
    add_leaf(leaves, &app, "forecast", "forecast", "train and evaluate a forecaster against persistence", cmd_forecast);
    add_leaf(leaves, &app, "simulate", "simulate", "stream the test split through the detection tier", cmd_simulate);

    auto* packets = app.add_subcommand("packetset", "packet preference datasets");
    packets->require_subcommand(1);
    add_leaf(leaves, packets, "build", "packetset build", "build chosen/rejected samples from a packet log",
             cmd_packetset_build);
    add_leaf(leaves, packets, "score", "packetset score", "score predicted packets field by field", cmd_packetset_score);

    auto* experiment = app.add_subcommand("experiment", "end-to-end experiment recipes");
    experiment->require_subcommand(1);
    add_leaf(leaves, experiment, "nth", "experiment nth", "every-nth injection and detection", cmd_experiment_detect,
             {{"inject_scheme", "nth"}});
    add_leaf(leaves, experiment, "poisson", "experiment poisson", "Poisson-gap injection and detection",
             cmd_experiment_detect, {{"inject_scheme", "poisson"}});
    add_leaf(leaves, experiment, "variance-sweep", "experiment variance-sweep", "detection metrics per target value",
             cmd_experiment_variance);
    add_leaf(leaves, experiment, "batch-sweep", "experiment batch-sweep", "simulated elapsed time per batch size",
             cmd_experiment_batch);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "uavguard: error: " << e.what() << '\n';
        return 3;
    }

    for (const auto& leaf : leaves) {
        if (!leaf->app->parsed()) continue;
        try {
            auto values = config::defaults();
            if (!leaf->config_path.empty()) config::merge(values, config::load_file(leaf->config_path));
            for (const auto& [key, opt] : leaf->options) {
                if (opt->count() > 0) values[key] = leaf->values[key];
            }
            config::merge(values, leaf->forced);
            Run run{config::to_run_config(values), {}};
            if (!leaf->config_path.empty()) run.inputs.push_back(leaf->config_path);
            const auto files = leaf->handler(run);
            write_outputs(*leaf, run, values, files);
            return 0;
        } catch (const Error& e) {
            std::cerr << "uavguard: error: " << e.what() << '\n';
            return exit_code(e.kind());
        } catch (const std::exception& e) {
            std::cerr << "uavguard: error: " << e.what() << '\n';
            return 4;
        }
    }
    return 3;
}
