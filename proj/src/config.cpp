#include "uavguard/config.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::config {

namespace {

const std::vector<KeyInfo> kKeys = {
    {"seed", "0", "seed for every random stream"},
    {"mission_id", "mission-0", "mission id written into anomaly reports"},
    {"data", "", "sensor CSV; empty generates a synthetic mission"},
    {"synthetic_records", "20000", "records in a synthetic mission"},
    {"synthetic_missing", "0", "fraction of synthetic axis cells left empty"},
    {"impute", "linear", "missing-value policy: linear | forward-fill"},
    {"features", "gyro_rad_0,gyro_rad_1,gyro_rad_2,accelerometer_m_s2_0,accelerometer_m_s2_1,accelerometer_m_s2_2",
     "modeled feature columns"},
    {"train_ratio", "0.7", "train split ratio"},
    {"val_ratio", "0.1", "validation split ratio"},
    {"test_ratio", "0.2", "test split ratio"},
    {"norm_source", "train", "normalization statistics from: train | all"},
    {"seq_len", "16", "window length"},
    {"horizon", "1", "forecast horizon"},
    {"model_dim", "64", "model dimension (recorded; unused by the two-layer net)"},
    {"fcn_dim", "64", "hidden width"},
    {"epochs", "3", "training epochs"},
    {"learning_rate", "0.02", "SGD learning rate"},
    {"batch_size", "128", "training mini-batch size"},
    {"anomaly_ratio", "20", "expected anomaly percent A"},
    {"threshold_source", "train", "threshold from: train | pooled"},
    {"inject_scheme", "nth", "injection: nth | random | variance | poisson"},
    {"inject_n", "5", "every-nth period"},
    {"inject_fraction", "0.2", "random injection fraction"},
    {"random_mode", "fixed", "random injection: fixed | bernoulli"},
    {"inject_lambda", "2", "Poisson gap mean"},
    {"perturb_feature", "accelerometer_m_s2_2", "perturbed column"},
    {"perturb_mode", "offset-sigma", "perturbation: offset-sigma | set-value"},
    {"perturb_amount", "6", "k sigmas, or the value written"},
    {"variance_targets", "-8,-8.5,-9", "values swept by variance injection"},
    {"place_inference", "onboard", "tier for inference"},
    {"place_detection", "edge", "tier for detection"},
    {"place_forecasting", "cloud", "tier for forecasting"},
    {"place_finetuning", "cloud", "tier for fine-tuning"},
    {"onboard_factor", "4", "onboard compute factor"},
    {"edge_factor", "1.5", "edge compute factor"},
    {"cloud_factor", "1", "cloud compute factor"},
    {"onboard_link_ms", "5", "onboard to edge latency"},
    {"edge_link_ms", "20", "edge to cloud latency"},
    {"cloud_link_ms", "0", "cloud outbound latency"},
    {"batches", "4,8,16,32,64,128", "batch sizes for the batch sweep"},
    {"stream_batch", "32", "batch size for a single simulation"},
    {"latency_table", "4:61.92,8:34.30,16:18.22,32:12.72,64:10.90,128:9.08",
     "batch:elapsed_s pairs the latency model is fitted to"},
    {"per_record_cost", "0", "per-record compute cost c in seconds"},
    {"context", "3", "packets of context per sample"},
    {"session_timeout", "60", "session idle timeout in seconds"},
    {"packets", "", "packet log for packetset build"},
    {"pred", "", "predicted packets CSV"},
    {"truth", "", "ground-truth packets CSV"},
    {"model", "", "model checkpoint"},
    {"norm", "", "normalization statistics file"},
};

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

const std::string& get(const KeyValues& v, const std::string& key) {
    const auto it = v.find(key);
    if (it == v.end()) throw ConfigError("config key '" + key + "' is missing");
    return it->second;
}

double real(const KeyValues& v, const std::string& key) {
    const auto& s = get(v, key);
    const auto d = text::to_double(text::trim(s));
    if (!d || !std::isfinite(*d)) bad(key, s, "a number");
    return *d;
}

std::uint64_t uint(const KeyValues& v, const std::string& key) {
    const auto& s = get(v, key);
    const auto u = text::to_uint(text::trim(s));
    if (!u) bad(key, s, "a non-negative integer");
    return *u;
}

std::size_t positive(const KeyValues& v, const std::string& key) {
    const auto u = uint(v, key);
    if (u == 0) bad(key, get(v, key), "a positive integer");
    return static_cast<std::size_t>(u);
}

template <typename F>
auto with_key(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

std::vector<std::string> name_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s, ',')) {
        const auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

} // namespace

const std::vector<KeyInfo>& known_keys() { return kKeys; }

KeyValues defaults() {
    KeyValues v;
    for (const auto& k : kKeys) v.emplace(k.key, k.default_value);
    return v;
}

bool is_known(std::string_view key) {
    return std::any_of(kKeys.begin(), kKeys.end(), [&](const KeyInfo& k) { return k.key == key; });
}

KeyValues parse_text(std::string_view body) {
    KeyValues out;
    const auto start = body.find_first_not_of(" \t\r\n");
    if (start != std::string_view::npos && body[start] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("manifest has no \"config\" object");
        for (const auto& [key, value] : j["config"].items()) {
            if (!is_known(key)) throw ConfigError("unknown config key '" + key + "' in manifest");
            out[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        return out;
    }

    std::size_t line_no = 0;
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key(text::trim(t.substr(0, eq)));
        if (!is_known(key)) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (out.count(key)) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        out[key] = std::string(text::trim(t.substr(eq + 1)));
    }
    return out;
}

KeyValues load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

void merge(KeyValues& base, const KeyValues& overrides) {
    for (const auto& [k, v] : overrides) {
        if (!is_known(k)) throw ConfigError("unknown config key '" + k + "'");
        base[k] = v;
    }
}

std::string render(const KeyValues& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + "=" + v + "\n";
    return out;
}

std::string scheme_name(InjectScheme scheme) {
    switch (scheme) {
    case InjectScheme::EveryNth: return "nth";
    case InjectScheme::Random: return "random";
    case InjectScheme::Variance: return "variance";
    case InjectScheme::Poisson: return "poisson";
    }
    return "";
}

RunConfig to_run_config(const KeyValues& v) {
    for (const auto& [k, _] : v) {
        if (!is_known(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    RunConfig c;
    c.seed = uint(v, "seed");
    c.mission_id = get(v, "mission_id");
    if (c.mission_id.empty()) bad("mission_id", "", "a non-empty id");

    c.data = get(v, "data");
    c.synthetic.records = positive(v, "synthetic_records");
    c.synthetic.missing_fraction = real(v, "synthetic_missing");
    if (c.synthetic.missing_fraction < 0.0 || c.synthetic.missing_fraction >= 1.0) {
        bad("synthetic_missing", get(v, "synthetic_missing"), "a fraction in [0, 1)");
    }
    c.impute = with_key("impute", [&] { return telemetry::parse_impute_policy(get(v, "impute")); });
    c.features = name_list(get(v, "features"));
    if (c.features.empty()) bad("features", get(v, "features"), "at least one feature");
    std::size_t extras = 0;
    for (std::size_t i = 0; i < c.features.size(); ++i) {
        const auto& f = c.features[i];
        if (!telemetry::is_feature_name(f)) bad("features", f, "a numeric telemetry column");
        if (std::find(c.features.begin(), c.features.begin() + static_cast<std::ptrdiff_t>(i), f) !=
            c.features.begin() + static_cast<std::ptrdiff_t>(i)) {
            bad("features", f, "distinct names");
        }
        if (std::find(telemetry::kAxisFeatures.begin(), telemetry::kAxisFeatures.end(), f) ==
            telemetry::kAxisFeatures.end()) {
            ++extras;
        }
    }
    if (extras > 1) bad("features", get(v, "features"), "the gyro/accelerometer axes plus at most one extra column");

    c.split = {real(v, "train_ratio"), real(v, "val_ratio"), real(v, "test_ratio")};
    for (const char* k : {"train_ratio", "val_ratio", "test_ratio"}) {
        const double r = real(v, k);
        if (!(r > 0.0 && r < 1.0)) bad(k, get(v, k), "a ratio in (0, 1)");
    }
    if (std::abs(c.split.train + c.split.val + c.split.test - 1.0) > 1e-9) {
        bad("train_ratio", get(v, "train_ratio"), "train_ratio + val_ratio + test_ratio = 1");
    }
    const auto& ns = get(v, "norm_source");
    if (ns == "train") c.norm_source = NormSource::Train;
    else if (ns == "all") c.norm_source = NormSource::All;
    else bad("norm_source", ns, "train or all");

    c.model.seq_len = positive(v, "seq_len");
    c.model.horizon = positive(v, "horizon");
    c.model.model_dim = positive(v, "model_dim");
    c.model.fcn_dim = positive(v, "fcn_dim");
    c.model.epochs = static_cast<std::size_t>(uint(v, "epochs"));
    c.model.learning_rate = real(v, "learning_rate");
    if (!(c.model.learning_rate > 0.0)) bad("learning_rate", get(v, "learning_rate"), "a positive number");
    c.model.batch_size = positive(v, "batch_size");
    c.model.seed = c.seed;

    c.detect.anomaly_ratio = real(v, "anomaly_ratio");
    if (!(c.detect.anomaly_ratio > 0.0 && c.detect.anomaly_ratio < 100.0)) {
        bad("anomaly_ratio", get(v, "anomaly_ratio"), "a percent in (0, 100)");
    }
    c.detect.threshold_source =
        with_key("threshold_source", [&] { return detect::parse_threshold_source(get(v, "threshold_source")); });

    const auto& scheme = get(v, "inject_scheme");
    if (scheme == "nth") c.scheme = InjectScheme::EveryNth;
    else if (scheme == "random") c.scheme = InjectScheme::Random;
    else if (scheme == "variance") c.scheme = InjectScheme::Variance;
    else if (scheme == "poisson") c.scheme = InjectScheme::Poisson;
    else bad("inject_scheme", scheme, "nth, random, variance or poisson");
    c.inject_n = static_cast<std::size_t>(uint(v, "inject_n"));
    if (c.inject_n < 2) bad("inject_n", get(v, "inject_n"), "an integer >= 2");
    c.inject_fraction = real(v, "inject_fraction");
    if (!(c.inject_fraction > 0.0 && c.inject_fraction < 1.0)) {
        bad("inject_fraction", get(v, "inject_fraction"), "a fraction in (0, 1)");
    }
    const auto& rm = get(v, "random_mode");
    if (rm == "fixed") c.random_mode = inject::RandomMode::FixedCount;
    else if (rm == "bernoulli") c.random_mode = inject::RandomMode::Bernoulli;
    else bad("random_mode", rm, "fixed or bernoulli");
    c.inject_lambda = real(v, "inject_lambda");
    if (!(c.inject_lambda > 0.0)) bad("inject_lambda", get(v, "inject_lambda"), "a positive number");
    c.perturb.feature = get(v, "perturb_feature");
    if (!telemetry::is_feature_name(c.perturb.feature)) bad("perturb_feature", c.perturb.feature, "a feature column");
    c.perturb.mode = with_key("perturb_mode", [&] { return inject::parse_perturb_mode(get(v, "perturb_mode")); });
    c.perturb.amount = real(v, "perturb_amount");
    c.variance_targets = with_key("variance_targets", [&] { return text::parse_double_list(get(v, "variance_targets")); });
    if (c.variance_targets.empty()) bad("variance_targets", "", "at least one value");

    c.deployment = tiersim::default_deployment();
    c.deployment.tier(tiersim::TierName::Onboard).compute_factor = real(v, "onboard_factor");
    c.deployment.tier(tiersim::TierName::Edge).compute_factor = real(v, "edge_factor");
    c.deployment.tier(tiersim::TierName::Cloud).compute_factor = real(v, "cloud_factor");
    c.deployment.tier(tiersim::TierName::Onboard).link_latency_ms = real(v, "onboard_link_ms");
    c.deployment.tier(tiersim::TierName::Edge).link_latency_ms = real(v, "edge_link_ms");
    c.deployment.tier(tiersim::TierName::Cloud).link_latency_ms = real(v, "cloud_link_ms");
    tiersim::validate(c.deployment);
    const std::pair<tiersim::Task, const char*> places[] = {
        {tiersim::Task::Inference, "place_inference"},
        {tiersim::Task::Detection, "place_detection"},
        {tiersim::Task::Forecasting, "place_forecasting"},
        {tiersim::Task::Finetuning, "place_finetuning"},
    };
    for (const auto& [task, key] : places) {
        c.policy[task] = with_key(key, [&] { return tiersim::parse_tier(get(v, key)); });
    }

    for (double b : with_key("batches", [&] { return text::parse_double_list(get(v, "batches")); })) {
        if (!(b >= 1.0) || b != std::floor(b)) bad("batches", get(v, "batches"), "positive integers");
        c.batches.push_back(static_cast<std::size_t>(b));
    }
    if (c.batches.empty()) bad("batches", "", "at least one batch size");
    c.stream_batch = positive(v, "stream_batch");
    for (auto part : text::split(get(v, "latency_table"), ',')) {
        const auto colon = part.find(':');
        const auto b = colon == std::string_view::npos ? std::nullopt : text::to_double(text::trim(part.substr(0, colon)));
        const auto t = colon == std::string_view::npos ? std::nullopt : text::to_double(text::trim(part.substr(colon + 1)));
        if (!b || !t) bad("latency_table", std::string(part), "batch:seconds pairs");
        c.latency_table.emplace_back(*b, *t);
    }
    c.per_record_cost_s = real(v, "per_record_cost");
    if (c.per_record_cost_s < 0.0) bad("per_record_cost", get(v, "per_record_cost"), "a non-negative number");

    c.context = static_cast<std::size_t>(uint(v, "context"));
    c.session_timeout_s = real(v, "session_timeout");
    if (!(c.session_timeout_s > 0.0)) bad("session_timeout", get(v, "session_timeout"), "a positive number");
    c.packets = get(v, "packets");
    c.pred = get(v, "pred");
    c.truth = get(v, "truth");
    c.model_path = get(v, "model");
    c.norm_path = get(v, "norm");
    return c;
}

} // namespace uavguard::config
