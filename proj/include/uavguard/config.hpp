#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "uavguard/detect.hpp"
#include "uavguard/forecast.hpp"
#include "uavguard/inject.hpp"
#include "uavguard/telemetry.hpp"
#include "uavguard/tiersim.hpp"

namespace uavguard::config {

// Flat key=value settings. Every key has a default; unknown keys are errors.
using KeyValues = std::map<std::string, std::string>;

struct KeyInfo {
    std::string_view key;
    std::string_view default_value;
    std::string_view help;
};

const std::vector<KeyInfo>& known_keys();
KeyValues defaults();
bool is_known(std::string_view key);

// Accepts `key = value` lines with full-line # comments, or a run manifest (JSON with
// a "config" object). Throws ConfigError naming the line for bad syntax or
// an unknown key.
KeyValues parse_text(std::string_view text);
KeyValues load_file(const std::string& path);

// Overlays `overrides` on `base`, rejecting unknown keys.
void merge(KeyValues& base, const KeyValues& overrides);

// key=value lines, sorted by key.
std::string render(const KeyValues& values);

enum class NormSource { Train, All };
enum class InjectScheme { EveryNth, Random, Variance, Poisson };

std::string scheme_name(InjectScheme scheme);

// Typed view of a complete KeyValues map. Conversion validates every field
// and reports the offending key.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string mission_id;

    std::string data; // empty: synthetic mission
    telemetry::MissionParams synthetic;
    telemetry::ImputePolicy impute = telemetry::ImputePolicy::Linear;
    std::vector<std::string> features;

    telemetry::SplitSpec split;
    NormSource norm_source = NormSource::Train;

    forecast::PredictorConfig model;
    detect::DetectConfig detect;

    InjectScheme scheme = InjectScheme::EveryNth;
    std::size_t inject_n = 5;
    double inject_fraction = 0.2;
    inject::RandomMode random_mode = inject::RandomMode::FixedCount;
    double inject_lambda = 2.0;
    inject::PerturbSpec perturb;
    std::vector<double> variance_targets;

    tiersim::Deployment deployment;
    tiersim::PlacementPolicy policy;
    std::vector<std::size_t> batches;
    std::size_t stream_batch = 32;
    tiersim::LatencyTable latency_table;
    double per_record_cost_s = 0.0;

    std::size_t context = 3;
    double session_timeout_s = 60.0;
    std::string packets;
    std::string pred;
    std::string truth;

    std::string model_path;
    std::string norm_path;
};

RunConfig to_run_config(const KeyValues& values);

} // namespace uavguard::config
