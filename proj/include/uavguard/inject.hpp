#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uavguard/telemetry.hpp"

namespace uavguard::inject {

enum class PerturbMode {
    SetValue,    // value <- v
    OffsetSigma, // value <- mean + k * std of the clean feature
};

struct PerturbSpec {
    std::string feature = "accelerometer_m_s2_2";
    PerturbMode mode = PerturbMode::OffsetSigma;
    double amount = 6.0; // v for SetValue, k for OffsetSigma
};

PerturbMode parse_perturb_mode(const std::string& name);

// Scheme name, parameters in insertion order, and the seed (0 for
// deterministic schemes). Together with the clean input it reproduces the
// labeled output.
struct InjectionMeta {
    std::string scheme;
    std::vector<std::pair<std::string, std::string>> params;
    std::uint64_t seed = 0;

    bool operator==(const InjectionMeta&) const = default;
};

struct LabeledSeries {
    telemetry::TelemetrySeries series;
    std::vector<bool> labels;
    InjectionMeta meta;

    std::size_t size() const noexcept { return series.size(); }
    std::size_t anomaly_count() const;
};

// 1-based positions n, 2n, 3n, ... expressed as 0-based indices.
std::vector<std::size_t> every_nth_indices(std::size_t n_records, std::size_t n);
std::vector<std::size_t> labeled_indices(const std::vector<bool>& labels);

LabeledSeries inject_every_nth(const telemetry::TelemetrySeries& series, std::size_t n,
                               const PerturbSpec& spec);

enum class RandomMode {
    FixedCount, // exactly round(fraction * N) records, without replacement
    Bernoulli,  // each record independently with probability `fraction`
};

LabeledSeries inject_random(const telemetry::TelemetrySeries& series, double fraction,
                            const PerturbSpec& spec, std::uint64_t seed,
                            RandomMode mode = RandomMode::FixedCount);

// Overwrites `feature` with `target_value` at the given records.
LabeledSeries inject_variance(const telemetry::TelemetrySeries& series, const std::string& feature,
                              double target_value, const std::vector<std::size_t>& indices);

// Gaps between consecutive anomalies are Poisson(lambda) + 1.
LabeledSeries inject_poisson(const telemetry::TelemetrySeries& series, double lambda,
                             const PerturbSpec& spec, std::uint64_t seed);

// Sidecar JSON text describing an injection.
std::string render_meta(const InjectionMeta& meta);
InjectionMeta parse_meta(const std::string& text);

} // namespace uavguard::inject
