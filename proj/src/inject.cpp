#include "uavguard/inject.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::inject {

using telemetry::TelemetrySeries;

namespace {

void require_feature(const std::string& feature) {
    if (!telemetry::is_feature_name(feature)) {
        throw ConfigError("unknown feature '" + feature + "'");
    }
}

// The replacement value written into every selected record.
double anomalous_value(const TelemetrySeries& series, const PerturbSpec& spec) {
    require_feature(spec.feature);
    if (!std::isfinite(spec.amount)) {
        throw ConfigError("perturbation amount must be finite");
    }
    if (spec.mode == PerturbMode::SetValue || series.empty()) {
        return spec.amount;
    }
    const auto col = series.column(spec.feature);
    const double n = static_cast<double>(col.size());
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    return mean + spec.amount * std::sqrt(ss / n);
}

std::string spec_text(const PerturbSpec& spec) {
    return spec.mode == PerturbMode::SetValue ? "set-value" : "offset-sigma";
}

LabeledSeries apply(const TelemetrySeries& series, const std::string& feature, double value,
                    const std::vector<std::size_t>& indices, InjectionMeta meta) {
    LabeledSeries out;
    out.series = series;
    out.labels.assign(series.size(), false);
    for (const auto i : indices) {
        telemetry::set_feature_value(out.series.records[i], feature, value);
        out.labels[i] = true;
    }
    out.meta = std::move(meta);
    return out;
}

void add_spec_params(InjectionMeta& meta, const PerturbSpec& spec, double value) {
    meta.params.emplace_back("feature", spec.feature);
    meta.params.emplace_back("perturb_mode", spec_text(spec));
    meta.params.emplace_back("perturb_amount", text::format_double(spec.amount));
    meta.params.emplace_back("anomalous_value", text::format_double(value));
}

} // namespace

PerturbMode parse_perturb_mode(const std::string& name) {
    if (name == "set-value") return PerturbMode::SetValue;
    if (name == "offset-sigma") return PerturbMode::OffsetSigma;
    throw ConfigError("unknown perturbation mode '" + name + "'");
}

std::size_t LabeledSeries::anomaly_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
}

std::vector<std::size_t> every_nth_indices(std::size_t n_records, std::size_t n) {
    if (n < 2) {
        throw ConfigError("every-nth injection needs n >= 2");
    }
    std::vector<std::size_t> out;
    for (std::size_t pos = n; pos <= n_records; pos += n) {
        out.push_back(pos - 1);
    }
    return out;
}

std::vector<std::size_t> labeled_indices(const std::vector<bool>& labels) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) out.push_back(i);
    }
    return out;
}

LabeledSeries inject_every_nth(const TelemetrySeries& series, std::size_t n, const PerturbSpec& spec) {
    const auto indices = every_nth_indices(series.size(), n);
    const double value = anomalous_value(series, spec);
    InjectionMeta meta{"every-nth", {{"n", std::to_string(n)}}, 0};
    add_spec_params(meta, spec, value);
    return apply(series, spec.feature, value, indices, std::move(meta));
}

LabeledSeries inject_random(const TelemetrySeries& series, double fraction, const PerturbSpec& spec,
                            std::uint64_t seed, RandomMode mode) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("random injection fraction must lie in (0, 1)");
    }
    const double value = anomalous_value(series, spec);
    const std::size_t n = series.size();
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> indices;

    if (mode == RandomMode::FixedCount) {
        const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
        // Partial Fisher-Yates: the first `count` slots are a uniform sample.
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
        std::sort(indices.begin(), indices.end());
    } else {
        std::bernoulli_distribution coin(fraction);
        for (std::size_t i = 0; i < n; ++i) {
            if (coin(rng)) indices.push_back(i);
        }
    }

    InjectionMeta meta{"random",
                       {{"fraction", text::format_double(fraction)},
                        {"random_mode", mode == RandomMode::FixedCount ? "fixed" : "bernoulli"}},
                       seed};
    add_spec_params(meta, spec, value);
    return apply(series, spec.feature, value, indices, std::move(meta));
}

LabeledSeries inject_variance(const TelemetrySeries& series, const std::string& feature,
                              double target_value, const std::vector<std::size_t>& indices) {
    require_feature(feature);
    if (indices.empty()) {
        throw ConfigError("variance injection needs a non-empty record selection");
    }
    if (!std::isfinite(target_value)) {
        throw ConfigError("variance target must be finite");
    }
    for (const auto i : indices) {
        if (i >= series.size()) {
            throw ConfigError("selected record " + std::to_string(i) + " is out of range");
        }
    }
    InjectionMeta meta{"variance",
                       {{"feature", feature},
                        {"target_value", text::format_double(target_value)},
                        {"selected", std::to_string(indices.size())}},
                       0};
    return apply(series, feature, target_value, indices, std::move(meta));
}

LabeledSeries inject_poisson(const TelemetrySeries& series, double lambda, const PerturbSpec& spec,
                             std::uint64_t seed) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("poisson lambda must be positive");
    }
    const double value = anomalous_value(series, spec);
    std::mt19937_64 rng(seed);
    std::poisson_distribution<std::size_t> gap(lambda);
    std::vector<std::size_t> indices;
    // pos is one past the previous anomaly, so the first gap is measured from -1.
    std::size_t pos = 0;
    while (true) {
        pos += gap(rng) + 1;
        if (pos > series.size()) break;
        indices.push_back(pos - 1);
    }
    InjectionMeta meta{"poisson", {{"lambda", text::format_double(lambda)}}, seed};
    add_spec_params(meta, spec, value);
    return apply(series, spec.feature, value, indices, std::move(meta));
}

std::string render_meta(const InjectionMeta& meta) {
    nlohmann::ordered_json j;
    j["scheme"] = meta.scheme;
    j["seed"] = meta.seed;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : meta.params) params[k] = v;
    j["params"] = params;
    return j.dump(2) + "\n";
}

InjectionMeta parse_meta(const std::string& body) {
    try {
        const auto j = nlohmann::ordered_json::parse(body);
        InjectionMeta meta;
        meta.scheme = j.at("scheme").get<std::string>();
        meta.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& [k, v] : j.at("params").items()) {
            meta.params.emplace_back(k, v.get<std::string>());
        }
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("injection metadata: ") + e.what());
    }
}

} // namespace uavguard::inject
