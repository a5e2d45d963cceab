#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "uavguard/tiersim.hpp"

using namespace uavguard;
using namespace uavguard::tiersim;

namespace {

class ZeroPredictor : public Predictor {
public:
    ZeroPredictor(std::size_t rows, std::size_t features) : rows_(rows), features_(features) {}
    std::size_t input_rows() const override { return rows_; }
    std::size_t output_rows() const override { return rows_; }
    std::size_t feature_count() const override { return features_; }
    Matrix predict(const Matrix&) const override { return Matrix(rows_, features_); }

private:
    std::size_t rows_, features_;
};

// Normal rows near zero, every fifth row large.
struct Stream {
    Matrix features;
    std::vector<bool> labels;
    std::vector<std::uint64_t> timestamps;
};

Stream make_stream(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> small(-0.2, 0.2);
    Stream s{Matrix(n, 2), {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const bool anomalous = (i + 1) % 5 == 0;
        s.labels.push_back(anomalous);
        s.timestamps.push_back(1000 + 4000 * i);
        for (std::size_t c = 0; c < 2; ++c) s.features(i, c) = anomalous ? 3.0 : small(rng);
    }
    return s;
}

} // namespace

TEST_CASE("placement") {
    const auto policy = default_policy();
    CHECK(place(Task::Detection, policy) == TierName::Edge);
    CHECK(place(Task::Inference, policy) == TierName::Onboard);
    CHECK(place(Task::Forecasting, policy) == TierName::Cloud);
    CHECK(place(Task::Finetuning, policy) == TierName::Cloud);
    CHECK_THROWS_AS(place(Task::Detection, PlacementPolicy{}), ConfigError);
    CHECK(parse_tier("edge") == TierName::Edge);
    CHECK_THROWS_AS(parse_tier("mars"), ConfigError);
    CHECK(parse_task("finetuning") == Task::Finetuning);
}

TEST_CASE("deployment defaults and validation") {
    auto d = default_deployment();
    CHECK_NOTHROW(validate(d));
    CHECK(d.tier(TierName::Onboard).compute_factor == 4.0);
    CHECK(d.tier(TierName::Edge).compute_factor == 1.5);
    CHECK(d.tier(TierName::Cloud).compute_factor == 1.0);
    CHECK(d.uplink_latency_s(TierName::Onboard) == 0.0);
    CHECK(d.uplink_latency_s(TierName::Edge) == doctest::Approx(0.005));
    CHECK(d.uplink_latency_s(TierName::Cloud) == doctest::Approx(0.025));
    d.tier(TierName::Cloud).compute_factor = 2.0;
    CHECK_THROWS_AS(validate(d), ConfigError);
    d = default_deployment();
    d.tier(TierName::Edge).link_latency_ms = -1;
    CHECK_THROWS_AS(validate(d), ConfigError);
}

TEST_CASE("latency fit on the published batch-size table") {
    const auto fit = fit_latency_model(reference_latency_table());
    // independent values from numpy.linalg.lstsq on [1, 1/B]
    CHECK(fit.a_prime == doctest::Approx(6.42199005).epsilon(1e-8));
    CHECK(fit.b_prime == doctest::Approx(220.66399431).epsilon(1e-9));
    const std::vector<double> expected = {-0.00536194, -0.00860089, 0.10941217, 0.04699213, -0.0945078, -0.10287142};
    REQUIRE(fit.relative_residuals.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(fit.relative_residuals[i] == doctest::Approx(expected[i]).epsilon(1e-6));
    CHECK(fit.max_relative_residual < 0.20);
    for (const auto& [b, t] : reference_latency_table()) CHECK(std::abs(fit.predict(b) - t) / t < 0.20);
}

TEST_CASE("latency fit edge cases") {
    LatencyTable exact;
    for (double b : {1.0, 2.0, 5.0, 17.0, 300.0}) exact.emplace_back(b, 3.25 + 41.5 / b);
    const auto fit = fit_latency_model(exact);
    CHECK(std::abs(fit.a_prime - 3.25) < 1e-9);
    CHECK(std::abs(fit.b_prime - 41.5) < 1e-9);

    const auto two = fit_latency_model({{2, 10.0}, {10, 4.0}});
    CHECK(two.predict(2) == doctest::Approx(10.0));
    CHECK(two.predict(10) == doctest::Approx(4.0));
    CHECK(two.max_relative_residual < 1e-12);

    CHECK_THROWS_AS(fit_latency_model({{8, 1.0}, {8, 2.0}}), FitError);
    CHECK_THROWS_AS(fit_latency_model({{8, 1.0}}), FitError);
}

TEST_CASE("logical clock") {
    const LatencyModel m{.a = 2.0, .b = 0.5, .c = 0.01};
    // single batch closed form
    CHECK(simulated_elapsed(100, 100, m, 1.5, 0.02) == doctest::Approx(2.0 + 0.5 + 0.01 * 100 * 1.5 + 0.02));
    CHECK(simulated_elapsed(100, 1000, m, 1.5, 0.02) == doctest::Approx(2.0 + 0.5 + 0.01 * 100 * 1.5 + 0.02));
    CHECK_THROWS_AS(simulated_elapsed(10, 0, m, 1.0, 0.0), ConfigError);

    SUBCASE("strictly decreasing in B over 1..256 when b > 0") {
        for (const LatencyModel lm : {LatencyModel{0.0, 1e-3, 0.0}, LatencyModel{5.0, 0.2, 1e-4}}) {
            double previous = INFINITY;
            for (std::size_t b = 1; b <= 256; ++b) {
                const double t = simulated_elapsed(65536, b, lm, 4.0, 0.0);
                REQUIRE(t < previous);
                previous = t;
            }
        }
    }
    SUBCASE("model from the fit reproduces the curve") {
        const auto fit = fit_latency_model(reference_latency_table());
        const std::size_t n = 1 << 14;
        const auto model = from_fit(fit, n, 0.005);
        for (const auto& [b, t] : reference_latency_table()) {
            const double sim = simulated_elapsed(n, static_cast<std::size_t>(b), model, 1.5, 0.005);
            CHECK(sim == doctest::Approx(fit.predict(b)).epsilon(1e-9));
            CHECK(std::abs(sim - t) / t < 0.20);
        }
    }
}

TEST_CASE("flagged ranges") {
    CHECK(flagged_ranges({0, 1, 2, 3, 4}, {false, true, true, false, true}) ==
          std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {4, 4}});
    CHECK(flagged_ranges({0, 1, 2}, {false, false, false}).empty());
    // a gap in the scored indices breaks a run
    CHECK(flagged_ranges({0, 1, 5, 6}, {true, true, true, true}) ==
          std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {5, 6}});

    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::size_t> idx;
        std::vector<bool> flags;
        for (std::size_t i = 0; i < 200; ++i) {
            idx.push_back(i);
            flags.push_back(coin(rng));
        }
        const auto ranges = flagged_ranges(idx, flags);
        std::vector<bool> rebuilt(200, false);
        for (std::size_t k = 0; k < ranges.size(); ++k) {
            REQUIRE(ranges[k].first <= ranges[k].second);
            if (k > 0) REQUIRE(ranges[k - 1].second + 1 < ranges[k].first);
            for (std::size_t i = ranges[k].first; i <= ranges[k].second; ++i) rebuilt[i] = true;
        }
        REQUIRE(rebuilt == flags);
    }
}

TEST_CASE("reports") {
    detect::DetectionResult d;
    d.record_index = {0, 1, 2, 3, 4};
    d.predicted = {false, true, true, false, true};
    d.threshold = 0.25;
    const auto r = emit_report(d, {.mission_id = "m1", .tier = TierName::Edge, .timestamp = 212000});
    CHECK(render_report(r) ==
          "{\"mission_id\":\"m1\",\"tier\":\"edge\",\"timestamp\":212000,\"clock_s\":0.0,\"threshold\":0.25,"
          "\"ranges\":[[1,2],[4,4]],\"metrics\":null}\n");
    d.predicted.assign(5, false);
    CHECK(emit_report(d, {}).ranges.empty());
}

TEST_CASE("stream simulation") {
    const auto s = make_stream(4000, 1);
    const ZeroPredictor zero(10, 2);
    const auto deployment = default_deployment();
    const LatencyModel model{.a = 1.0, .b = 0.05, .c = 1e-4};
    StreamConfig cfg{.batch_size = 32, .threshold = 1.0, .tier = TierName::Edge, .mission_id = "sim"};

    const auto a = simulate_stream(s.features, s.timestamps, &s.labels, zero, deployment, model, cfg);
    REQUIRE(a.stats.metrics);
    CHECK(a.stats.metrics->precision == 1.0);
    CHECK(a.stats.metrics->recall == 1.0);
    CHECK(a.stats.scored_records == 4000);
    CHECK(a.stats.batches == 125);
    CHECK(a.stats.elapsed_s == doctest::Approx(simulated_elapsed(4000, 32, model, 1.5, 0.005)));
    REQUIRE_FALSE(a.reports.empty());
    for (std::size_t i = 1; i < a.reports.size(); ++i) {
        CHECK(a.reports[i - 1].clock_s < a.reports[i].clock_s);
        CHECK(a.reports[i - 1].ranges.back().second < a.reports[i].ranges.front().first);
    }

    const auto b = simulate_stream(s.features, s.timestamps, &s.labels, zero, deployment, model, cfg);
    CHECK(b.stats.elapsed_s == a.stats.elapsed_s);
    CHECK(b.stats.metrics == a.stats.metrics);
    REQUIRE(b.reports.size() == a.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i) CHECK(render_report(a.reports[i]) == render_report(b.reports[i]));

    SUBCASE("metrics identical across batch sizes, elapsed strictly decreasing") {
        const auto rows = run_batch_experiment(s.features, s.timestamps, &s.labels, zero, deployment, model, cfg,
                                               {4, 8, 16, 32, 64, 128});
        REQUIRE(rows.size() == 6);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].elapsed_s < rows[i - 1].elapsed_s);
            CHECK(rows[i].metrics == rows[0].metrics);
        }
        const auto csv = render_batch_csv(rows);
        CHECK(csv.rfind("batch_size,elapsed_s,accuracy,precision,recall,f_score\n4,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    }
    SUBCASE("B >= N is a single batch") {
        cfg.batch_size = 10000;
        const auto one = simulate_stream(s.features, {}, nullptr, zero, deployment, model, cfg);
        CHECK(one.stats.batches == 1);
        CHECK(one.stats.elapsed_s == doctest::Approx(1.0 + 0.05 + 1e-4 * 4000 * 1.5 + 0.005));
        CHECK_FALSE(one.stats.metrics);
    }
    SUBCASE("errors") {
        cfg.batch_size = 0;
        CHECK_THROWS_AS(simulate_stream(s.features, {}, nullptr, zero, deployment, model, cfg), ConfigError);
        cfg.batch_size = 8;
        CHECK_THROWS_AS(simulate_stream(s.features, {}, nullptr, ZeroPredictor(10, 3), deployment, model, cfg),
                        DimensionError);
        CHECK_THROWS_AS(run_batch_experiment(s.features, {}, nullptr, zero, deployment, model, cfg, {}), ConfigError);
    }
}
