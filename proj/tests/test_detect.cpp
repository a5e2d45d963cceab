#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "uavguard/detect.hpp"

using namespace uavguard;
using namespace uavguard::detect;

namespace {

// Reconstruction model that always predicts zeros, so the loss of a record
// is the mean square of its values.
class ZeroPredictor : public Predictor {
public:
    ZeroPredictor(std::size_t rows, std::size_t features) : rows_(rows), features_(features) {}
    std::size_t input_rows() const override { return rows_; }
    std::size_t output_rows() const override { return rows_; }
    std::size_t feature_count() const override { return features_; }
    Matrix predict(const Matrix&) const override { return Matrix(rows_, features_); }

private:
    std::size_t rows_;
    std::size_t features_;
};

// One-feature data whose zero-prediction loss is the square of each cell.
telemetry::WindowedDataset dataset_from_roots(const std::vector<double>& roots, std::size_t len) {
    Matrix m(roots.size(), 1);
    for (std::size_t i = 0; i < roots.size(); ++i) m(i, 0) = roots[i];
    return telemetry::window(m, {.seq_len = len, .stride = len});
}

// Normal records get small distinct losses in (0, 0.1), anomalies >= 1.
struct SeparableData {
    std::vector<double> roots;
    std::vector<bool> labels;
};

SeparableData separable(std::size_t n, std::size_t every, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> small(0.01, 0.3);
    std::uniform_real_distribution<double> big(1.0, 2.0);
    SeparableData d;
    for (std::size_t i = 0; i < n; ++i) {
        const bool anomalous = (i + 1) % every == 0;
        d.labels.push_back(anomalous);
        d.roots.push_back(anomalous ? big(rng) : small(rng));
    }
    return d;
}

Metrics brute_force(const std::vector<bool>& p, const std::vector<bool>& g) {
    Metrics m;
    for (std::size_t i = 0; i < p.size(); ++i) {
        m.tp += p[i] == 1 && g[i] == 1;
        m.tn += p[i] == 0 && g[i] == 0;
        m.fp += p[i] == 1 && g[i] != 1;
        m.fn += p[i] == 0 && g[i] != 0;
    }
    return m;
}

} // namespace

TEST_CASE("pointwise loss") {
    CHECK(pointwise_loss(Matrix(3, 2, 1.5), Matrix(3, 2, 1.5)) == LossVector{0, 0, 0});
    CHECK(pointwise_loss(Matrix(1, 1, 3.0), Matrix(1, 1, 1.0)) == LossVector{4.0});
    CHECK(pointwise_loss(Matrix(1, 2, {1.0, 3.0}), Matrix(1, 2, {0.0, 0.0})) == LossVector{5.0});
    CHECK_THROWS_AS(pointwise_loss(Matrix(2, 2), Matrix(2, 3)), DimensionError);
}

TEST_CASE("nearest-rank percentile threshold") {
    std::vector<double> losses(100);
    for (std::size_t i = 0; i < 100; ++i) losses[i] = static_cast<double>(i);
    std::shuffle(losses.begin(), losses.end(), std::mt19937_64(3));
    const double tau = percentile_threshold(losses, 5.0);
    CHECK(tau == 94.0);
    const auto flags = flag(losses, tau);
    CHECK(std::count(flags.begin(), flags.end(), true) == 5);

    const std::vector<double> flat(50, 0.7);
    CHECK(percentile_threshold(flat, 10.0) == 0.7);
    const auto none = flag(flat, 0.7);
    CHECK(std::count(none.begin(), none.end(), true) == 0);

    for (double a : {0.5, 20.0, 99.0}) {
        CHECK(percentile_threshold(std::vector<double>{3.25}, a) == 3.25);
    }
    CHECK_THROWS_AS(percentile_threshold(std::vector<double>{}, 5.0), InputError);
    CHECK_THROWS_AS(percentile_threshold(losses, 0.0), ConfigError);
    CHECK_THROWS_AS(percentile_threshold(losses, 100.0), ConfigError);
}

TEST_CASE("self-thresholded flag fraction is within 1/N of A") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> size(1, 3000);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        std::vector<double> losses(n);
        for (auto& l : losses) l = u(rng);
        for (double a : {0.5, 1.0, 5.0, 10.0, 25.0}) {
            const auto flags = flag(losses, percentile_threshold(losses, a));
            const double frac = static_cast<double>(std::count(flags.begin(), flags.end(), true)) /
                                static_cast<double>(n);
            REQUIRE(std::abs(frac - a / 100.0) <= 1.0 / static_cast<double>(n) + 1e-12);
        }
    }
}

TEST_CASE("flag is strict") {
    const std::vector<double> l = {1, 2, 3};
    CHECK(flag(l, 2.0) == std::vector<bool>{false, false, true});
    CHECK(flag(l, 3.0) == std::vector<bool>{false, false, false});
    CHECK(flag(l, -1.0) == std::vector<bool>{true, true, true});
}

TEST_CASE("raising the threshold never increases the flagged count") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> losses(500);
    for (auto& l : losses) l = u(rng);
    long previous = 501;
    for (double tau = -0.1; tau <= 1.1; tau += 0.01) {
        const auto f = flag(losses, tau);
        const long count = std::count(f.begin(), f.end(), true);
        CHECK(count <= previous);
        previous = count;
    }
}

TEST_CASE("evaluate examples") {
    const std::vector<bool> g = {true, false, true, false};
    const auto perfect = evaluate(g, g);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f_score == 1.0);

    const auto half = evaluate({true, true, false, false}, {true, false, true, false});
    CHECK(half.tp == 1);
    CHECK(half.fp == 1);
    CHECK(half.fn == 1);
    CHECK(half.tn == 1);
    CHECK(half.accuracy == 0.5);
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 0.5);
    CHECK(half.f_score == 0.5);

    const auto negatives = evaluate({false, false}, {false, false});
    CHECK(negatives.accuracy == 1.0);
    CHECK(negatives.precision == 0.0);
    CHECK_FALSE(negatives.precision_defined);
    CHECK(negatives.recall == 0.0);
    CHECK_FALSE(negatives.recall_defined);
    CHECK(negatives.f_score == 0.0);
    CHECK_FALSE(negatives.f_score_defined);

    CHECK_THROWS_AS(evaluate({true}, {true, false}), DimensionError);
    CHECK_THROWS_AS(evaluate({}, {}), InputError);
}

TEST_CASE("evaluate matches a brute-force confusion matrix") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> len(1, 200);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len(rng);
        std::vector<bool> p(n), g(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = coin(rng);
            g[i] = coin(rng);
        }
        const auto m = evaluate(p, g);
        const auto o = brute_force(p, g);
        REQUIRE(m.tp == o.tp);
        REQUIRE(m.tn == o.tn);
        REQUIRE(m.fp == o.fp);
        REQUIRE(m.fn == o.fn);
        REQUIRE(m.total() == n);
        if (o.tp + o.fp > 0) REQUIRE(m.precision == static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp));
        if (o.tp + o.fn > 0) REQUIRE(m.recall == static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fn));
    }
}

TEST_CASE("detect with a separable oracle predictor") {
    const std::size_t len = 10;
    const auto train = separable(5000, 5, 1);
    const auto eval = separable(2000, 5, 2);
    const ZeroPredictor zero(len, 1);
    const auto train_losses = score(zero, dataset_from_roots(train.roots, len)).losses;
    const auto data = dataset_from_roots(eval.roots, len);

    SUBCASE("A equal to the true anomaly percentage") {
        const auto r = detect::detect(zero, data, train_losses, {.anomaly_ratio = 20.0}, &eval.labels);
        REQUIRE(r.metrics);
        CHECK(r.metrics->precision == 1.0);
        CHECK(r.metrics->recall == 1.0);
        CHECK(r.metrics->anomaly_ratio == 20.0);
    }
    SUBCASE("A much larger than the true ratio") {
        const auto r = detect::detect(zero, data, train_losses, {.anomaly_ratio = 50.0}, &eval.labels);
        CHECK(r.metrics->recall == 1.0);
        CHECK(r.metrics->precision == doctest::Approx(20.0 / 50.0).epsilon(0.05));
    }
    SUBCASE("pooled threshold source") {
        const auto r = detect::detect(zero, data, train_losses,
                              {.anomaly_ratio = 20.0, .threshold_source = ThresholdSource::Pooled},
                              &eval.labels);
        CHECK(r.metrics->precision == 1.0);
        CHECK(r.metrics->recall == 1.0);
    }
    SUBCASE("no labels leaves metrics absent") {
        const auto r = detect::detect(zero, data, train_losses, {});
        CHECK_FALSE(r.metrics);
        CHECK(r.ground_truth.empty());
        CHECK(render_metrics_json(r).find("\"accuracy\": null") != std::string::npos);
    }
    SUBCASE("determinism and invariants") {
        const auto a = detect::detect(zero, data, train_losses, {}, &eval.labels);
        const auto b = detect::detect(zero, data, train_losses, {}, &eval.labels);
        CHECK(a.losses == b.losses);
        CHECK(a.predicted == b.predicted);
        CHECK(render_records_csv(a) == render_records_csv(b));
        REQUIRE(a.losses.size() == a.predicted.size());
        for (std::size_t i = 0; i < a.losses.size(); ++i) {
            CHECK(a.predicted[i] == (a.losses[i] > a.threshold));
            CHECK(a.losses[i] >= 0.0);
        }
    }
    SUBCASE("shape mismatch") {
        const ZeroPredictor wrong(len + 1, 1);
        CHECK_THROWS_AS(detect::detect(wrong, data, train_losses, {}), DimensionError);
        CHECK_THROWS_AS(detect::detect(zero, data, {}, {}), InputError);
    }
}

TEST_CASE("scoring averages overlapping windows per record") {
    Matrix m(4, 1);
    for (std::size_t i = 0; i < 4; ++i) m(i, 0) = static_cast<double>(i);
    const auto data = telemetry::window(m, {.seq_len = 2, .stride = 1});
    const auto s = score(ZeroPredictor(2, 1), data);
    CHECK(s.record_index == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(s.losses == LossVector{0.0, 1.0, 4.0, 9.0});
}

TEST_CASE("metrics json layout") {
    DetectionResult r;
    r.threshold = 0.5;
    r.anomaly_ratio = 20.0;
    r.losses = {0.1, 0.9};
    r.predicted = {false, true};
    r.ground_truth = {false, true};
    r.record_index = {0, 1};
    r.metrics = evaluate(r.predicted, r.ground_truth);
    const auto text = render_metrics_json(r);
    for (const char* key : {"accuracy", "precision", "recall", "f_score", "tp", "tn", "fp", "fn",
                            "threshold", "anomaly_ratio"}) {
        CHECK(text.find(std::string("\"") + key + "\"") != std::string::npos);
    }
    CHECK(render_records_csv(r) == "index,loss,predicted,truth\n0,0.1,0,0\n1,0.9,1,1\n");
}
