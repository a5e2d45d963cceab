#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uavguard/matrix.hpp"
#include "uavguard/predictor.hpp"
#include "uavguard/telemetry.hpp"

namespace uavguard::forecast {

// Defaults: seq_len 16, fcn 64, lr 0.02, batch 128, 3 epochs.
struct PredictorConfig {
    std::size_t seq_len = 16;
    std::size_t horizon = 1;   // output rows; equals seq_len for reconstruction
    std::size_t model_dim = 64; // carried in checkpoints; the two-layer net has no embedding
    std::size_t fcn_dim = 64;
    std::size_t epochs = 3;
    double learning_rate = 0.02;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;

    bool operator==(const PredictorConfig&) const = default;
};

struct EpochLoss {
    double train = 0.0;
    double val = 0.0;

    bool operator==(const EpochLoss&) const = default;
};

// Windowed two-layer perceptron:
//   flatten(window) -> W1 (fcn_dim x L*D) + b1 -> relu -> W2 (h*D x fcn_dim) + b2
// Parameters are stored flat in the order W1, b1, W2, b2 (row-major).
class MlpPredictor : public Predictor {
public:
    MlpPredictor(const PredictorConfig& config, std::size_t feature_count);

    std::size_t input_rows() const override { return config_.seq_len; }
    std::size_t output_rows() const override { return config_.horizon; }
    std::size_t feature_count() const override { return features_; }
    Matrix predict(const Matrix& window) const override;

    const PredictorConfig& config() const noexcept { return config_; }
    std::size_t input_size() const noexcept { return config_.seq_len * features_; }
    std::size_t output_size() const noexcept { return config_.horizon * features_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    const std::vector<EpochLoss>& history() const noexcept { return history_; }

    // Post-activation hidden layer for one window.
    std::vector<double> hidden(const Matrix& window) const;
    // Mean squared error of one sample.
    double loss(const Matrix& input, const Matrix& target) const;
    // Adds d(loss)/d(params) * scale into grad; returns the sample loss.
    double accumulate_gradient(const Matrix& input, const Matrix& target, std::span<double> grad,
                               double scale = 1.0) const;

    // Offsets of each parameter block inside parameters().
    std::size_t w1_offset() const noexcept { return 0; }
    std::size_t b1_offset() const noexcept { return config_.fcn_dim * input_size(); }
    std::size_t w2_offset() const noexcept { return b1_offset() + config_.fcn_dim; }
    std::size_t b2_offset() const noexcept { return w2_offset() + output_size() * config_.fcn_dim; }

    bool operator==(const MlpPredictor& other) const {
        return config_ == other.config_ && features_ == other.features_ &&
               params_ == other.params_ && history_ == other.history_;
    }

private:
    friend MlpPredictor train(MlpPredictor, const telemetry::WindowedDataset&,
                              const telemetry::WindowedDataset&);
    friend MlpPredictor parse_checkpoint(const std::string&);

    void check_window(const Matrix& window) const;

    PredictorConfig config_;
    std::size_t features_ = 0;
    std::vector<double> params_;
    std::vector<EpochLoss> history_;
};

// Seeded uniform(-s, s) initialization with s = 1 / sqrt(L * D).
MlpPredictor init_predictor(const PredictorConfig& config, std::size_t feature_count);

// Mini-batch gradient descent on mean squared error for config.epochs,
// with a seeded shuffle of sample order each epoch.
MlpPredictor train(MlpPredictor predictor, const telemetry::WindowedDataset& train_data,
                   const telemetry::WindowedDataset& val_data);

// Mean sample loss over a dataset.
double dataset_loss(const MlpPredictor& predictor, const telemetry::WindowedDataset& data);

// Repeats the last input row for every output row.
class PersistencePredictor : public Predictor {
public:
    PersistencePredictor(std::size_t seq_len, std::size_t horizon, std::size_t feature_count)
        : seq_len_(seq_len), horizon_(horizon), features_(feature_count) {}

    std::size_t input_rows() const override { return seq_len_; }
    std::size_t output_rows() const override { return horizon_; }
    std::size_t feature_count() const override { return features_; }
    Matrix predict(const Matrix& window) const override;

private:
    std::size_t seq_len_;
    std::size_t horizon_;
    std::size_t features_;
};

struct HorizonError {
    double mse = 0.0;
    double mae = 0.0;
};

struct EvalReport {
    double test_mse = 0.0;
    double test_mae = 0.0;
    std::vector<HorizonError> per_horizon; // one entry per forecast step
};

EvalReport evaluate_forecast(const Predictor& predictor, const telemetry::WindowedDataset& test);
std::string render_eval_report(const EvalReport& report);

// Gradient used by gradient_check; defaults to the analytic backward pass.
using GradientFn = std::function<void(const MlpPredictor&, const Matrix& input, const Matrix& target,
                                      std::span<double> grad)>;

// Largest relative error between the supplied gradient and central finite
// differences (step 1e-5) over a seeded subset of at most 100 parameters.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const MlpPredictor& predictor, const telemetry::Window& sample,
                      std::uint64_t seed = 0, const GradientFn& gradient = {});

void save_checkpoint(const MlpPredictor& predictor, const std::string& path);
std::string render_checkpoint(const MlpPredictor& predictor);
MlpPredictor parse_checkpoint(const std::string& body);
MlpPredictor load_checkpoint(const std::string& path);

} // namespace uavguard::forecast
