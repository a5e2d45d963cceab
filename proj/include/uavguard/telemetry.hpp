#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "uavguard/matrix.hpp"

namespace uavguard::telemetry {

// One row of an IMU sensor export (PX4 sensor_combined layout).
// Axis values may hold NaN to mark a missing cell until imputed.
struct SensorRecord {
    std::int64_t timestamp = 0; // microseconds
    std::array<double, 3> gyro{};  // rad/s
    std::int64_t gyro_integral_dt = 0; // microseconds
    std::int64_t accel_timestamp_relative = 0; // microseconds
    std::array<double, 3> accel{}; // m/s^2
    std::int64_t accel_integral_dt = 0; // microseconds
    std::int64_t accel_clipping = 0;

    bool operator==(const SensorRecord& other) const;
};

// Column names of the CSV header, in file order.
inline constexpr std::array<std::string_view, 11> kCsvColumns = {
    "timestamp",
    "gyro_rad_0",
    "gyro_rad_1",
    "gyro_rad_2",
    "gyro_integral_dt",
    "accelerometer_timestamp_relative",
    "accelerometer_m_s2_0",
    "accelerometer_m_s2_1",
    "accelerometer_m_s2_2",
    "accelerometer_integral_dt",
    "accelerometer_clipping",
};

// Gyro and accelerometer axes: the modeled features by default.
inline constexpr std::array<std::string_view, 6> kAxisFeatures = {
    "gyro_rad_0",           "gyro_rad_1",           "gyro_rad_2",
    "accelerometer_m_s2_0", "accelerometer_m_s2_1", "accelerometer_m_s2_2",
};

std::vector<std::string> default_feature_names();

// True for any numeric column other than the timestamp.
bool is_feature_name(std::string_view name);
double feature_value(const SensorRecord& record, std::string_view name);
void set_feature_value(SensorRecord& record, std::string_view name, double value);

struct TelemetrySeries {
    std::vector<SensorRecord> records;
    std::vector<std::string> feature_names = default_feature_names();

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    std::size_t feature_count() const noexcept { return feature_names.size(); }

    // N x D matrix over feature_names.
    Matrix feature_matrix() const;
    std::vector<double> column(std::string_view name) const;
    // Throws OrderingError unless timestamps strictly increase.
    void validate_order() const;

    bool operator==(const TelemetrySeries&) const = default;
};

TelemetrySeries parse_sensor_csv(std::istream& in);
TelemetrySeries parse_sensor_csv(std::string_view text);
TelemetrySeries read_sensor_csv(const std::string& path);

// Shortest round-trip formatting; missing cells become empty fields.
// When labels is non-null a trailing `label` column (0/1) is written.
void write_sensor_csv(std::ostream& out, const TelemetrySeries& series,
                      const std::vector<bool>* labels = nullptr);
std::string to_csv(const TelemetrySeries& series, const std::vector<bool>* labels = nullptr);

// Parses a CSV that carries a trailing `label` column.
struct CsvWithLabels {
    TelemetrySeries series;
    std::vector<bool> labels;
    bool has_labels = false;
};
CsvWithLabels parse_labeled_csv(std::istream& in);
CsvWithLabels read_labeled_csv(const std::string& path);

// ---- cleaning -------------------------------------------------------------

enum class ImputePolicy { ForwardFill, Linear };

ImputePolicy parse_impute_policy(std::string_view name);
std::size_t count_missing(const TelemetrySeries& series);
TelemetrySeries impute_missing(const TelemetrySeries& series, ImputePolicy policy);

struct NormStats {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> std; // population standard deviation

    bool operator==(const NormStats&) const = default;
};

inline constexpr double kZeroVarianceEpsilon = 1e-12;

NormStats fit_normalize(const TelemetrySeries& series);
// Integer columns round on write; use normalized_matrix to model them.
TelemetrySeries apply_normalize(const TelemetrySeries& series, const NormStats& stats);
// Scaled feature matrix (records x feature_names) without touching records.
Matrix normalized_matrix(const TelemetrySeries& series, const NormStats& stats);
TelemetrySeries denormalize(const TelemetrySeries& series, const NormStats& stats);

std::string render_norm_stats(const NormStats& stats);
NormStats parse_norm_stats(std::string_view text);

// ---- splitting ------------------------------------------------------------

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

struct SplitResult {
    TelemetrySeries train;
    TelemetrySeries val;
    TelemetrySeries test;
};

// val and test get floor(N * ratio); the remainder goes to train.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);
SplitResult split(const TelemetrySeries& series, const SplitSpec& spec);

// ---- windowing ------------------------------------------------------------

enum class WindowMode { Reconstruction, Forecast };

struct WindowSpec {
    std::size_t seq_len = 1;
    std::size_t stride = 1;
    WindowMode mode = WindowMode::Reconstruction;
    std::size_t horizon = 0; // forecast mode only
};

struct Window {
    std::size_t start = 0;        // first input row
    std::size_t target_start = 0; // first target row
    Matrix input;                 // seq_len x D
    Matrix target;                // seq_len x D (reconstruction) or horizon x D
};

struct WindowedDataset {
    WindowSpec spec;
    std::size_t feature_count = 0;
    std::vector<Window> windows;

    std::size_t size() const noexcept { return windows.size(); }
    bool empty() const noexcept { return windows.empty(); }
    std::size_t target_rows() const noexcept {
        return spec.mode == WindowMode::Reconstruction ? spec.seq_len : spec.horizon;
    }
};

std::size_t window_count(std::size_t n, const WindowSpec& spec);
WindowedDataset window(const Matrix& data, const WindowSpec& spec);
WindowedDataset window(const TelemetrySeries& series, const WindowSpec& spec);

// ---- synthetic missions ---------------------------------------------------

struct MissionParams {
    std::size_t records = 20000;
    std::int64_t start_timestamp = 212000;
    std::int64_t cadence_us = 4000;
    double noise_fraction = 0.05;  // noise std relative to each axis amplitude
    double missing_fraction = 0.0; // probability an axis cell is left empty
};

// Seeded sinusoid-plus-noise flight over the six axes.
TelemetrySeries generate_mission(const MissionParams& params, std::uint64_t seed);

} // namespace uavguard::telemetry
