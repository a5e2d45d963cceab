#include "uavguard/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::telemetry {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool same_cell(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

// Slot lookup for the ten numeric non-timestamp columns.
template <class Record>
auto axis_slot(Record& r, std::string_view name) -> decltype(&r.gyro[0]) {
    if (name == "gyro_rad_0") return &r.gyro[0];
    if (name == "gyro_rad_1") return &r.gyro[1];
    if (name == "gyro_rad_2") return &r.gyro[2];
    if (name == "accelerometer_m_s2_0") return &r.accel[0];
    if (name == "accelerometer_m_s2_1") return &r.accel[1];
    if (name == "accelerometer_m_s2_2") return &r.accel[2];
    return nullptr;
}

template <class Record>
auto int_slot(Record& r, std::string_view name) -> decltype(&r.gyro_integral_dt) {
    if (name == "gyro_integral_dt") return &r.gyro_integral_dt;
    if (name == "accelerometer_timestamp_relative") return &r.accel_timestamp_relative;
    if (name == "accelerometer_integral_dt") return &r.accel_integral_dt;
    if (name == "accelerometer_clipping") return &r.accel_clipping;
    return nullptr;
}

[[noreturn]] void row_error(std::size_t line, const std::string& msg) {
    throw ParseError("row " + std::to_string(line) + ": " + msg);
}

std::int64_t parse_int_cell(std::string_view cell, std::size_t line, std::string_view column) {
    const auto v = text::to_int(cell);
    if (!v) {
        row_error(line, "non-integer value '" + std::string(text::trim(cell)) + "' in column " +
                            std::string(column));
    }
    return *v;
}

double parse_axis_cell(std::string_view cell, std::size_t line, std::string_view column) {
    if (text::trim(cell).empty()) {
        return kMissing;
    }
    const auto v = text::to_double(cell);
    if (!v) {
        row_error(line, "non-numeric value '" + std::string(text::trim(cell)) + "' in column " +
                            std::string(column));
    }
    return *v;
}

CsvWithLabels parse_impl(std::istream& in, bool allow_label) {
    CsvWithLabels out;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!text::trim(line).empty()) {
            break;
        }
    }
    if (line_no == 0 || text::trim(line).empty()) {
        throw ParseError("missing header row");
    }

    const auto header = text::split(text::trim(line), ',');
    std::size_t expected = kCsvColumns.size();
    if (header.size() == kCsvColumns.size() + 1 && allow_label &&
        text::trim(header.back()) == "label") {
        out.has_labels = true;
        expected += 1;
    }
    if (header.size() != expected) {
        throw ParseError("row " + std::to_string(line_no) + ": header has " +
                         std::to_string(header.size()) + " columns, expected " +
                         std::to_string(expected));
    }
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        if (text::trim(header[i]) != kCsvColumns[i]) {
            throw ParseError("row " + std::to_string(line_no) + ": header column " +
                             std::to_string(i + 1) + " is '" + std::string(text::trim(header[i])) +
                             "', expected '" + std::string(kCsvColumns[i]) + "'");
        }
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        const auto cells = text::split(text::trim(line), ',');
        if (cells.size() != expected) {
            row_error(line_no, "has " + std::to_string(cells.size()) + " columns, expected " +
                                   std::to_string(expected));
        }
        SensorRecord r;
        r.timestamp = parse_int_cell(cells[0], line_no, kCsvColumns[0]);
        for (std::size_t i = 1; i < kCsvColumns.size(); ++i) {
            if (double* slot = axis_slot(r, kCsvColumns[i])) {
                *slot = parse_axis_cell(cells[i], line_no, kCsvColumns[i]);
            } else {
                *int_slot(r, kCsvColumns[i]) = parse_int_cell(cells[i], line_no, kCsvColumns[i]);
            }
        }
        if (r.gyro_integral_dt <= 0 || r.accel_integral_dt <= 0) {
            row_error(line_no, "integral dt must be positive");
        }
        if (r.accel_clipping < 0) {
            row_error(line_no, "accelerometer_clipping must be non-negative");
        }
        if (!out.series.records.empty() && r.timestamp <= out.series.records.back().timestamp) {
            throw OrderingError("row " + std::to_string(line_no) + ": timestamp " +
                                std::to_string(r.timestamp) + " does not increase past " +
                                std::to_string(out.series.records.back().timestamp));
        }
        if (out.has_labels) {
            const auto label = text::trim(cells.back());
            if (label != "0" && label != "1") {
                row_error(line_no, "label must be 0 or 1");
            }
            out.labels.push_back(label == "1");
        }
        out.series.records.push_back(r);
    }
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return in;
}

} // namespace

bool SensorRecord::operator==(const SensorRecord& o) const {
    for (std::size_t i = 0; i < 3; ++i) {
        if (!same_cell(gyro[i], o.gyro[i]) || !same_cell(accel[i], o.accel[i])) {
            return false;
        }
    }
    return timestamp == o.timestamp && gyro_integral_dt == o.gyro_integral_dt &&
           accel_timestamp_relative == o.accel_timestamp_relative &&
           accel_integral_dt == o.accel_integral_dt && accel_clipping == o.accel_clipping;
}

std::vector<std::string> default_feature_names() {
    return {kAxisFeatures.begin(), kAxisFeatures.end()};
}

bool is_feature_name(std::string_view name) {
    return name != "timestamp" &&
           std::find(kCsvColumns.begin(), kCsvColumns.end(), name) != kCsvColumns.end();
}

double feature_value(const SensorRecord& record, std::string_view name) {
    if (const double* slot = axis_slot(record, name)) {
        return *slot;
    }
    if (const std::int64_t* slot = int_slot(record, name)) {
        return static_cast<double>(*slot);
    }
    throw ConfigError("unknown feature '" + std::string(name) + "'");
}

void set_feature_value(SensorRecord& record, std::string_view name, double value) {
    if (double* slot = axis_slot(record, name)) {
        *slot = value;
        return;
    }
    if (std::int64_t* slot = int_slot(record, name)) {
        *slot = static_cast<std::int64_t>(std::llround(value));
        return;
    }
    throw ConfigError("unknown feature '" + std::string(name) + "'");
}

Matrix TelemetrySeries::feature_matrix() const {
    Matrix m(records.size(), feature_names.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t j = 0; j < feature_names.size(); ++j) {
            m(i, j) = feature_value(records[i], feature_names[j]);
        }
    }
    return m;
}

std::vector<double> TelemetrySeries::column(std::string_view name) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(feature_value(r, name));
    }
    return out;
}

void TelemetrySeries::validate_order() const {
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].timestamp <= records[i - 1].timestamp) {
            throw OrderingError("record " + std::to_string(i) + ": timestamp " +
                                std::to_string(records[i].timestamp) + " does not increase past " +
                                std::to_string(records[i - 1].timestamp));
        }
    }
}

TelemetrySeries parse_sensor_csv(std::istream& in) {
    return parse_impl(in, false).series;
}

TelemetrySeries parse_sensor_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_sensor_csv(in);
}

TelemetrySeries read_sensor_csv(const std::string& path) {
    auto in = open_input(path);
    return parse_sensor_csv(in);
}

CsvWithLabels parse_labeled_csv(std::istream& in) {
    return parse_impl(in, true);
}

CsvWithLabels read_labeled_csv(const std::string& path) {
    auto in = open_input(path);
    return parse_labeled_csv(in);
}

void write_sensor_csv(std::ostream& out, const TelemetrySeries& series,
                      const std::vector<bool>* labels) {
    if (labels && labels->size() != series.size()) {
        throw DimensionError("label count does not match record count");
    }
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        out << (i ? "," : "") << kCsvColumns[i];
    }
    if (labels) {
        out << ",label";
    }
    out << '\n';
    auto cell = [](double v) { return std::isnan(v) ? std::string() : text::format_double(v); };
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& r = series.records[i];
        out << r.timestamp << ',' << cell(r.gyro[0]) << ',' << cell(r.gyro[1]) << ','
            << cell(r.gyro[2]) << ',' << r.gyro_integral_dt << ',' << r.accel_timestamp_relative
            << ',' << cell(r.accel[0]) << ',' << cell(r.accel[1]) << ',' << cell(r.accel[2]) << ','
            << r.accel_integral_dt << ',' << r.accel_clipping;
        if (labels) {
            out << ',' << ((*labels)[i] ? '1' : '0');
        }
        out << '\n';
    }
}

std::string to_csv(const TelemetrySeries& series, const std::vector<bool>* labels) {
    std::ostringstream out;
    write_sensor_csv(out, series, labels);
    return out.str();
}

// ---- cleaning -------------------------------------------------------------

ImputePolicy parse_impute_policy(std::string_view name) {
    if (name == "forward-fill" || name == "ffill") return ImputePolicy::ForwardFill;
    if (name == "linear") return ImputePolicy::Linear;
    throw ConfigError("unknown imputation policy '" + std::string(name) + "'");
}

std::size_t count_missing(const TelemetrySeries& series) {
    std::size_t n = 0;
    for (const auto& r : series.records) {
        for (std::size_t k = 0; k < 3; ++k) {
            n += std::isnan(r.gyro[k]) + std::isnan(r.accel[k]);
        }
    }
    return n;
}

TelemetrySeries impute_missing(const TelemetrySeries& series, ImputePolicy policy) {
    TelemetrySeries out = series;
    auto& recs = out.records;
    const std::size_t n = recs.size();

    for (const auto name : kAxisFeatures) {
        auto get = [&](std::size_t i) { return feature_value(recs[i], name); };
        auto set = [&](std::size_t i, double v) { set_feature_value(recs[i], name, v); };

        if (policy == ImputePolicy::ForwardFill) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isnan(get(i))) continue;
                if (i == 0) {
                    throw ImputationError("column " + std::string(name) +
                                          ": first record is missing and has no predecessor");
                }
                set(i, get(i - 1));
            }
            continue;
        }

        // Linear in time between the nearest observed neighbours; edges take
        // the nearest observed value.
        std::size_t prev = n; // index of last observed cell, n = none yet
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(get(i))) continue;
            if (prev == n && i > 0) {
                for (std::size_t j = 0; j < i; ++j) set(j, get(i));
            } else if (prev != n && i > prev + 1) {
                const double t0 = static_cast<double>(recs[prev].timestamp);
                const double t1 = static_cast<double>(recs[i].timestamp);
                const double v0 = get(prev);
                const double v1 = get(i);
                for (std::size_t j = prev + 1; j < i; ++j) {
                    const double w = (static_cast<double>(recs[j].timestamp) - t0) / (t1 - t0);
                    set(j, v0 + w * (v1 - v0));
                }
            }
            prev = i;
        }
        if (prev == n && n > 0) {
            throw ImputationError("column " + std::string(name) + " has no observed values");
        }
        for (std::size_t j = prev + 1; j < n; ++j) set(j, get(prev));
    }
    return out;
}

namespace {

void require_axis(const std::string& name) {
    if (std::find(kAxisFeatures.begin(), kAxisFeatures.end(), name) == kAxisFeatures.end()) {
        throw ConfigError("feature '" + name + "' is not a gyro/accelerometer axis and cannot be scaled in place");
    }
}

std::size_t stats_index(const NormStats& stats, const std::string& name) {
    const auto it = std::find(stats.feature_names.begin(), stats.feature_names.end(), name);
    if (it == stats.feature_names.end()) {
        throw DimensionError("normalization stats lack feature '" + name + "'");
    }
    return static_cast<std::size_t>(it - stats.feature_names.begin());
}

} // namespace

NormStats fit_normalize(const TelemetrySeries& series) {
    if (series.empty()) {
        throw InputError("cannot fit normalization on an empty series");
    }
    NormStats stats;
    stats.feature_names = series.feature_names;
    const double n = static_cast<double>(series.size());
    for (const auto& name : series.feature_names) {
        double sum = 0.0;
        for (const auto& r : series.records) sum += feature_value(r, name);
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : series.records) {
            const double d = feature_value(r, name) - mean;
            ss += d * d;
        }
        stats.mean.push_back(mean);
        stats.std.push_back(std::sqrt(ss / n));
    }
    return stats;
}

TelemetrySeries apply_normalize(const TelemetrySeries& series, const NormStats& stats) {
    TelemetrySeries out = series;
    for (const auto& name : series.feature_names) {
        require_axis(name);
        const auto k = stats_index(stats, name);
        const double mean = stats.mean[k];
        const double sd = stats.std[k];
        for (auto& r : out.records) {
            const double v = feature_value(r, name);
            set_feature_value(r, name, sd < kZeroVarianceEpsilon ? 0.0 : (v - mean) / sd);
        }
    }
    return out;
}

Matrix normalized_matrix(const TelemetrySeries& series, const NormStats& stats) {
    Matrix m = series.feature_matrix();
    for (std::size_t j = 0; j < series.feature_names.size(); ++j) {
        const auto k = stats_index(stats, series.feature_names[j]);
        const double mean = stats.mean[k];
        const double sd = stats.std[k];
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, j) = sd < kZeroVarianceEpsilon ? 0.0 : (m(i, j) - mean) / sd;
        }
    }
    return m;
}

TelemetrySeries denormalize(const TelemetrySeries& series, const NormStats& stats) {
    TelemetrySeries out = series;
    for (const auto& name : series.feature_names) {
        require_axis(name);
        const auto k = stats_index(stats, name);
        const double mean = stats.mean[k];
        const double sd = stats.std[k];
        for (auto& r : out.records) {
            const double z = feature_value(r, name);
            set_feature_value(r, name, sd < kZeroVarianceEpsilon ? mean : z * sd + mean);
        }
    }
    return out;
}

std::string render_norm_stats(const NormStats& stats) {
    std::string out = "feature,mean,std\n";
    for (std::size_t i = 0; i < stats.feature_names.size(); ++i) {
        out += stats.feature_names[i] + "," + text::format_double(stats.mean[i]) + "," +
               text::format_double(stats.std[i]) + "\n";
    }
    return out;
}

NormStats parse_norm_stats(std::string_view body) {
    NormStats stats;
    const auto lines = text::split(body, '\n');
    if (lines.empty() || text::trim(lines[0]) != "feature,mean,std") {
        throw ParseError("normalization stats: bad header");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        const auto cells = text::split(text::trim(lines[i]), ',');
        const auto mean = cells.size() == 3 ? text::to_double(cells[1]) : std::nullopt;
        const auto sd = cells.size() == 3 ? text::to_double(cells[2]) : std::nullopt;
        if (!mean || !sd) {
            throw ParseError("normalization stats: malformed line " + std::to_string(i + 1));
        }
        stats.feature_names.emplace_back(text::trim(cells[0]));
        stats.mean.push_back(*mean);
        stats.std.push_back(*sd);
    }
    return stats;
}

// ---- splitting ------------------------------------------------------------

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
    for (const double r : {spec.train, spec.val, spec.test}) {
        if (!(r > 0.0 && r < 1.0)) {
            throw ConfigError("split ratios must each lie in (0, 1)");
        }
    }
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1");
    }
    if (n < 3) {
        throw ConfigError("need at least 3 records to split, got " + std::to_string(n));
    }
    const double total = static_cast<double>(n);
    // The small slack keeps exact products like 10 * 0.7 from flooring down.
    auto part = [&](double r) { return static_cast<std::size_t>(std::floor(total * r + 1e-9)); };
    SplitSizes s;
    s.val = part(spec.val);
    s.test = part(spec.test);
    s.train = n - s.val - s.test;
    if (s.train == 0 || s.val == 0 || s.test == 0) {
        throw ConfigError("split of " + std::to_string(n) + " records leaves an empty subset (" +
                          std::to_string(s.train) + "," + std::to_string(s.val) + "," +
                          std::to_string(s.test) + ")");
    }
    return s;
}

SplitResult split(const TelemetrySeries& series, const SplitSpec& spec) {
    const auto sizes = split_sizes(series.size(), spec);
    auto slice = [&](std::size_t from, std::size_t count) {
        TelemetrySeries s;
        s.feature_names = series.feature_names;
        s.records.assign(series.records.begin() + static_cast<std::ptrdiff_t>(from),
                         series.records.begin() + static_cast<std::ptrdiff_t>(from + count));
        return s;
    };
    return {slice(0, sizes.train), slice(sizes.train, sizes.val),
            slice(sizes.train + sizes.val, sizes.test)};
}

// ---- windowing ------------------------------------------------------------

std::size_t window_count(std::size_t n, const WindowSpec& spec) {
    if (spec.seq_len == 0 || spec.stride == 0) {
        throw ConfigError("sequence length and stride must be positive");
    }
    const bool forecast = spec.mode == WindowMode::Forecast;
    if (forecast && spec.horizon == 0) {
        throw ConfigError("forecast horizon must be positive");
    }
    const std::size_t need = spec.seq_len + (forecast ? spec.horizon : 0);
    if (n < need) {
        throw SizingError("series of " + std::to_string(n) + " records is too short: need at least " +
                          std::to_string(need));
    }
    return (n - need) / spec.stride + 1;
}

WindowedDataset window(const Matrix& data, const WindowSpec& spec) {
    const std::size_t count = window_count(data.rows(), spec);
    const std::size_t d = data.cols();
    WindowedDataset out;
    out.spec = spec;
    out.feature_count = d;
    out.windows.reserve(count);

    auto rows = [&](std::size_t from, std::size_t len) {
        Matrix m(len, d);
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t j = 0; j < d; ++j) m(i, j) = data(from + i, j);
        }
        return m;
    };
    for (std::size_t w = 0; w < count; ++w) {
        Window win;
        win.start = w * spec.stride;
        win.input = rows(win.start, spec.seq_len);
        if (spec.mode == WindowMode::Reconstruction) {
            win.target_start = win.start;
            win.target = win.input;
        } else {
            win.target_start = win.start + spec.seq_len;
            win.target = rows(win.target_start, spec.horizon);
        }
        out.windows.push_back(std::move(win));
    }
    return out;
}

WindowedDataset window(const TelemetrySeries& series, const WindowSpec& spec) {
    return window(series.feature_matrix(), spec);
}

// ---- synthetic missions ---------------------------------------------------

TelemetrySeries generate_mission(const MissionParams& params, std::uint64_t seed) {
    struct Axis {
        double offset;
        double amplitude;
        double period; // in records
    };
    // Hover-like flight: small body rates, gravity on the z accelerometer.
    constexpr std::array<Axis, 6> axes = {{
        {0.0, 0.010, 211.0},
        {0.0, 0.012, 307.0},
        {0.0, 0.006, 173.0},
        {0.02, 0.050, 251.0},
        {-0.01, 0.040, 397.0},
        {-9.81, 0.030, 331.0},
    }};

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::array<double, 6> phase{};
    for (auto& p : phase) p = phase_dist(rng);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::bernoulli_distribution missing(std::clamp(params.missing_fraction, 0.0, 1.0));

    TelemetrySeries series;
    series.records.reserve(params.records);
    for (std::size_t i = 0; i < params.records; ++i) {
        SensorRecord r;
        r.timestamp = params.start_timestamp + static_cast<std::int64_t>(i) * params.cadence_us;
        r.gyro_integral_dt = params.cadence_us;
        r.accel_integral_dt = params.cadence_us;
        const double t = static_cast<double>(i);
        for (std::size_t k = 0; k < 6; ++k) {
            const auto& a = axes[k];
            double v = a.offset + a.amplitude * std::sin(2.0 * std::numbers::pi * t / a.period + phase[k]) +
                       params.noise_fraction * a.amplitude * noise(rng);
            if (params.missing_fraction > 0.0 && missing(rng)) {
                v = kMissing;
            }
            (k < 3 ? r.gyro[k] : r.accel[k - 3]) = v;
        }
        series.records.push_back(r);
    }
    return series;
}

} // namespace uavguard::telemetry
