#include "uavguard/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::forecast {

namespace {

constexpr const char* kCheckpointMagic = "uavguard-mlp";
constexpr int kCheckpointVersion = 1;

void validate(const PredictorConfig& c, std::size_t features) {
    if (c.seq_len == 0 || c.horizon == 0 || c.fcn_dim == 0 || c.model_dim == 0 ||
        c.batch_size == 0 || features == 0) {
        throw ConfigError("predictor dimensions must be positive (seq_len, horizon, model_dim, "
                          "fcn_dim, batch_size, feature count)");
    }
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
        throw ConfigError("learning rate must be positive and finite");
    }
}

// Shared forward pass. Fills pre-activation z, hidden a and output y.
void forward(const MlpPredictor& m, std::span<const double> x, std::vector<double>& z,
             std::vector<double>& a, std::vector<double>& y) {
    const auto p = m.parameters();
    const std::size_t in = m.input_size();
    const std::size_t hid = m.config().fcn_dim;
    const std::size_t out = m.output_size();
    z.assign(hid, 0.0);
    a.assign(hid, 0.0);
    y.assign(out, 0.0);
    const double* w1 = p.data() + m.w1_offset();
    const double* b1 = p.data() + m.b1_offset();
    const double* w2 = p.data() + m.w2_offset();
    const double* b2 = p.data() + m.b2_offset();
    for (std::size_t h = 0; h < hid; ++h) {
        double s = b1[h];
        const double* row = w1 + h * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
        z[h] = s;
        a[h] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t o = 0; o < out; ++o) {
        double s = b2[o];
        const double* row = w2 + o * hid;
        for (std::size_t h = 0; h < hid; ++h) s += row[h] * a[h];
        y[o] = s;
    }
}

} // namespace

MlpPredictor::MlpPredictor(const PredictorConfig& config, std::size_t feature_count)
    : config_(config), features_(feature_count) {
    validate(config_, features_);
    const std::size_t in = input_size();
    const std::size_t out = output_size();
    params_.assign(config_.fcn_dim * in + config_.fcn_dim + out * config_.fcn_dim + out, 0.0);
}

void MlpPredictor::check_window(const Matrix& window) const {
    if (window.rows() != config_.seq_len || window.cols() != features_) {
        throw DimensionError("window is " + std::to_string(window.rows()) + "x" +
                             std::to_string(window.cols()) + ", predictor expects " +
                             std::to_string(config_.seq_len) + "x" + std::to_string(features_));
    }
}

Matrix MlpPredictor::predict(const Matrix& window) const {
    check_window(window);
    std::vector<double> z, a, y;
    forward(*this, window.flat(), z, a, y);
    return Matrix(config_.horizon, features_, std::move(y));
}

std::vector<double> MlpPredictor::hidden(const Matrix& window) const {
    check_window(window);
    std::vector<double> z, a, y;
    forward(*this, window.flat(), z, a, y);
    return a;
}

double MlpPredictor::loss(const Matrix& input, const Matrix& target) const {
    const Matrix y = predict(input);
    if (target.rows() != y.rows() || target.cols() != y.cols()) {
        throw DimensionError("target shape does not match predictor output");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y.flat()[i] - target.flat()[i];
        s += e * e;
    }
    return s / static_cast<double>(y.size());
}

double MlpPredictor::accumulate_gradient(const Matrix& input, const Matrix& target,
                                         std::span<double> grad, double scale) const {
    check_window(input);
    if (target.rows() != config_.horizon || target.cols() != features_) {
        throw DimensionError("target shape does not match predictor output");
    }
    if (grad.size() != params_.size()) {
        throw DimensionError("gradient buffer has the wrong size");
    }
    std::vector<double> z, a, y;
    const auto x = input.flat();
    forward(*this, x, z, a, y);

    const std::size_t in = input_size();
    const std::size_t hid = config_.fcn_dim;
    const std::size_t out = output_size();
    const double n = static_cast<double>(out);

    double loss_sum = 0.0;
    std::vector<double> dy(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double e = y[o] - target.flat()[o];
        loss_sum += e * e;
        dy[o] = 2.0 * e / n * scale;
    }

    double* g = grad.data();
    const double* w2 = params_.data() + w2_offset();
    std::vector<double> dz(hid, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        double* gw2 = g + w2_offset() + o * hid;
        const double* row = w2 + o * hid;
        for (std::size_t h = 0; h < hid; ++h) {
            gw2[h] += dy[o] * a[h];
            dz[h] += row[h] * dy[o];
        }
        g[b2_offset() + o] += dy[o];
    }
    for (std::size_t h = 0; h < hid; ++h) {
        if (z[h] <= 0.0) continue; // subgradient 0 at the kink
        double* gw1 = g + w1_offset() + h * in;
        for (std::size_t i = 0; i < in; ++i) gw1[i] += dz[h] * x[i];
        g[b1_offset() + h] += dz[h];
    }
    return loss_sum / n;
}

MlpPredictor init_predictor(const PredictorConfig& config, std::size_t feature_count) {
    MlpPredictor m(config, feature_count);
    const double s = 1.0 / std::sqrt(static_cast<double>(m.input_size()));
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& w : m.parameters()) w = dist(rng);
    return m;
}

double dataset_loss(const MlpPredictor& predictor, const telemetry::WindowedDataset& data) {
    if (data.empty()) {
        throw InputError("cannot compute the loss of an empty dataset");
    }
    double s = 0.0;
    for (const auto& w : data.windows) s += predictor.loss(w.input, w.target);
    return s / static_cast<double>(data.size());
}

MlpPredictor train(MlpPredictor predictor, const telemetry::WindowedDataset& train_data,
                   const telemetry::WindowedDataset& val_data) {
    if (train_data.empty() || val_data.empty()) {
        throw InputError("training and validation sets must be non-empty");
    }
    const auto& cfg = predictor.config_;
    for (const auto* ds : {&train_data, &val_data}) {
        if (ds->spec.seq_len != cfg.seq_len || ds->target_rows() != cfg.horizon ||
            ds->feature_count != predictor.features_) {
            throw DimensionError("dataset windows do not match the predictor configuration");
        }
    }

    // Shuffle stream is independent of the initialization stream.
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(predictor.params_.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(end - begin);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& w = train_data.windows[order[k]];
                batch_loss += predictor.accumulate_gradient(w.input, w.target, grad, scale);
            }
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1) +
                                      ", batch " + std::to_string(batch_no + 1));
            }
            epoch_loss += batch_loss;
            for (std::size_t i = 0; i < grad.size(); ++i) {
                predictor.params_[i] -= cfg.learning_rate * grad[i];
            }
        }
        EpochLoss rec;
        rec.train = epoch_loss / static_cast<double>(order.size());
        rec.val = dataset_loss(predictor, val_data);
        if (!std::isfinite(rec.val)) {
            throw DivergenceError("validation loss is not finite after epoch " +
                                  std::to_string(epoch + 1));
        }
        predictor.history_.push_back(rec);
    }
    return predictor;
}

Matrix PersistencePredictor::predict(const Matrix& window) const {
    if (window.rows() != seq_len_ || window.cols() != features_) {
        throw DimensionError("window shape does not match the persistence predictor");
    }
    Matrix out(horizon_, features_);
    for (std::size_t r = 0; r < horizon_; ++r) {
        for (std::size_t c = 0; c < features_; ++c) out(r, c) = window(seq_len_ - 1, c);
    }
    return out;
}

EvalReport evaluate_forecast(const Predictor& predictor, const telemetry::WindowedDataset& test) {
    if (test.empty()) {
        throw InputError("cannot evaluate on an empty test set");
    }
    const std::size_t rows = test.target_rows();
    const std::size_t d = test.feature_count;
    if (predictor.input_rows() != test.spec.seq_len || predictor.output_rows() != rows ||
        predictor.feature_count() != d) {
        throw DimensionError("predictor shape does not match the test windows");
    }
    EvalReport report;
    report.per_horizon.assign(rows, {});
    for (const auto& w : test.windows) {
        const Matrix y = predictor.predict(w.input);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                const double e = y(r, c) - w.target(r, c);
                report.per_horizon[r].mse += e * e;
                report.per_horizon[r].mae += std::abs(e);
            }
        }
    }
    const double per_step = static_cast<double>(test.size() * d);
    for (auto& h : report.per_horizon) {
        report.test_mse += h.mse;
        report.test_mae += h.mae;
        h.mse /= per_step;
        h.mae /= per_step;
    }
    report.test_mse /= per_step * static_cast<double>(rows);
    report.test_mae /= per_step * static_cast<double>(rows);
    return report;
}

std::string render_eval_report(const EvalReport& report) {
    std::string out;
    out += "test_mse=" + text::format_double(report.test_mse) + "\n";
    out += "test_mae=" + text::format_double(report.test_mae) + "\n";
    for (std::size_t i = 0; i < report.per_horizon.size(); ++i) {
        out += "horizon_" + std::to_string(i + 1) + "_mse=" +
               text::format_double(report.per_horizon[i].mse) + "\n";
        out += "horizon_" + std::to_string(i + 1) + "_mae=" +
               text::format_double(report.per_horizon[i].mae) + "\n";
    }
    return out;
}

double gradient_check(const MlpPredictor& predictor, const telemetry::Window& sample,
                      std::uint64_t seed, const GradientFn& gradient) {
    std::vector<double> analytic(predictor.parameter_count(), 0.0);
    if (gradient) {
        gradient(predictor, sample.input, sample.target, analytic);
    } else {
        predictor.accumulate_gradient(sample.input, sample.target, analytic);
    }

    std::vector<std::size_t> idx(predictor.parameter_count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), 100));

    constexpr double step = 1e-5;
    MlpPredictor probe = predictor;
    double worst = 0.0;
    for (const auto i : idx) {
        const double orig = probe.parameters()[i];
        probe.parameters()[i] = orig + step;
        const double up = probe.loss(sample.input, sample.target);
        probe.parameters()[i] = orig - step;
        const double down = probe.loss(sample.input, sample.target);
        probe.parameters()[i] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

std::string render_checkpoint(const MlpPredictor& m) {
    const auto& c = m.config();
    std::ostringstream out;
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
        << "seq_len " << c.seq_len << '\n'
        << "horizon " << c.horizon << '\n'
        << "model_dim " << c.model_dim << '\n'
        << "fcn_dim " << c.fcn_dim << '\n'
        << "epochs " << c.epochs << '\n'
        << "learning_rate " << text::format_double(c.learning_rate) << '\n'
        << "batch_size " << c.batch_size << '\n'
        << "seed " << c.seed << '\n'
        << "features " << m.feature_count() << '\n'
        << "history " << m.history().size() << '\n';
    for (const auto& h : m.history()) {
        out << text::format_double(h.train) << ' ' << text::format_double(h.val) << '\n';
    }
    out << "weights " << m.parameter_count() << '\n';
    for (const double w : m.parameters()) out << text::format_double(w) << '\n';
    return out.str();
}

MlpPredictor parse_checkpoint(const std::string& body) {
    std::istringstream in(body);
    auto fail = [](const std::string& why) -> MlpPredictor {
        throw ParseError("checkpoint: " + why);
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) return fail("bad magic");
    if (version != kCheckpointVersion) return fail("unsupported version " + std::to_string(version));

    auto read_field = [&](const char* name) -> std::string {
        std::string key, value;
        if (!(in >> key >> value) || key != name) {
            throw ParseError(std::string("checkpoint: expected '") + name + "'");
        }
        return value;
    };
    auto read_uint = [&](const char* name) {
        const auto v = text::to_uint(read_field(name));
        if (!v) throw ParseError(std::string("checkpoint: bad value for '") + name + "'");
        return static_cast<std::size_t>(*v);
    };
    auto read_real = [&](std::string_view token) {
        const auto v = text::to_double(token);
        if (!v) throw ParseError("checkpoint: bad number '" + std::string(token) + "'");
        return *v;
    };

    PredictorConfig c;
    c.seq_len = read_uint("seq_len");
    c.horizon = read_uint("horizon");
    c.model_dim = read_uint("model_dim");
    c.fcn_dim = read_uint("fcn_dim");
    c.epochs = read_uint("epochs");
    c.learning_rate = read_real(read_field("learning_rate"));
    c.batch_size = read_uint("batch_size");
    c.seed = read_uint("seed");
    const std::size_t features = read_uint("features");

    MlpPredictor m(c, features);
    const std::size_t hist = read_uint("history");
    for (std::size_t i = 0; i < hist; ++i) {
        std::string a, b;
        if (!(in >> a >> b)) return fail("truncated history");
        m.history_.push_back({read_real(a), read_real(b)});
    }
    const std::size_t count = read_uint("weights");
    if (count != m.params_.size()) {
        return fail("weight count " + std::to_string(count) + " does not match configuration (" +
                    std::to_string(m.params_.size()) + ")");
    }
    for (auto& w : m.params_) {
        std::string tok;
        if (!(in >> tok)) return fail("truncated weights");
        w = read_real(tok);
    }
    return m;
}

void save_checkpoint(const MlpPredictor& predictor, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    out << render_checkpoint(predictor);
}

MlpPredictor load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

} // namespace uavguard::forecast
