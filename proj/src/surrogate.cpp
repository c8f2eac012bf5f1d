#include "srcloc/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "srcloc/dataset.hpp"
#include "srcloc/errors.hpp"
#include "srcloc/rng.hpp"

namespace srcloc::nn {

InputScaling InputScaling::unit_square(double t_end) {
    InputScaling s;
    s.scale[4] = 2.0 / t_end;
    s.offset[4] = -1.0;
    return s;
}

std::size_t Parameters::size() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

double& Parameters::at(std::size_t flat) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const auto nw = static_cast<std::size_t>(weights[l].size());
        if (flat < nw) return weights[l].data()[flat];
        flat -= nw;
        const auto nb = static_cast<std::size_t>(biases[l].size());
        if (flat < nb) return biases[l].data()[flat];
        flat -= nb;
    }
    throw std::out_of_range("parameter index out of range");
}

double Parameters::at(std::size_t flat) const { return const_cast<Parameters*>(this)->at(flat); }

void Parameters::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

bool Parameters::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
}

Mlp Mlp::create(std::vector<int> dims, std::vector<SkipConnection> skips, std::uint64_t seed) {
    Mlp net;
    net.dims = std::move(dims);
    net.skips = std::move(skips);
    if (net.dims.size() < 2) throw ConfigError("model.dims", "need at least input and output layers");
    Rng rng = Rng::stream(seed, "init");
    for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
        const int fan_in = net.dims[l];
        const int fan_out = net.dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
        }
        net.params.weights.push_back(std::move(w));
        net.params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    net.validate();
    return net;
}

Mlp Mlp::standard(std::uint64_t seed) {
    return create({kInputDim, 100, 100, 100, 100, 100, 100, 1}, {{1, 3}, {3, 5}}, seed);
}

void Mlp::validate() const {
    if (dims.size() < 2 || dims.front() != kInputDim || dims.back() != 1) {
        throw ConfigError("model.dims", "must start with 5 inputs and end with 1 output");
    }
    for (int d : dims) {
        if (d < 1) throw ConfigError("model.dims", "layer widths must be >= 1");
    }
    const int hidden = hidden_layers();
    for (const auto& s : skips) {
        if (s.from < 1 || s.to > hidden || s.from >= s.to) {
            throw ConfigError("model.skips", "skip must join hidden layers 1 <= from < to <= " + std::to_string(hidden));
        }
        if (dims[s.from] != dims[s.to]) throw ConfigError("model.skips", "skip must join layers of equal width");
    }
    if (params.weights.size() != dims.size() - 1 || params.biases.size() != dims.size() - 1) {
        throw ConfigError("model.params", "layer count does not match dims");
    }
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (params.weights[l].rows() != dims[l + 1] || params.weights[l].cols() != dims[l] ||
            params.biases[l].size() != dims[l + 1]) {
            throw ConfigError("model.params", "layer " + std::to_string(l) + " has the wrong shape");
        }
    }
    if (!params.all_finite()) throw ConfigError("model.params", "non-finite parameter");
}

Eigen::ArrayXXd fast_tanh(const Eigen::ArrayXXd& z) {
    return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

Eigen::MatrixXd apply_scaling(const InputScaling& scaling, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != kInputDim) throw ConfigError("inputs", "expected 5 rows");
    Eigen::MatrixXd out(inputs.rows(), inputs.cols());
    for (int r = 0; r < kInputDim; ++r) {
        out.row(r) = (inputs.row(r).array() * scaling.scale[r] + scaling.offset[r]).matrix();
    }
    return out;
}

namespace {

// Activations h[0] (input) .. h[H] (last hidden) and the 1 x N output.
struct ForwardPass {
    std::vector<Eigen::MatrixXd> h;
    Eigen::MatrixXd out;
};

ForwardPass run_forward(const Mlp& net, const Eigen::MatrixXd& x) {
    const int hidden = net.hidden_layers();
    ForwardPass f;
    f.h.resize(static_cast<std::size_t>(hidden) + 1);
    f.h[0] = x;
    for (int k = 1; k <= hidden + 1; ++k) {
        Eigen::MatrixXd z = net.params.weights[k - 1] * f.h[k - 1];
        z.colwise() += net.params.biases[k - 1];
        for (const auto& s : net.skips) {
            if (s.to == k) z += f.h[s.from];
        }
        if (k <= hidden) {
            f.h[k] = fast_tanh(z.array()).matrix();
        } else {
            f.out = std::move(z);
        }
    }
    return f;
}

} // namespace

Eigen::VectorXd forward_scaled(const Mlp& net, const Eigen::MatrixXd& scaled_inputs) {
    return run_forward(net, scaled_inputs).out.row(0).transpose();
}

Eigen::VectorXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
    return forward_scaled(net, apply_scaling(net.scaling, inputs));
}

double forward(const Mlp& net, std::span<const double, kInputDim> input) {
    Eigen::MatrixXd x(kInputDim, 1);
    for (int r = 0; r < kInputDim; ++r) x(r, 0) = input[static_cast<std::size_t>(r)];
    return forward_batch(net, x)(0);
}

LossAndGradient loss_and_gradient_scaled(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.cols();
    if (n == 0 || y.size() != n) throw ConfigError("batch", "inputs and targets must be nonempty and aligned");
    const int hidden = net.hidden_layers();
    const ForwardPass f = run_forward(net, x);

    LossAndGradient out;
    const Eigen::RowVectorXd residual = f.out.row(0) - y.transpose();
    out.mse = residual.squaredNorm() / static_cast<double>(n);

    out.grad.weights.resize(net.params.weights.size());
    out.grad.biases.resize(net.params.biases.size());
    std::vector<Eigen::MatrixXd> delta(static_cast<std::size_t>(hidden) + 2);
    delta[static_cast<std::size_t>(hidden) + 1] = (2.0 / static_cast<double>(n)) * residual;
    for (int k = hidden + 1; k >= 1; --k) {
        const Eigen::MatrixXd& d = delta[k];
        out.grad.weights[k - 1].noalias() = d * f.h[k - 1].transpose();
        out.grad.biases[k - 1] = d.rowwise().sum();
        if (k - 1 < 1) continue;
        Eigen::MatrixXd g = net.params.weights[k - 1].transpose() * d;
        for (const auto& s : net.skips) {
            if (s.from == k - 1) g += delta[s.to];
        }
        delta[k - 1] = (g.array() * (1.0 - f.h[k - 1].array().square())).matrix();
    }
    return out;
}

LossAndGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
    return loss_and_gradient_scaled(net, apply_scaling(net.scaling, inputs), targets);
}

double mse(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
    if (targets.size() == 0) throw ConfigError("samples", "empty sample set");
    return (forward_batch(net, inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

double TrainConfig::learning_rate_at(int epoch) const {
    if (decay_every <= 0) return learning_rate;
    return learning_rate * std::pow(decay_gamma, epoch / decay_every);
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.lr", "must be finite and >= 0");
    if (!(decay_gamma > 0.0 && decay_gamma <= 1.0)) throw ConfigError("train.decay_gamma", "must lie in (0, 1]");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (patience < 0) throw ConfigError("train.patience", "must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("train.epsilon", "must be > 0");
}

namespace {

double scaled_mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    // Chunked to bound the activation memory on large sets.
    constexpr Eigen::Index kChunk = 4096;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); c += kChunk) {
        const Eigen::Index m = std::min(kChunk, x.cols() - c);
        sum += (forward_scaled(net, x.middleCols(c, m)) - y.segment(c, m)).squaredNorm();
    }
    return sum / static_cast<double>(x.cols());
}

class AdamState {
public:
    explicit AdamState(const Parameters& shape) : m_(shape), v_(shape) {
        m_.set_zero();
        v_.set_zero();
    }

    void update(Parameters& p, const Parameters& g, const TrainConfig& cfg, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg.beta2, t_);
        auto apply = [&](auto& param, const auto& grad, auto& m, auto& v) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
            param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
        };
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            apply(p.weights[l], g.weights[l], m_.weights[l], v_.weights[l]);
            apply(p.biases[l], g.biases[l], m_.biases[l], v_.biases[l]);
        }
    }

private:
    Parameters m_;
    Parameters v_;
    long long t_ = 0;
};

void sgd_update(Parameters& p, const Parameters& g, double lr) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        p.weights[l] -= lr * g.weights[l];
        p.biases[l] -= lr * g.biases[l];
    }
}

} // namespace

TrainResult train(Mlp net, const Samples& train_data, const Samples& validation, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    net.validate();
    if (train_data.size() == 0) throw ConfigError("train", "empty training set");
    if (validation.size() == 0) throw ConfigError("train", "empty validation set");

    const Eigen::MatrixXd x_train = apply_scaling(net.scaling, train_data.inputs);
    const Eigen::MatrixXd x_val = apply_scaling(net.scaling, validation.inputs);
    const Eigen::Index n = train_data.size();

    const double initial_loss = scaled_mse(net, x_train, train_data.targets);
    double best_val = scaled_mse(net, x_val, validation.targets);

    TrainResult result;
    Parameters best = net.params;
    AdamState adam(net.params);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    int stale = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate_at(epoch);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng = Rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n - start);
            const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + m);
            const Eigen::MatrixXd xb = x_train(Eigen::all, idx);
            const Eigen::VectorXd yb = train_data.targets(idx);
            const LossAndGradient lg = loss_and_gradient_scaled(net, xb, yb);
            loss_sum += lg.mse * static_cast<double>(m);
            if (cfg.optimizer == Optimizer::Adam) {
                adam.update(net.params, lg.grad, cfg, lr);
            } else {
                sgd_update(net.params, lg.grad, lr);
            }
        }
        const double train_mse = loss_sum / static_cast<double>(n);
        if (!std::isfinite(train_mse) || train_mse > 1e3 * initial_loss) {
            throw DivergenceError("epoch " + std::to_string(epoch) + " loss " + std::to_string(train_mse) +
                                  " vs initial " + std::to_string(initial_loss));
        }

        const double val = scaled_mse(net, x_val, validation.targets);
        if (val < best_val) {
            best_val = val;
            best = net.params;
            result.best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        EpochStats stats{epoch, lr, train_mse, val, best_val};
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
        if (cfg.patience > 0 && stale >= cfg.patience) break;
    }

    net.params = std::move(best);
    result.sigma1_sq = scaled_mse(net, x_val, validation.targets);
    net.sigma1_sq = result.sigma1_sq;
    result.net = std::move(net);
    return result;
}

namespace {

constexpr const char* kModelMagic = "srcloc-mlp";
constexpr int kModelVersion = 1;

class TokenReader {
public:
    TokenReader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

    std::string word() {
        std::string w;
        if (!(in_ >> w)) throw IoError(origin_ + ": unexpected end of model file");
        return w;
    }
    void expect(const std::string& w) {
        const std::string got = word();
        if (got != w) throw IoError(origin_ + ": expected '" + w + "', got '" + got + "'");
    }
    double number() {
        const std::string w = word();
        try {
            return data::parse_double(w, origin_);
        } catch (const ConfigError&) {
            throw IoError(origin_ + ": bad number '" + w + "'");
        }
    }
    int integer() {
        const double v = number();
        if (v != std::floor(v) || std::abs(v) > 1e9) throw IoError(origin_ + ": expected integer");
        return static_cast<int>(v);
    }

private:
    std::istream& in_;
    std::string origin_;
};

} // namespace

void save_model(const Mlp& net, const std::filesystem::path& path) {
    net.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "dims " << net.dims.size();
    for (int d : net.dims) out << ' ' << d;
    out << "\nskips " << net.skips.size();
    for (const auto& s : net.skips) out << ' ' << s.from << ' ' << s.to;
    out << "\nactivation tanh\nscale";
    for (double v : net.scaling.scale) out << ' ' << data::format_double(v);
    out << "\noffset";
    for (double v : net.scaling.offset) out << ' ' << data::format_double(v);
    out << "\nsigma1_sq " << (net.sigma1_sq ? data::format_double(*net.sigma1_sq) : std::string("none")) << '\n';
    for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
        const auto& w = net.params.weights[l];
        out << "layer " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? " " : "") << data::format_double(w(r, c));
            out << '\n';
        }
        out << "bias";
        for (Eigen::Index r = 0; r < net.params.biases[l].size(); ++r) out << ' ' << data::format_double(net.params.biases[l](r));
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

Mlp load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file " + path.string());
    TokenReader rd(in, path.string());
    rd.expect(kModelMagic);
    if (rd.integer() != kModelVersion) throw IoError(path.string() + ": unsupported model version");
    Mlp net;
    rd.expect("dims");
    const int nd = rd.integer();
    if (nd < 2) throw IoError(path.string() + ": bad layer count");
    for (int i = 0; i < nd; ++i) net.dims.push_back(rd.integer());
    rd.expect("skips");
    const int ns = rd.integer();
    for (int i = 0; i < ns; ++i) {
        SkipConnection s;
        s.from = rd.integer();
        s.to = rd.integer();
        net.skips.push_back(s);
    }
    rd.expect("activation");
    rd.expect("tanh");
    rd.expect("scale");
    for (double& v : net.scaling.scale) v = rd.number();
    rd.expect("offset");
    for (double& v : net.scaling.offset) v = rd.number();
    rd.expect("sigma1_sq");
    {
        const std::string w = rd.word();
        if (w != "none") net.sigma1_sq = data::parse_double(w, "sigma1_sq");
    }
    for (int l = 0; l + 1 < nd; ++l) {
        rd.expect("layer");
        if (rd.integer() != l) throw IoError(path.string() + ": layers out of order");
        const int rows = rd.integer();
        const int cols = rd.integer();
        if (rows != net.dims[l + 1] || cols != net.dims[l]) throw IoError(path.string() + ": layer shape mismatch");
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) w(r, c) = rd.number();
        }
        rd.expect("bias");
        Eigen::VectorXd b(rows);
        for (int r = 0; r < rows; ++r) b(r) = rd.number();
        net.params.weights.push_back(std::move(w));
        net.params.biases.push_back(std::move(b));
    }
    try {
        net.validate();
    } catch (const ConfigError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return net;
}

} // namespace srcloc::nn
