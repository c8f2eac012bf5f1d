#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace srcloc::nn {

/// Network input layout: (source_x, source_y, x, y, t).
inline constexpr int kInputDim = 5;

/// Per-coordinate affine map u -> scale * u + offset applied before the first
/// layer. The default maps [0,1] spatial coordinates and [0, t_end] time to [-1, 1].
struct InputScaling {
    std::array<double, kInputDim> scale{2.0, 2.0, 2.0, 2.0, 1.0};
    std::array<double, kInputDim> offset{-1.0, -1.0, -1.0, -1.0, -1.0};

    static InputScaling unit_square(double t_end);
    friend bool operator==(const InputScaling&, const InputScaling&) = default;
};

/// Identity addition of hidden activation `from` to the pre-activation of
/// hidden layer `to`. Layers are numbered from 1 (first hidden layer).
struct SkipConnection {
    int from = 0;
    int to = 0;
    friend bool operator==(const SkipConnection&, const SkipConnection&) = default;
};

/// Weights and biases of every affine layer. weights[l] maps layer l to l + 1.
struct Parameters {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::size_t size() const;
    /// Flat coordinate access: all of layer 0 (weights column-major, then
    /// bias), then layer 1, and so on.
    double& at(std::size_t flat);
    double at(std::size_t flat) const;
    void set_zero();
    bool all_finite() const;
};

struct Mlp {
    std::vector<int> dims;  // input, hidden..., output
    std::vector<SkipConnection> skips;
    Parameters params;
    InputScaling scaling;
    std::optional<double> sigma1_sq;  // surrogate error variance, set by training

    int hidden_layers() const { return static_cast<int>(dims.size()) - 2; }

    /// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
    static Mlp create(std::vector<int> dims, std::vector<SkipConnection> skips, std::uint64_t seed);
    /// 5 -> 6 x 100 tanh -> 1 with skips (1,3) and (3,5).
    static Mlp standard(std::uint64_t seed);

    void validate() const;
};

/// tanh through exp: 1 - 2 / (exp(2z) + 1). Vectorises in Eigen, absolute
/// error within a few ulps of 1.
Eigen::ArrayXXd fast_tanh(const Eigen::ArrayXXd& z);

double forward(const Mlp& net, std::span<const double, kInputDim> input);

/// inputs is kInputDim x N (one sample per column); returns N outputs.
Eigen::VectorXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

/// As forward_batch, for inputs that already went through net.scaling.
Eigen::VectorXd forward_scaled(const Mlp& net, const Eigen::MatrixXd& scaled_inputs);

Eigen::MatrixXd apply_scaling(const InputScaling& scaling, const Eigen::MatrixXd& inputs);

struct LossAndGradient {
    double mse = 0.0;
    Parameters grad;
};

/// Mean squared error over the batch and its exact gradient by backpropagation.
LossAndGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);
LossAndGradient loss_and_gradient_scaled(const Mlp& net, const Eigen::MatrixXd& scaled_inputs,
                                         const Eigen::VectorXd& targets);

double mse(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);

/// Supervised rows: inputs is kInputDim x N raw coordinates.
struct Samples {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;

    Eigen::Index size() const { return targets.size(); }
};

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    double decay_gamma = 0.5;
    int decay_every = 200;  // epochs
    int batch_size = 100;
    int epochs = 1000;
    int patience = 100;  // epochs without validation improvement; 0 disables
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    double learning_rate_at(int epoch) const;
    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_mse = 0.0;       // running mean of batch losses
    double validation_mse = 0.0;
    double best_validation_mse = 0.0;
};

struct TrainResult {
    Mlp net;  // parameters with the best validation MSE; sigma1_sq filled in
    std::vector<EpochStats> history;
    double sigma1_sq = 0.0;
    int best_epoch = -1;  // -1 when the initial parameters were never beaten
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch training with per-epoch shuffles drawn from cfg.seed. Returns
/// the best-validation parameters; sigma1_sq is their validation MSE.
/// Throws DivergenceError if the epoch loss exceeds 1e3 x the initial loss.
TrainResult train(Mlp net, const Samples& train_data, const Samples& validation, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Text model file, versioned; values use %.17g and round-trip exactly.
void save_model(const Mlp& net, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

} // namespace srcloc::nn
