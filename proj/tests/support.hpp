#pragma once

// Reference implementations shared by the unit and acceptance tests. They are
// deliberately naive: scalar loops, std::tanh, no Eigen expressions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "srcloc/rng.hpp"
#include "srcloc/surrogate.hpp"

namespace srcloc::testing {

/// Forward pass written from the layer equations.
inline double oracle_forward(const nn::Mlp& net, const double (&raw)[nn::kInputDim]) {
    const int layers = static_cast<int>(net.dims.size()) - 1;
    std::vector<std::vector<double>> h(static_cast<std::size_t>(layers));
    std::vector<double> in(nn::kInputDim);
    for (int k = 0; k < nn::kInputDim; ++k) in[k] = net.scaling.scale[k] * raw[k] + net.scaling.offset[k];
    double out = 0.0;
    for (int l = 0; l < layers; ++l) {
        const auto& w = net.params.weights[static_cast<std::size_t>(l)];
        const auto& b = net.params.biases[static_cast<std::size_t>(l)];
        const std::vector<double>& prev = l == 0 ? in : h[static_cast<std::size_t>(l - 1)];
        std::vector<double> z(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            double s = b(r);
            for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * prev[static_cast<std::size_t>(c)];
            z[static_cast<std::size_t>(r)] = s;
        }
        if (l == layers - 1) {
            out = z[0];
            break;
        }
        // Hidden layer l + 1 (1-based) receives identity skips from earlier layers.
        for (const auto& sk : net.skips) {
            if (sk.to == l + 1) {
                const auto& src = h[static_cast<std::size_t>(sk.from - 1)];
                for (std::size_t r = 0; r < z.size(); ++r) z[r] += src[r];
            }
        }
        for (double& v : z) v = std::tanh(v);
        h[static_cast<std::size_t>(l)] = std::move(z);
    }
    return out;
}

struct GradientCheck {
    double worst_relative = 0.0;
    int checked = 0;
};

/// Compares the analytic gradient with fourth-order central differences (step h) on
/// `coords` randomly drawn parameter coordinates. The relative error uses
/// max(|a|, |fd|, floor) in the denominator so exact zeros compare cleanly.
inline GradientCheck check_gradient(const nn::Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    int coords, std::uint64_t seed, double h = 1e-4, double floor = 1e-7) {
    const nn::LossAndGradient lg = nn::loss_and_gradient(net, x, y);
    nn::Mlp probe = net;
    Rng rng(seed);
    GradientCheck out;
    const std::size_t n = net.params.size();
    auto loss_at = [&](std::size_t idx, double value) {
        probe.params.at(idx) = value;
        return nn::mse(probe, x, y);
    };
    for (int k = 0; k < coords; ++k) {
        const std::size_t idx = static_cast<std::size_t>(rng.below(n));
        const double orig = probe.params.at(idx);
        // Fourth-order central stencil: truncation O(h^4) lets h stay large
        // enough that rounding in the loss does not swamp small gradients.
        const double d1 = loss_at(idx, orig + h) - loss_at(idx, orig - h);
        const double d2 = loss_at(idx, orig + 2.0 * h) - loss_at(idx, orig - 2.0 * h);
        probe.params.at(idx) = orig;
        const double fd = (8.0 * d1 - d2) / (12.0 * h);
        const double an = lg.grad.at(idx);
        const double denom = std::max({std::abs(an), std::abs(fd), floor});
        out.worst_relative = std::max(out.worst_relative, std::abs(an - fd) / denom);
        ++out.checked;
    }
    return out;
}

/// Random inputs in the raw domain ([0,1]^4 x [0,2]) and targets in [-1, 1].
inline nn::Samples random_samples(int n, std::uint64_t seed) {
    Rng rng(seed);
    nn::Samples s;
    s.inputs.resize(nn::kInputDim, n);
    s.targets.resize(n);
    for (int k = 0; k < n; ++k) {
        for (int d = 0; d < 4; ++d) s.inputs(d, k) = rng.uniform();
        s.inputs(4, k) = 2.0 * rng.uniform();
        s.targets(k) = 2.0 * rng.uniform() - 1.0;
    }
    return s;
}

} // namespace srcloc::testing
