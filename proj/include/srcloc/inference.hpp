#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "srcloc/dataset.hpp"
#include "srcloc/geometry.hpp"
#include "srcloc/surrogate.hpp"
#include "srcloc/wave_core.hpp"

namespace srcloc::infer {

/// Observation variance plus surrogate error variance.
struct NoiseModel {
    double sigma0_sq = 0.25;
    double sigma1_sq = 0.0;

    double total() const { return sigma0_sq + sigma1_sq; }
    void validate() const;
};

/// Pressure predictions at receivers x times for a candidate source.
/// Implementations must be safe for concurrent const calls.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;
    virtual Eigen::MatrixXd predict(const Point& source, std::span<const Point> receivers,
                                    std::span<const double> times) const = 0;
};

/// Evaluates the trained network at (source, receiver, time) triples.
class SurrogateForward final : public ForwardModel {
public:
    explicit SurrogateForward(const nn::Mlp& net) : net_(net) {}
    Eigen::MatrixXd predict(const Point& source, std::span<const Point> receivers,
                            std::span<const double> times) const override;

private:
    const nn::Mlp& net_;
};

/// Runs the finite-difference solver. Times must equal grid.output_times().
class SolverForward final : public ForwardModel {
public:
    SolverForward(wave::SourceParams source, wave::MediumParams medium, wave::SimGrid grid)
        : source_(source), medium_(medium), grid_(grid) {}
    Eigen::MatrixXd predict(const Point& source, std::span<const Point> receivers,
                            std::span<const double> times) const override;

private:
    wave::SourceParams source_;
    wave::MediumParams medium_;
    wave::SimGrid grid_;
};

/// Unnormalised log-posterior for the source location under a uniform prior
/// on [0,1]^2 and i.i.d. Gaussian residuals of variance noise.total().
class Posterior {
public:
    Posterior(data::ObservationSet observations, const ForwardModel& model, NoiseModel noise);

    /// -sum (P - p~)^2 / (2 (s0^2 + s1^2)) inside the square, -inf outside.
    double log_density(const Point& ys) const;

    const data::ObservationSet& observations() const { return obs_; }
    const NoiseModel& noise() const { return noise_; }

private:
    data::ObservationSet obs_;
    const ForwardModel& model_;
    NoiseModel noise_;
};

using LogTarget = std::function<double(const Point&)>;

inline double log_posterior(const Point& ys, const Posterior& posterior) { return posterior.log_density(ys); }

/// Log-density on the cell-centred lattice ((k + 1/2) / resolution).
/// values(row, col) is the point with y index `row` and x index `col`.
struct GridResult {
    int resolution = 0;
    Eigen::MatrixXd values;
    Eigen::Index best_row = 0;
    Eigen::Index best_col = 0;
    Point best;
    double best_value = 0.0;

    static Point cell_center(int resolution, Eigen::Index row, Eigen::Index col);
};

/// Ties resolve to the smallest row-major index.
GridResult grid_search(const LogTarget& target, int resolution = 150, int workers = 1);
GridResult grid_search(const Posterior& posterior, int resolution = 150, int workers = 1);

struct MhConfig {
    Eigen::Matrix2d proposal_cov = 0.001 * Eigen::Matrix2d::Identity();
    int iterations = 50000;
    int burn_in = 5000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Post-burn-in states of a Metropolis-Hastings run. Counters cover every
/// iteration, burn-in included.
struct Chain {
    std::vector<Point> samples;
    std::vector<double> log_post;
    std::vector<unsigned char> accepted;  // per recorded iteration
    int first_iteration = 1;              // iteration number of samples[0]
    long long accepted_count = 0;
    long long proposed_count = 0;
};

/// Random-walk MH with Gaussian proposals. Proposals where the target is
/// -inf are always rejected. Throws InvalidInit if target(init) is -inf or NaN.
Chain mh_sample(const Point& init, const LogTarget& target, const MhConfig& cfg);
Chain mh_sample(const Point& init, const Posterior& posterior, const MhConfig& cfg);

struct Summary {
    std::size_t samples = 0;
    Point mean;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // unbiased, zero for a single sample
    std::optional<double> mse;                            // mean of |y - truth|^2
    double acceptance_rate = 0.0;
};

Summary summarize(const Chain& chain, const std::optional<Point>& truth);

/// Monte Carlo standard error of the sample mean by non-overlapping batch means.
Point batch_means_standard_error(std::span<const Point> samples, int batches = 50);

void write_chain_csv(const Chain& chain, const std::filesystem::path& path);
void write_summary(const Summary& summary, const std::filesystem::path& path);
void write_grid_csv(const GridResult& grid, const std::filesystem::path& path);

} // namespace srcloc::infer
