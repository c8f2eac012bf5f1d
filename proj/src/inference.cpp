#include "srcloc/inference.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "srcloc/errors.hpp"
#include "srcloc/kv.hpp"
#include "srcloc/parallel.hpp"
#include "srcloc/rng.hpp"

namespace srcloc::infer {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void NoiseModel::validate() const {
    if (!(sigma0_sq >= 0.0)) throw ConfigError("noise.sigma0_sq", "must be >= 0");
    if (!(sigma1_sq >= 0.0)) throw ConfigError("noise.sigma1_sq", "must be >= 0");
    if (!(total() > 0.0) || !std::isfinite(total())) throw ConfigError("noise", "total variance must be finite and > 0");
}

Eigen::MatrixXd SurrogateForward::predict(const Point& source, std::span<const Point> receivers,
                                          std::span<const double> times) const {
    const auto nr = static_cast<Eigen::Index>(receivers.size());
    const auto nt = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd inputs(nn::kInputDim, nr * nt);
    // Column r * nt + j holds (receiver r, time j), so the output reshapes to nt x nr.
    for (Eigen::Index r = 0; r < nr; ++r) {
        for (Eigen::Index j = 0; j < nt; ++j) {
            auto col = inputs.col(r * nt + j);
            col << source.x, source.y, receivers[r].x, receivers[r].y, times[j];
        }
    }
    const Eigen::VectorXd out = nn::forward_batch(net_, inputs);
    return Eigen::Map<const Eigen::MatrixXd>(out.data(), nt, nr).transpose();
}

Eigen::MatrixXd SolverForward::predict(const Point& source, std::span<const Point> receivers,
                                       std::span<const double> times) const {
    if (times.size() != static_cast<std::size_t>(grid_.nt)) {
        throw ConfigError("observations.times", "solver forward model needs the grid output times");
    }
    wave::SourceParams sp = source_;
    sp.location = source;
    return wave::simulate(sp, medium_, grid_, receivers).values;
}

Posterior::Posterior(data::ObservationSet observations, const ForwardModel& model, NoiseModel noise)
    : obs_(std::move(observations)), model_(model), noise_(noise) {
    noise_.validate();
    obs_.validate();
}

double Posterior::log_density(const Point& ys) const {
    if (!in_unit_square(ys)) return kNegInf;
    const Eigen::MatrixXd pred = model_.predict(ys, obs_.receivers.positions, obs_.times);
    return -(obs_.values - pred).squaredNorm() / (2.0 * noise_.total());
}

Point GridResult::cell_center(int resolution, Eigen::Index row, Eigen::Index col) {
    return {(static_cast<double>(col) + 0.5) / resolution, (static_cast<double>(row) + 0.5) / resolution};
}

GridResult grid_search(const LogTarget& target, int resolution, int workers) {
    if (resolution < 2) throw ConfigError("inference.grid_resolution", "must be >= 2");
    GridResult g;
    g.resolution = resolution;
    g.values.resize(resolution, resolution);
    parallel_for(static_cast<std::size_t>(resolution), workers, [&](std::size_t row) {
        for (int col = 0; col < resolution; ++col) {
            const auto r = static_cast<Eigen::Index>(row);
            g.values(r, col) = target(GridResult::cell_center(resolution, r, col));
        }
    });
    g.best_value = kNegInf;
    bool found = false;
    for (Eigen::Index row = 0; row < resolution; ++row) {
        for (Eigen::Index col = 0; col < resolution; ++col) {
            const double v = g.values(row, col);
            if ((!found && !std::isnan(v)) || v > g.best_value) {
                g.best_value = v;
                g.best_row = row;
                g.best_col = col;
                found = true;
            }
        }
    }
    g.best = GridResult::cell_center(resolution, g.best_row, g.best_col);
    return g;
}

GridResult grid_search(const Posterior& posterior, int resolution, int workers) {
    return grid_search([&posterior](const Point& p) { return posterior.log_density(p); }, resolution, workers);
}

void MhConfig::validate() const {
    if (!proposal_cov.allFinite() || std::abs(proposal_cov(0, 1) - proposal_cov(1, 0)) > 1e-15 ||
        proposal_cov(0, 0) <= 0.0 || proposal_cov.determinant() <= 0.0) {
        throw ConfigError("mh.proposal_cov", "must be symmetric positive definite");
    }
    if (burn_in < 0) throw ConfigError("mh.burn_in", "must be >= 0");
    if (iterations <= burn_in) throw ConfigError("mh.iterations", "must exceed mh.burn_in");
}

Chain mh_sample(const Point& init, const LogTarget& target, const MhConfig& cfg) {
    cfg.validate();
    double lp = target(init);
    if (std::isnan(lp) || lp == kNegInf) throw InvalidInit("log-target at the initial point is -inf or NaN");

    const Eigen::Matrix2d chol = cfg.proposal_cov.llt().matrixL();
    Rng rng(cfg.seed);
    Chain chain;
    chain.first_iteration = cfg.burn_in + 1;
    const auto kept = static_cast<std::size_t>(cfg.iterations - cfg.burn_in);
    chain.samples.reserve(kept);
    chain.log_post.reserve(kept);
    chain.accepted.reserve(kept);

    Point y = init;
    for (int it = 1; it <= cfg.iterations; ++it) {
        const double z0 = rng.normal();
        const double z1 = rng.normal();
        const Point proposal{y.x + chol(0, 0) * z0, y.y + chol(1, 0) * z0 + chol(1, 1) * z1};
        const double log_u = std::log(1.0 - rng.uniform());
        const double lp_new = target(proposal);
        bool accept = false;
        if (lp_new != kNegInf && !std::isnan(lp_new)) accept = log_u <= lp_new - lp;
        ++chain.proposed_count;
        if (accept) {
            y = proposal;
            lp = lp_new;
            ++chain.accepted_count;
        }
        if (it > cfg.burn_in) {
            chain.samples.push_back(y);
            chain.log_post.push_back(lp);
            chain.accepted.push_back(accept ? 1 : 0);
        }
    }
    return chain;
}

Chain mh_sample(const Point& init, const Posterior& posterior, const MhConfig& cfg) {
    return mh_sample(init, [&posterior](const Point& p) { return posterior.log_density(p); }, cfg);
}

Summary summarize(const Chain& chain, const std::optional<Point>& truth) {
    if (chain.samples.empty()) throw ConfigError("chain", "cannot summarise an empty chain");
    Summary s;
    s.samples = chain.samples.size();
    const double n = static_cast<double>(s.samples);
    for (const Point& p : chain.samples) {
        s.mean.x += p.x;
        s.mean.y += p.y;
    }
    s.mean.x /= n;
    s.mean.y /= n;
    if (s.samples > 1) {
        for (const Point& p : chain.samples) {
            const double dx = p.x - s.mean.x;
            const double dy = p.y - s.mean.y;
            s.covariance(0, 0) += dx * dx;
            s.covariance(0, 1) += dx * dy;
            s.covariance(1, 1) += dy * dy;
        }
        s.covariance /= (n - 1.0);
        s.covariance(1, 0) = s.covariance(0, 1);
    }
    if (truth) {
        double sum = 0.0;
        for (const Point& p : chain.samples) sum += squared_distance(p, *truth);
        s.mse = sum / n;
    }
    s.acceptance_rate = chain.proposed_count > 0
                            ? static_cast<double>(chain.accepted_count) / static_cast<double>(chain.proposed_count)
                            : 0.0;
    return s;
}

Point batch_means_standard_error(std::span<const Point> samples, int batches) {
    const std::size_t len = samples.size() / static_cast<std::size_t>(batches);
    if (batches < 2 || len == 0) throw ConfigError("batches", "need at least two non-empty batches");
    std::vector<Point> means(static_cast<std::size_t>(batches));
    Point grand;
    for (int b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < len; ++i) {
            means[b].x += samples[b * len + i].x;
            means[b].y += samples[b * len + i].y;
        }
        means[b].x /= static_cast<double>(len);
        means[b].y /= static_cast<double>(len);
        grand.x += means[b].x / batches;
        grand.y += means[b].y / batches;
    }
    Point var;
    for (const Point& m : means) {
        var.x += (m.x - grand.x) * (m.x - grand.x);
        var.y += (m.y - grand.y) * (m.y - grand.y);
    }
    // Variance of a batch mean, divided by the number of batches.
    return {std::sqrt(var.x / (batches - 1) / batches), std::sqrt(var.y / (batches - 1) / batches)};
}

void write_chain_csv(const Chain& chain, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "iter,y1,y2,log_post,accepted\n";
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        out << chain.first_iteration + static_cast<long long>(i) << ',' << data::format_double(chain.samples[i].x) << ','
            << data::format_double(chain.samples[i].y) << ',' << data::format_double(chain.log_post[i]) << ','
            << static_cast<int>(chain.accepted[i]) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_summary(const Summary& s, const std::filesystem::path& path) {
    kv::Entries e{
        {"samples", std::to_string(s.samples)},
        {"mean_x", data::format_double(s.mean.x)},
        {"mean_y", data::format_double(s.mean.y)},
        {"cov_xx", data::format_double(s.covariance(0, 0))},
        {"cov_xy", data::format_double(s.covariance(0, 1))},
        {"cov_yy", data::format_double(s.covariance(1, 1))},
        {"mse", s.mse ? data::format_double(*s.mse) : "none"},
        {"acceptance_rate", data::format_double(s.acceptance_rate)},
    };
    kv::write_file(e, path);
}

void write_grid_csv(const GridResult& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (Eigen::Index r = 0; r < grid.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.values.cols(); ++c) {
            out << (c ? "," : "") << data::format_double(grid.values(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace srcloc::infer
