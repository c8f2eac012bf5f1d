#include "srcloc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "srcloc/errors.hpp"
#include "srcloc/kv.hpp"
#include "srcloc/parallel.hpp"
#include "srcloc/rng.hpp"

namespace srcloc::exp {

using data::format_double;

std::uint64_t chain_seed(const LocalizationConfig& cfg, std::size_t index) {
    return Rng::derive_seed(cfg.mh.seed, "mh", index);
}

Localization localize(const data::ObservationSet& obs, const infer::ForwardModel& model, const infer::NoiseModel& noise,
                      const LocalizationConfig& cfg, std::size_t stream_index) {
    const infer::Posterior posterior(obs, model, noise);
    Localization out;
    out.grid = infer::grid_search(posterior, cfg.grid_resolution, cfg.workers);
    infer::MhConfig mh = cfg.mh;
    mh.seed = chain_seed(cfg, stream_index);
    out.chain = infer::mh_sample(out.grid.best, posterior, mh);
    std::optional<Point> truth;
    if (obs.source_truth) truth = obs.source_truth->location;
    out.summary = infer::summarize(out.chain, truth);
    return out;
}

SuiteResult run_localization_suite(const std::vector<data::ObservationSet>& test, const infer::ForwardModel& model,
                                   double sigma1_sq, const LocalizationConfig& cfg, bool keep_chains) {
    SuiteResult suite;
    suite.sources.resize(test.size());
    LocalizationConfig inner = cfg;
    inner.workers = 1;  // parallelism is across sources here
    parallel_for(test.size(), cfg.workers, [&](std::size_t k) {
        SourceResult& row = suite.sources[k];
        row.index = k;
        if (test[k].source_truth) row.truth = test[k].source_truth->location;
        try {
            Localization loc = localize(test[k], model, {test[k].sigma0_sq, sigma1_sq}, inner, k);
            row.grid_best = loc.grid.best;
            row.summary = loc.summary;
            if (keep_chains) row.chain = std::move(loc.chain);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    std::vector<double> mses;
    for (const auto& row : suite.sources) {
        if (row.summary && row.summary->mse) mses.push_back(*row.summary->mse);
    }
    if (!mses.empty()) {
        double sum = 0.0;
        for (double m : mses) sum += m;
        suite.aggregate_mse = sum / static_cast<double>(mses.size());
        std::sort(mses.begin(), mses.end());
        const std::size_t h = mses.size() / 2;
        suite.median_mse = mses.size() % 2 ? mses[h] : 0.5 * (mses[h - 1] + mses[h]);
    }
    return suite;
}

void write_suite_csv(const SuiteResult& suite, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "source,truth_x,truth_y,grid_x,grid_y,mean_x,mean_y,cov_xx,cov_xy,cov_yy,mse,acceptance_rate,status\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& row : suite.sources) {
        out << row.index << ',' << (row.truth ? format_double(row.truth->x) : "") << ','
            << (row.truth ? format_double(row.truth->y) : "") << ',' << (row.grid_best ? format_double(row.grid_best->x) : "")
            << ',' << (row.grid_best ? format_double(row.grid_best->y) : "") << ',';
        if (row.summary) {
            const auto& s = *row.summary;
            out << format_double(s.mean.x) << ',' << format_double(s.mean.y) << ',' << format_double(s.covariance(0, 0))
                << ',' << format_double(s.covariance(0, 1)) << ',' << format_double(s.covariance(1, 1)) << ','
                << opt(s.mse) << ',' << format_double(s.acceptance_rate) << ",ok\n";
        } else {
            std::string msg = row.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << ",,,,,,,failed: " << msg << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Point> default_removal_order() { return {{0.25, 0.125}, {0.75, 0.625}, {0.5, 0.5}}; }

std::vector<std::vector<std::size_t>> removal_subsets(const data::ReceiverSet& receivers,
                                                      const std::vector<Point>& removal_order, std::size_t min_size) {
    std::vector<std::size_t> current(receivers.size());
    for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
    std::vector<std::vector<std::size_t>> out{current};
    for (const Point& p : removal_order) {
        if (current.size() <= min_size) break;
        const auto it = std::find_if(current.begin(), current.end(),
                                     [&](std::size_t i) { return receivers.positions[i] == p; });
        if (it == current.end()) throw ConfigError("ablation.order", "receiver not present in the set");
        current.erase(it);
        out.push_back(current);
    }
    return out;
}

std::vector<AblationRow> ablate_receivers(const data::ObservationSet& obs, const infer::ForwardModel& model,
                                          const infer::NoiseModel& noise, const LocalizationConfig& cfg,
                                          const std::vector<std::vector<std::size_t>>& subsets) {
    for (const auto& subset : subsets) {
        const data::ObservationSet sub = obs.subset(subset);
        if (!sub.receivers.identifiable()) {
            throw IdentifiabilityError("receiver subset of size " + std::to_string(subset.size()) +
                                       " does not identify the source");
        }
    }
    std::vector<AblationRow> rows(subsets.size());
    LocalizationConfig inner = cfg;
    inner.workers = 1;
    parallel_for(subsets.size(), cfg.workers, [&](std::size_t k) {
        const data::ObservationSet sub = obs.subset(subsets[k]);
        // Same chain stream for every subset: rows differ only by the receivers.
        Localization loc = localize(sub, model, noise, inner, 0);
        rows[k] = AblationRow{subsets[k], sub.receivers.positions, loc.summary};
    });
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "receivers,mean_x,mean_y,mse,acceptance_rate,receiver_positions\n";
    for (const auto& row : rows) {
        out << row.receivers.size() << ',' << format_double(row.summary.mean.x) << ','
            << format_double(row.summary.mean.y) << ',' << (row.summary.mse ? format_double(*row.summary.mse) : "") << ','
            << format_double(row.summary.acceptance_rate) << ",\"" << kv::format_points(row.receivers) << "\"\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Mode> find_modes(const infer::GridResult& grid) {
    const auto& v = grid.values;
    const Eigen::Index rows = v.rows();
    const Eigen::Index cols = v.cols();
    // Equal-valued 8-connected cells form one plateau; a plateau is a mode when
    // nothing bordering it is higher. It is reported at its first cell.
    std::vector<char> seen(static_cast<std::size_t>(rows * cols), 0);
    std::vector<Mode> modes;
    std::vector<Eigen::Index> stack;
    for (Eigen::Index start = 0; start < rows * cols; ++start) {
        if (seen[static_cast<std::size_t>(start)]) continue;
        const double x = v(start / cols, start % cols);
        seen[static_cast<std::size_t>(start)] = 1;
        if (std::isnan(x) || x == -std::numeric_limits<double>::infinity()) continue;
        bool is_mode = true;
        stack.assign(1, start);
        while (!stack.empty()) {
            const Eigen::Index idx = stack.back();
            stack.pop_back();
            const Eigen::Index r = idx / cols;
            const Eigen::Index c = idx % cols;
            for (Eigen::Index dr = -1; dr <= 1; ++dr) {
                for (Eigen::Index dc = -1; dc <= 1; ++dc) {
                    const Eigen::Index rr = r + dr;
                    const Eigen::Index cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                    const double y = v(rr, cc);
                    if (y > x) is_mode = false;
                    const auto n = static_cast<std::size_t>(rr * cols + cc);
                    if (y == x && !seen[n]) {
                        seen[n] = 1;
                        stack.push_back(rr * cols + cc);
                    }
                }
            }
        }
        if (is_mode) {
            const Eigen::Index r = start / cols;
            const Eigen::Index c = start % cols;
            modes.push_back({r, c, infer::GridResult::cell_center(grid.resolution, r, c), x});
        }
    }
    std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.value > b.value; });
    return modes;
}

SymmetryReport symmetry_demo(const data::ObservationSet& obs, const infer::ForwardModel& model,
                             const infer::NoiseModel& noise, int resolution, int workers) {
    const infer::Posterior posterior(obs, model, noise);
    SymmetryReport rep;
    rep.grid = infer::grid_search(posterior, resolution, workers);
    rep.modes = find_modes(rep.grid);
    if (obs.source_truth) {
        rep.truth = obs.source_truth->location;
        rep.mirror = mirror_x(*rep.truth);
    }
    if (rep.modes.size() >= 2) {
        rep.gap = rep.modes[0].value - rep.modes[1].value;
        const Point m = mirror_x(rep.modes[0].location);
        const double cell = 1.0 / resolution;
        rep.top_two_mirrored = std::abs(m.x - rep.modes[1].location.x) <= cell + 1e-12 &&
                               std::abs(m.y - rep.modes[1].location.y) <= cell + 1e-12;
    } else {
        rep.gap = std::numeric_limits<double>::infinity();
    }
    return rep;
}

void write_symmetry_report(const SymmetryReport& rep, const std::filesystem::path& path) {
    kv::Entries e;
    if (rep.truth) e.emplace_back("truth", kv::format_points({*rep.truth}));
    if (rep.mirror) e.emplace_back("mirror", kv::format_points({*rep.mirror}));
    e.emplace_back("modes", std::to_string(rep.modes.size()));
    for (std::size_t i = 0; i < std::min<std::size_t>(rep.modes.size(), 2); ++i) {
        e.emplace_back("mode" + std::to_string(i + 1), kv::format_points({rep.modes[i].location}));
        e.emplace_back("mode" + std::to_string(i + 1) + ".log_post", format_double(rep.modes[i].value));
    }
    e.emplace_back("gap", format_double(rep.gap));
    e.emplace_back("top_two_mirrored", rep.top_two_mirrored ? "true" : "false");
    kv::write_file(e, path);
}

Histogram bin_samples(const std::vector<Point>& samples, int bins) {
    if (bins < 1) throw ConfigError("heatmap.bins", "must be >= 1");
    if (samples.empty()) throw ConfigError("heatmap", "no samples to bin");
    Histogram h;
    h.bins = bins;
    h.counts = Eigen::MatrixXd::Zero(bins, bins);
    for (const Point& p : samples) {
        const int col = std::clamp(static_cast<int>(std::floor(p.x * bins)), 0, bins - 1);
        const int row = std::clamp(static_cast<int>(std::floor(p.y * bins)), 0, bins - 1);
        h.counts(row, col) += 1.0;
    }
    h.total = samples.size();
    return h;
}

namespace {

void write_matrix(const Eigen::MatrixXd& m, const std::optional<Point>& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    if (truth) out << "# truth " << format_double(truth->x) << ' ' << format_double(truth->y) << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
    return stem.parent_path() / (stem.filename().string() + suffix);
}

} // namespace

void export_heatmap(const Histogram& hist, const std::optional<Point>& truth, const std::filesystem::path& stem) {
    write_matrix(hist.counts, truth, with_suffix(stem, ".csv"));
    write_matrix(hist.counts / static_cast<double>(hist.total), truth, with_suffix(stem, ".normalized.csv"));
}

void export_heatmap(const infer::GridResult& grid, const std::optional<Point>& truth, const std::filesystem::path& stem) {
    if (grid.values.size() == 0) throw ConfigError("heatmap", "empty grid");
    write_matrix(grid.values, truth, with_suffix(stem, ".csv"));
    Eigen::MatrixXd weights = (grid.values.array() - grid.best_value).exp().matrix();
    if (std::isfinite(grid.best_value)) {
        const double total = weights.sum();
        if (total > 0.0) weights /= total;
    }
    write_matrix(weights, truth, with_suffix(stem, ".normalized.csv"));
}

} // namespace srcloc::exp
