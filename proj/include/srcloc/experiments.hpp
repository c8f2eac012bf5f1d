#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srcloc/dataset.hpp"
#include "srcloc/inference.hpp"

namespace srcloc::exp {

struct LocalizationConfig {
    int grid_resolution = 150;
    infer::MhConfig mh;  // mh.seed is the base for per-source streams
    int workers = 1;
};

/// MH seed used for stream `index`: hash(mh.seed, "mh", index).
std::uint64_t chain_seed(const LocalizationConfig& cfg, std::size_t index);

/// grid_search followed by mh_sample from the grid optimum.
struct Localization {
    infer::GridResult grid;
    infer::Chain chain;
    infer::Summary summary;
};

Localization localize(const data::ObservationSet& obs, const infer::ForwardModel& model, const infer::NoiseModel& noise,
                      const LocalizationConfig& cfg, std::size_t stream_index);

struct SourceResult {
    std::size_t index = 0;
    std::optional<Point> truth;
    std::optional<Point> grid_best;
    std::optional<infer::Summary> summary;
    std::optional<infer::Chain> chain;
    std::string error;  // non-empty when this source failed
};

struct SuiteResult {
    std::vector<SourceResult> sources;
    std::optional<double> aggregate_mse;  // mean of per-source MSEs
    std::optional<double> median_mse;
};

/// Localises every observation set. A failing source is recorded and skipped.
/// Sources run in parallel, each with its own chain seed.
SuiteResult run_localization_suite(const std::vector<data::ObservationSet>& test, const infer::ForwardModel& model,
                                   double sigma1_sq, const LocalizationConfig& cfg, bool keep_chains = false);

void write_suite_csv(const SuiteResult& suite, const std::filesystem::path& path);

struct AblationRow {
    std::vector<std::size_t> receiver_indices;
    std::vector<Point> receivers;
    infer::Summary summary;
};

/// Nested receiver subsets obtained by dropping `removal_order` one at a time
/// from the full set, down to `min_size` receivers.
std::vector<std::vector<std::size_t>> removal_subsets(const data::ReceiverSet& receivers,
                                                      const std::vector<Point>& removal_order, std::size_t min_size = 2);

/// The documented removal order for the standard receivers.
std::vector<Point> default_removal_order();

/// Runs the localisation pipeline on `obs` restricted to each subset, all with
/// the same chain seed. Throws IdentifiabilityError for a subset that fails
/// the receiver identifiability check.
std::vector<AblationRow> ablate_receivers(const data::ObservationSet& obs, const infer::ForwardModel& model,
                                          const infer::NoiseModel& noise, const LocalizationConfig& cfg,
                                          const std::vector<std::vector<std::size_t>>& subsets);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

struct Mode {
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    Point location;
    double value = 0.0;
};

/// Local maxima of the grid under 8-connectivity. A connected plateau of equal
/// values with no higher neighbour counts once, at its first row-major cell.
/// Sorted by value descending, then row-major index. NaN and -inf are skipped.
std::vector<Mode> find_modes(const infer::GridResult& grid);

struct SymmetryReport {
    infer::GridResult grid;
    std::vector<Mode> modes;
    std::optional<Point> truth;
    std::optional<Point> mirror;      // truth reflected across x = 0.5
    double gap = 0.0;                 // best minus second mode value; +inf with a single mode
    bool top_two_mirrored = false;    // top two modes mirror each other across x = 0.5 within one cell
};

SymmetryReport symmetry_demo(const data::ObservationSet& obs, const infer::ForwardModel& model,
                             const infer::NoiseModel& noise, int resolution = 150, int workers = 1);

void write_symmetry_report(const SymmetryReport& report, const std::filesystem::path& path);

/// Sample counts over [0,1]^2; counts(row, col) with row along y.
struct Histogram {
    int bins = 0;
    Eigen::MatrixXd counts;
    std::size_t total = 0;
};

Histogram bin_samples(const std::vector<Point>& samples, int bins = 100);

/// Writes `<stem>.csv` (counts or log-density values) and `<stem>.normalized.csv`
/// (counts / total, or exp(v - max) scaled to sum 1), each preceded by a `# truth x y`
/// line when known.
void export_heatmap(const Histogram& hist, const std::optional<Point>& truth, const std::filesystem::path& stem);
void export_heatmap(const infer::GridResult& grid, const std::optional<Point>& truth, const std::filesystem::path& stem);

} // namespace srcloc::exp
