#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srcloc/geometry.hpp"
#include "srcloc/wave_core.hpp"

namespace srcloc::data {

/// Ordered receiver positions inside the unit square.
struct ReceiverSet {
    std::vector<Point> positions;

    /// The five-receiver layout used for all default experiments.
    static ReceiverSet standard();

    std::size_t size() const { return positions.size(); }

    /// True when at least two receivers exist and no symmetry axis of the
    /// square (x = 0.5, y = 0.5, y = x, y = 1 - x) contains all of them.
    /// Only then does a reflection of the source change the receiver data.
    bool identifiable() const;

    /// Checks positions lie in [0,1]^2 and are pairwise distinct; with
    /// `for_inference` also requires at least two positions.
    void validate(bool for_inference = false) const;
};

/// Noisy pressure observations: values(r, j) at receivers[r], times[j].
struct ObservationSet {
    ReceiverSet receivers;
    std::vector<double> times;
    Eigen::MatrixXd values;
    double sigma0_sq = 0.0;
    std::optional<wave::SourceParams> source_truth;

    void validate() const;
    ObservationSet subset(std::span<const std::size_t> receiver_indices) const;
};

enum class SourceLayout { Lattice, UniformRandom };

/// Lattice: round(sqrt n) rows at y = (r + 1/2) / rows, each holding n / rows
/// or one more points at x = (c + 1/2) / count. UniformRandom: i.i.d. uniform
/// points from the seed.
std::vector<Point> sample_sources(std::size_t n, SourceLayout layout, std::uint64_t seed);

/// Checkerboard split of a side x side cell-centred lattice: cells with
/// (row + col) even go to train, odd to test. Each test source sits between
/// four train sources.
struct SourceSplit {
    std::vector<Point> train;
    std::vector<Point> test;
};
SourceSplit interleaved_split(int side);

/// Adds i.i.d. N(0, sigma0_sq) noise to every entry.
Eigen::MatrixXd add_noise(const Eigen::MatrixXd& clean, double sigma0_sq, std::uint64_t seed);

struct DatasetManifest {
    std::vector<Point> train_sources;
    std::vector<Point> test_sources;
    wave::SourceParams source;  // t0, omega, tau shared by all sources; location ignored
    wave::MediumParams medium;
    wave::SimGrid grid;
    ReceiverSet receivers = ReceiverSet::standard();
    std::uint64_t seed = 0;
    double sigma0_sq = 0.25;
    bool field_tuples = true;  // train rows at every cell centre instead of receivers only

    wave::SourceParams source_at(const Point& location) const;
    void validate() const;
};

/// One persisted sample: pressure p at point x, time t, for a source.
struct TraceRow {
    Point source;
    Point x;
    double t = 0.0;
    double p = 0.0;

    friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<std::vector<TraceRow>> train;  // per train source
    std::vector<ObservationSet> test;          // noisy, per test source
    std::vector<wave::TraceTable> test_clean;  // diagnostics and surrogate validation
};

/// Per-source noise seed: hash(seed, "observation-noise", index).
std::uint64_t noise_seed(std::uint64_t seed, std::size_t test_index);

Dataset build_dataset(const DatasetManifest& manifest, int workers = 1);

std::vector<TraceRow> table_rows(const wave::TraceTable& table, const Point& source);
std::vector<TraceRow> observation_rows(const ObservationSet& obs);

/// Rebuilds an observation table from rows of a single source. Receivers
/// and times keep their first-appearance order.
ObservationSet observations_from_rows(const std::vector<TraceRow>& rows, double sigma0_sq,
                                      const std::optional<wave::SourceParams>& truth_template);

// On-disk layout under `dir`: manifest.txt, train/src_<k>.csv,
// test/src_<k>.csv (noisy) and test/src_<k>.clean.csv.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir, bool load_train = true, bool load_clean = true);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

inline constexpr const char* kTraceHeader = "source_x,source_y,receiver_x,receiver_y,t,p";
void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// %.17g formatting, enough digits for an exact round trip.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& field);

} // namespace srcloc::data
