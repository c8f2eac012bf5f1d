#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srcloc/dataset.hpp"
#include "srcloc/experiments.hpp"
#include "srcloc/inference.hpp"
#include "srcloc/kv.hpp"
#include "srcloc/surrogate.hpp"
#include "srcloc/wave_core.hpp"

namespace srcloc::config {

/// Every tunable of the pipeline. Defaults give the full-scale setup.
/// All randomness derives from `seed`:
///   dataset noise    hash(seed, "observation-noise", test index)
///   weight init      hash(hash(seed, "model"), "init")
///   batch shuffles   hash(hash(seed, "train"), "shuffle", epoch)
///   MH chains        hash(hash(seed, "mh"), "mh", source index)
struct Config {
    std::uint64_t seed = 2023;
    int workers = 1;

    wave::SimGrid grid;
    wave::MediumParams medium;
    wave::SourceParams source;

    std::string dataset_dir = "dataset";
    std::string layout = "interleaved";  // interleaved | lattice | random
    int lattice_side = 10;               // interleaved: side x side lattice, split in half
    int n_train = 50;                    // lattice | random
    int n_test = 50;
    data::ReceiverSet receivers = data::ReceiverSet::standard();
    double sigma0_sq = 0.25;
    bool field_tuples = true;

    std::string model_path = "model.txt";
    std::vector<int> hidden{100, 100, 100, 100, 100, 100};
    std::vector<nn::SkipConnection> skips{{1, 3}, {3, 5}};
    nn::TrainConfig train;

    int grid_resolution = 150;
    infer::MhConfig mh;
    std::string observations;  // `infer` input CSV

    Point ablation_source{0.889, 0.25};
    std::vector<Point> ablation_order = exp::default_removal_order();
    Point symmetry_source{0.3, 0.5};
    std::vector<Point> symmetry_receivers{{0.5, 0.25}, {0.5, 0.75}};
    std::string symmetry_forward = "surrogate";  // surrogate | solver
    int heatmap_bins = 100;
    bool save_chains = false;

    std::uint64_t stream_seed(const char* module) const;
    nn::TrainConfig train_config() const;
    exp::LocalizationConfig localization() const;
    data::DatasetManifest manifest() const;
    std::vector<int> layer_dims() const;
};

/// Sets one key. Throws ConfigError naming the key on unknown keys or bad values.
void set(Config& cfg, const std::string& key, const std::string& value);
void apply(Config& cfg, const kv::Entries& entries);

/// Checks every downstream invariant; throws ConfigError naming the field.
void validate(const Config& cfg);

/// The fully resolved configuration as key-value entries, in documented order.
kv::Entries to_entries(const Config& cfg);

/// Defaults, then the file (if any), then overrides; validated.
Config resolve(const std::optional<std::filesystem::path>& file, const kv::Entries& overrides);

void write_config(const Config& cfg, const std::filesystem::path& path);

} // namespace srcloc::config
