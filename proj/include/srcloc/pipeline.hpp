#pragma once

#include <cstdint>
#include <vector>

#include "srcloc/config.hpp"
#include "srcloc/dataset.hpp"
#include "srcloc/surrogate.hpp"

// Glue between the modules, shared by the CLI and the integration tests.
namespace srcloc::pipeline {

/// Flattens trace rows into network samples (source, x, t) -> p.
nn::Samples to_samples(const std::vector<data::TraceRow>& rows);
nn::Samples train_samples(const data::Dataset& ds);
/// Clean test traces at the receivers; the surrogate's held-out set.
nn::Samples test_samples(const data::Dataset& ds);

/// Fresh network from the configured architecture and the "model" stream.
nn::Mlp initial_model(const config::Config& cfg);

/// Solver observations for one source at `receivers`, with N(0, sigma0_sq) noise
/// from `noise_seed`.
data::ObservationSet synthetic_observations(const data::DatasetManifest& m, const Point& source,
                                            const data::ReceiverSet& receivers, std::uint64_t noise_seed);

} // namespace srcloc::pipeline
