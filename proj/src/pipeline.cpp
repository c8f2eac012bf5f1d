#include "srcloc/pipeline.hpp"

#include "srcloc/errors.hpp"

namespace srcloc::pipeline {

nn::Samples to_samples(const std::vector<data::TraceRow>& rows) {
    nn::Samples s;
    const auto n = static_cast<Eigen::Index>(rows.size());
    s.inputs.resize(nn::kInputDim, n);
    s.targets.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        s.inputs.col(k) << r.source.x, r.source.y, r.x.x, r.x.y, r.t;
        s.targets(k) = r.p;
    }
    return s;
}

nn::Samples train_samples(const data::Dataset& ds) {
    std::vector<data::TraceRow> rows;
    for (const auto& src : ds.train) rows.insert(rows.end(), src.begin(), src.end());
    return to_samples(rows);
}

nn::Samples test_samples(const data::Dataset& ds) {
    if (ds.test_clean.size() != ds.manifest.test_sources.size()) {
        throw IoError("dataset has no clean test traces");
    }
    std::vector<data::TraceRow> rows;
    for (std::size_t k = 0; k < ds.test_clean.size(); ++k) {
        const auto r = data::table_rows(ds.test_clean[k], ds.manifest.test_sources[k]);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return to_samples(rows);
}

nn::Mlp initial_model(const config::Config& cfg) {
    nn::Mlp net = nn::Mlp::create(cfg.layer_dims(), cfg.skips, cfg.stream_seed("model"));
    net.scaling = nn::InputScaling::unit_square(cfg.grid.t_end);
    return net;
}

data::ObservationSet synthetic_observations(const data::DatasetManifest& m, const Point& source,
                                            const data::ReceiverSet& receivers, std::uint64_t noise_seed) {
    const wave::SourceParams sp = m.source_at(source);
    const wave::TraceTable clean = wave::simulate(sp, m.medium, m.grid, receivers.positions);
    data::ObservationSet obs;
    obs.receivers = receivers;
    obs.times = clean.times;
    obs.values = data::add_noise(clean.values, m.sigma0_sq, noise_seed);
    obs.sigma0_sq = m.sigma0_sq;
    obs.source_truth = sp;
    return obs;
}

} // namespace srcloc::pipeline
