#include "srcloc/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "srcloc/errors.hpp"
#include "srcloc/rng.hpp"

namespace srcloc::config {

using data::format_double;
using data::parse_double;

std::uint64_t Config::stream_seed(const char* module) const { return Rng::derive_seed(seed, module); }

nn::TrainConfig Config::train_config() const {
    nn::TrainConfig t = train;
    t.seed = stream_seed("train");
    return t;
}

exp::LocalizationConfig Config::localization() const {
    exp::LocalizationConfig l;
    l.grid_resolution = grid_resolution;
    l.mh = mh;
    l.mh.seed = stream_seed("mh");
    l.workers = workers;
    return l;
}

std::vector<int> Config::layer_dims() const {
    std::vector<int> dims{nn::kInputDim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return dims;
}

data::DatasetManifest Config::manifest() const {
    data::DatasetManifest m;
    if (layout == "interleaved") {
        auto split = data::interleaved_split(lattice_side);
        m.train_sources = std::move(split.train);
        m.test_sources = std::move(split.test);
    } else {
        const auto kind = layout == "lattice" ? data::SourceLayout::Lattice : data::SourceLayout::UniformRandom;
        // Train and test draw from different seeds so random layouts stay disjoint.
        m.train_sources = data::sample_sources(static_cast<std::size_t>(n_train), kind, stream_seed("train-sources"));
        if (n_test > 0) {
            if (kind == data::SourceLayout::Lattice) {
                // Test lattice shifted by half a cell in x, away from the train points.
                m.test_sources = data::sample_sources(static_cast<std::size_t>(n_test), kind, 0);
                const double shift = 0.5 / std::max(1.0, std::round(std::sqrt(static_cast<double>(n_test))));
                for (Point& p : m.test_sources) p.x = p.x + shift > 1.0 ? p.x - shift : p.x + shift;
            } else {
                m.test_sources = data::sample_sources(static_cast<std::size_t>(n_test), kind, stream_seed("test-sources"));
            }
        }
    }
    m.source = source;
    m.medium = medium;
    m.grid = grid;
    m.receivers = receivers;
    m.seed = seed;
    m.sigma0_sq = sigma0_sq;
    m.field_tuples = field_tuples;
    return m;
}

namespace {

long long parse_int(const std::string& text, const std::string& key) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(key, "not an integer: '" + text + "'");
    }
    return v;
}

int parse_small_int(const std::string& text, const std::string& key) {
    const long long v = parse_int(text, key);
    if (v < -1'000'000'000 || v > 1'000'000'000) throw ConfigError(key, "integer out of range");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

Point parse_point(const std::string& text, const std::string& key) {
    const auto pts = kv::parse_points(text, key);
    if (pts.size() != 1) throw ConfigError(key, "expected a single 'x y' point");
    return pts.front();
}

std::vector<std::string> split_ws(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

struct Key {
    const char* name;
    std::function<std::string(const Config&)> get;
    std::function<void(Config&, const std::string&)> set;
};

#define SRCLOC_DOUBLE(key, field)                                                        \
    Key { key, [](const Config& c) { return format_double(c.field); },                   \
          [](Config& c, const std::string& v) { c.field = parse_double(v, key); } }
#define SRCLOC_INT(key, field)                                                           \
    Key { key, [](const Config& c) { return std::to_string(c.field); },                  \
          [](Config& c, const std::string& v) { c.field = parse_small_int(v, key); } }
#define SRCLOC_STRING(key, field)                                                        \
    Key { key, [](const Config& c) { return c.field; },                                  \
          [](Config& c, const std::string& v) { c.field = v; } }
#define SRCLOC_POINT(key, field)                                                         \
    Key { key, [](const Config& c) { return kv::format_points({c.field}); },             \
          [](Config& c, const std::string& v) { c.field = parse_point(v, key); } }
#define SRCLOC_POINTS(key, field)                                                        \
    Key { key, [](const Config& c) { return kv::format_points(c.field); },               \
          [](Config& c, const std::string& v) { c.field = kv::parse_points(v, key); } }

const std::vector<Key>& keys() {
    static const std::vector<Key> table{
        Key{"seed", [](const Config& c) { return std::to_string(c.seed); },
            [](Config& c, const std::string& v) {
                const long long s = parse_int(v, "seed");
                if (s < 0) throw ConfigError("seed", "must be >= 0");
                c.seed = static_cast<std::uint64_t>(s);
            }},
        SRCLOC_INT("workers", workers),
        SRCLOC_INT("grid.nx", grid.nx),
        SRCLOC_INT("grid.ny", grid.ny),
        SRCLOC_INT("grid.nt", grid.nt),
        SRCLOC_DOUBLE("grid.t_end", grid.t_end),
        SRCLOC_DOUBLE("grid.cfl", grid.cfl),
        SRCLOC_DOUBLE("medium.kappa", medium.kappa),
        SRCLOC_DOUBLE("medium.rho", medium.rho),
        SRCLOC_DOUBLE("source.t0", source.t0),
        SRCLOC_DOUBLE("source.omega", source.omega),
        SRCLOC_DOUBLE("source.tau", source.tau),
        SRCLOC_STRING("dataset.dir", dataset_dir),
        SRCLOC_STRING("dataset.layout", layout),
        SRCLOC_INT("dataset.lattice_side", lattice_side),
        SRCLOC_INT("dataset.n_train", n_train),
        SRCLOC_INT("dataset.n_test", n_test),
        Key{"dataset.receivers", [](const Config& c) { return kv::format_points(c.receivers.positions); },
            [](Config& c, const std::string& v) { c.receivers.positions = kv::parse_points(v, "dataset.receivers"); }},
        SRCLOC_DOUBLE("dataset.sigma0_sq", sigma0_sq),
        Key{"dataset.field_tuples", [](const Config& c) { return std::string(c.field_tuples ? "true" : "false"); },
            [](Config& c, const std::string& v) { c.field_tuples = parse_bool(v, "dataset.field_tuples"); }},
        SRCLOC_STRING("model.path", model_path),
        Key{"model.hidden",
            [](const Config& c) {
                std::string s;
                for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? " " : "") + std::to_string(c.hidden[i]);
                return s;
            },
            [](Config& c, const std::string& v) {
                c.hidden.clear();
                for (const auto& w : split_ws(v)) c.hidden.push_back(parse_small_int(w, "model.hidden"));
            }},
        Key{"model.skips",
            [](const Config& c) {
                std::string s;
                for (std::size_t i = 0; i < c.skips.size(); ++i) {
                    s += (i ? " " : "") + std::to_string(c.skips[i].from) + "-" + std::to_string(c.skips[i].to);
                }
                return s;
            },
            [](Config& c, const std::string& v) {
                c.skips.clear();
                for (const auto& w : split_ws(v)) {
                    const auto dash = w.find('-');
                    if (dash == std::string::npos) throw ConfigError("model.skips", "expected 'from-to' pairs");
                    c.skips.push_back({parse_small_int(w.substr(0, dash), "model.skips"),
                                       parse_small_int(w.substr(dash + 1), "model.skips")});
                }
            }},
        SRCLOC_DOUBLE("train.lr", train.learning_rate),
        SRCLOC_DOUBLE("train.decay_gamma", train.decay_gamma),
        SRCLOC_INT("train.decay_every", train.decay_every),
        SRCLOC_INT("train.batch_size", train.batch_size),
        SRCLOC_INT("train.epochs", train.epochs),
        SRCLOC_INT("train.patience", train.patience),
        Key{"train.optimizer",
            [](const Config& c) { return std::string(c.train.optimizer == nn::Optimizer::Adam ? "adam" : "sgd"); },
            [](Config& c, const std::string& v) {
                if (v == "adam") {
                    c.train.optimizer = nn::Optimizer::Adam;
                } else if (v == "sgd") {
                    c.train.optimizer = nn::Optimizer::Sgd;
                } else {
                    throw ConfigError("train.optimizer", "expected adam or sgd, got '" + v + "'");
                }
            }},
        SRCLOC_DOUBLE("train.beta1", train.beta1),
        SRCLOC_DOUBLE("train.beta2", train.beta2),
        SRCLOC_DOUBLE("train.epsilon", train.epsilon),
        SRCLOC_INT("inference.grid_resolution", grid_resolution),
        SRCLOC_STRING("inference.observations", observations),
        SRCLOC_INT("mh.iterations", mh.iterations),
        SRCLOC_INT("mh.burn_in", mh.burn_in),
        Key{"mh.proposal_cov",
            [](const Config& c) {
                return format_double(c.mh.proposal_cov(0, 0)) + " " + format_double(c.mh.proposal_cov(0, 1)) + " " +
                       format_double(c.mh.proposal_cov(1, 1));
            },
            [](Config& c, const std::string& v) {
                const auto w = split_ws(v);
                if (w.size() == 1) {
                    c.mh.proposal_cov = parse_double(w[0], "mh.proposal_cov") * Eigen::Matrix2d::Identity();
                } else if (w.size() == 3) {
                    const double xy = parse_double(w[1], "mh.proposal_cov");
                    c.mh.proposal_cov << parse_double(w[0], "mh.proposal_cov"), xy, xy,
                        parse_double(w[2], "mh.proposal_cov");
                } else {
                    throw ConfigError("mh.proposal_cov", "expected 'v' or 'xx xy yy'");
                }
            }},
        SRCLOC_POINT("ablation.source", ablation_source),
        SRCLOC_POINTS("ablation.order", ablation_order),
        SRCLOC_POINT("symmetry.source", symmetry_source),
        SRCLOC_POINTS("symmetry.receivers", symmetry_receivers),
        SRCLOC_STRING("symmetry.forward", symmetry_forward),
        SRCLOC_INT("heatmap.bins", heatmap_bins),
        Key{"output.save_chains", [](const Config& c) { return std::string(c.save_chains ? "true" : "false"); },
            [](Config& c, const std::string& v) { c.save_chains = parse_bool(v, "output.save_chains"); }},
    };
    return table;
}

#undef SRCLOC_DOUBLE
#undef SRCLOC_INT
#undef SRCLOC_STRING
#undef SRCLOC_POINT
#undef SRCLOC_POINTS

} // namespace

void set(Config& cfg, const std::string& key, const std::string& value) {
    for (const Key& k : keys()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError(key, "unknown configuration key");
}

void apply(Config& cfg, const kv::Entries& entries) {
    for (const auto& [k, v] : entries) set(cfg, k, v);
}

kv::Entries to_entries(const Config& cfg) {
    kv::Entries out;
    for (const Key& k : keys()) out.emplace_back(k.name, k.get(cfg));
    return out;
}

void validate(const Config& cfg) {
    if (cfg.workers < 1) throw ConfigError("workers", "must be >= 1");
    cfg.grid.validate();
    cfg.medium.validate();
    wave::SourceParams probe = cfg.source;
    probe.location = {0.5, 0.5};
    probe.validate(cfg.grid.t_end);
    if (cfg.layout != "interleaved" && cfg.layout != "lattice" && cfg.layout != "random") {
        throw ConfigError("dataset.layout", "expected interleaved, lattice or random");
    }
    if (cfg.layout == "interleaved" && cfg.lattice_side < 2) throw ConfigError("dataset.lattice_side", "must be >= 2");
    if (cfg.layout != "interleaved") {
        if (cfg.n_train < 1) throw ConfigError("dataset.n_train", "must be >= 1");
        if (cfg.n_test < 0) throw ConfigError("dataset.n_test", "must be >= 0");
    }
    cfg.receivers.validate(true);
    if (!(cfg.sigma0_sq >= 0.0) || !std::isfinite(cfg.sigma0_sq)) {
        throw ConfigError("dataset.sigma0_sq", "must be finite and >= 0");
    }
    if (cfg.hidden.empty()) throw ConfigError("model.hidden", "need at least one hidden layer");
    for (int w : cfg.hidden) {
        if (w < 1) throw ConfigError("model.hidden", "layer widths must be >= 1");
    }
    {
        nn::Mlp shape;
        shape.dims = cfg.layer_dims();
        shape.skips = cfg.skips;
        for (std::size_t l = 0; l + 1 < shape.dims.size(); ++l) {
            shape.params.weights.push_back(Eigen::MatrixXd::Zero(shape.dims[l + 1], shape.dims[l]));
            shape.params.biases.push_back(Eigen::VectorXd::Zero(shape.dims[l + 1]));
        }
        shape.validate();
    }
    cfg.train.validate();
    if (cfg.grid_resolution < 2) throw ConfigError("inference.grid_resolution", "must be >= 2");
    cfg.mh.validate();
    if (!in_unit_square(cfg.ablation_source)) throw ConfigError("ablation.source", "must lie in [0,1]^2");
    if (!in_unit_square(cfg.symmetry_source)) throw ConfigError("symmetry.source", "must lie in [0,1]^2");
    data::ReceiverSet{cfg.symmetry_receivers}.validate(false);
    if (cfg.symmetry_forward != "surrogate" && cfg.symmetry_forward != "solver") {
        throw ConfigError("symmetry.forward", "expected surrogate or solver");
    }
    if (cfg.heatmap_bins < 1) throw ConfigError("heatmap.bins", "must be >= 1");
}

Config resolve(const std::optional<std::filesystem::path>& file, const kv::Entries& overrides) {
    Config cfg;
    if (file) config::apply(cfg, kv::read_file(*file));
    config::apply(cfg, overrides);
    validate(cfg);
    return cfg;
}

void write_config(const Config& cfg, const std::filesystem::path& path) {
    kv::write_file(to_entries(cfg), path, "resolved srcloc configuration");
}

} // namespace srcloc::config
