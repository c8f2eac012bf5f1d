#include "srcloc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "srcloc/errors.hpp"
#include "srcloc/kv.hpp"
#include "srcloc/parallel.hpp"
#include "srcloc/rng.hpp"

namespace srcloc::data {

namespace {

constexpr double kAxisTol = 1e-12;

// Symmetry axes of the unit square as signed-distance functions.
bool on_axis(const Point& p, int axis) {
    switch (axis) {
    case 0: return std::abs(p.x - 0.5) <= kAxisTol;
    case 1: return std::abs(p.y - 0.5) <= kAxisTol;
    case 2: return std::abs(p.x - p.y) <= kAxisTol;
    default: return std::abs(p.x + p.y - 1.0) <= kAxisTol;
    }
}

} // namespace

ReceiverSet ReceiverSet::standard() {
    return ReceiverSet{{{0.25, 0.625}, {0.5, 0.5}, {0.25, 0.125}, {0.75, 0.625}, {0.75, 0.25}}};
}

bool ReceiverSet::identifiable() const {
    if (positions.size() < 2) return false;
    for (int axis = 0; axis < 4; ++axis) {
        const bool all_on = std::all_of(positions.begin(), positions.end(),
                                        [axis](const Point& p) { return on_axis(p, axis); });
        if (all_on) return false;
    }
    return true;
}

void ReceiverSet::validate(bool for_inference) const {
    for (const Point& p : positions) {
        if (!in_unit_square(p)) throw ConfigError("receivers", "receiver outside [0,1]^2");
    }
    for (std::size_t a = 0; a < positions.size(); ++a) {
        for (std::size_t b = a + 1; b < positions.size(); ++b) {
            if (positions[a] == positions[b]) throw ConfigError("receivers", "duplicate receiver position");
        }
    }
    if (for_inference && positions.size() < 2) throw ConfigError("receivers", "inference needs at least 2 receivers");
}

void ObservationSet::validate() const {
    receivers.validate();
    if (values.rows() != static_cast<Eigen::Index>(receivers.size()) ||
        values.cols() != static_cast<Eigen::Index>(times.size())) {
        throw ConfigError("observations", "value table shape does not match receivers x times");
    }
    if (!values.allFinite()) throw ConfigError("observations", "non-finite observation value");
    if (!(sigma0_sq >= 0.0)) throw ConfigError("sigma0_sq", "must be >= 0");
}

ObservationSet ObservationSet::subset(std::span<const std::size_t> receiver_indices) const {
    ObservationSet out;
    out.times = times;
    out.sigma0_sq = sigma0_sq;
    out.source_truth = source_truth;
    out.values.resize(static_cast<Eigen::Index>(receiver_indices.size()), values.cols());
    for (std::size_t r = 0; r < receiver_indices.size(); ++r) {
        const std::size_t src = receiver_indices[r];
        if (src >= receivers.size()) throw ConfigError("receivers", "subset index out of range");
        out.receivers.positions.push_back(receivers.positions[src]);
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(src));
    }
    return out;
}

std::vector<Point> sample_sources(std::size_t n, SourceLayout layout, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sources", "need at least one source");
    std::vector<Point> out;
    out.reserve(n);
    if (layout == SourceLayout::UniformRandom) {
        Rng rng = Rng::stream(seed, "sources");
        for (std::size_t k = 0; k < n; ++k) {
            const double x = rng.uniform();
            const double y = rng.uniform();
            out.push_back({x, y});
        }
        return out;
    }
    const auto rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n)))));
    const std::size_t base = n / rows;
    const std::size_t extra = n % rows;
    for (std::size_t r = 0; r < rows; ++r) {
        // The last `extra` rows hold one additional point.
        const std::size_t count = base + (r >= rows - extra ? 1 : 0);
        const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
        for (std::size_t c = 0; c < count; ++c) out.push_back({(static_cast<double>(c) + 0.5) / static_cast<double>(count), y});
    }
    return out;
}

SourceSplit interleaved_split(int side) {
    if (side < 1) throw ConfigError("dataset.lattice_side", "must be >= 1");
    SourceSplit split;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const Point p{(c + 0.5) / side, (r + 0.5) / side};
            ((r + c) % 2 == 0 ? split.train : split.test).push_back(p);
        }
    }
    return split;
}

Eigen::MatrixXd add_noise(const Eigen::MatrixXd& clean, double sigma0_sq, std::uint64_t seed) {
    if (!(sigma0_sq >= 0.0)) throw ConfigError("sigma0_sq", "must be >= 0");
    Eigen::MatrixXd out = clean;
    if (sigma0_sq == 0.0) return out;
    const double sd = std::sqrt(sigma0_sq);
    Rng rng(seed);
    // Row-major draw order: receiver by receiver, time inner.
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += sd * rng.normal();
    }
    return out;
}

wave::SourceParams DatasetManifest::source_at(const Point& location) const {
    wave::SourceParams s = source;
    s.location = location;
    return s;
}

void DatasetManifest::validate() const {
    grid.validate();
    medium.validate();
    source.validate(grid.t_end);
    receivers.validate(!test_sources.empty());
    if (!(sigma0_sq >= 0.0) || !std::isfinite(sigma0_sq)) throw ConfigError("dataset.sigma0_sq", "must be finite and >= 0");
    for (const Point& p : train_sources) {
        if (!in_unit_square(p)) throw ConfigError("dataset.train_sources", "source outside [0,1]^2");
    }
    for (const Point& p : test_sources) {
        if (!in_unit_square(p)) throw ConfigError("dataset.test_sources", "source outside [0,1]^2");
        if (std::find(train_sources.begin(), train_sources.end(), p) != train_sources.end()) {
            throw ConfigError("dataset.test_sources", "train and test sources must be disjoint");
        }
    }
}

std::uint64_t noise_seed(std::uint64_t seed, std::size_t test_index) {
    return Rng::derive_seed(seed, "observation-noise", test_index);
}

std::vector<TraceRow> table_rows(const wave::TraceTable& table, const Point& source) {
    std::vector<TraceRow> rows;
    rows.reserve(table.receivers.size() * table.times.size());
    for (std::size_t r = 0; r < table.receivers.size(); ++r) {
        for (std::size_t j = 0; j < table.times.size(); ++j) {
            rows.push_back({source, table.receivers[r], table.times[j],
                            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j))});
        }
    }
    return rows;
}

std::vector<TraceRow> observation_rows(const ObservationSet& obs) {
    const Point src = obs.source_truth ? obs.source_truth->location : Point{std::nan(""), std::nan("")};
    return table_rows(wave::TraceTable{obs.receivers.positions, obs.times, obs.values}, src);
}

ObservationSet observations_from_rows(const std::vector<TraceRow>& rows, double sigma0_sq,
                                      const std::optional<wave::SourceParams>& truth_template) {
    ObservationSet obs;
    obs.sigma0_sq = sigma0_sq;
    if (rows.empty()) return obs;

    auto index_of = [](auto& list, const auto& value) {
        const auto it = std::find(list.begin(), list.end(), value);
        if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
        list.push_back(value);
        return list.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.reserve(rows.size());
    for (const TraceRow& row : rows) {
        if (!(row.source == rows.front().source) && !(std::isnan(row.source.x) && std::isnan(rows.front().source.x))) {
            throw ConfigError("observations", "rows mix several sources");
        }
        cells.emplace_back(index_of(obs.receivers.positions, row.x), index_of(obs.times, row.t));
    }
    const auto nr = static_cast<Eigen::Index>(obs.receivers.size());
    const auto nt = static_cast<Eigen::Index>(obs.times.size());
    if (static_cast<std::size_t>(nr * nt) != rows.size()) {
        throw ConfigError("observations", "rows do not form a complete receiver x time table");
    }
    obs.values = Eigen::MatrixXd::Constant(nr, nt, std::nan(""));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        obs.values(static_cast<Eigen::Index>(cells[k].first), static_cast<Eigen::Index>(cells[k].second)) = rows[k].p;
    }
    if (truth_template && !std::isnan(rows.front().source.x)) {
        wave::SourceParams truth = *truth_template;
        truth.location = rows.front().source;
        obs.source_truth = truth;
    }
    obs.validate();
    return obs;
}

Dataset build_dataset(const DatasetManifest& manifest, int workers) {
    manifest.validate();
    Dataset ds;
    ds.manifest = manifest;
    ds.train.resize(manifest.train_sources.size());
    ds.test.resize(manifest.test_sources.size());
    ds.test_clean.resize(manifest.test_sources.size());

    const auto& grid = manifest.grid;
    const std::size_t n_train = manifest.train_sources.size();
    const std::size_t n_total = n_train + manifest.test_sources.size();
    parallel_for(n_total, workers, [&](std::size_t task) {
        if (task < n_train) {
            const Point src = manifest.train_sources[task];
            const wave::SourceParams sp = manifest.source_at(src);
            if (!manifest.field_tuples) {
                ds.train[task] = table_rows(wave::simulate(sp, manifest.medium, grid, manifest.receivers.positions), src);
                return;
            }
            const auto snapshots = wave::simulate_snapshots(sp, manifest.medium, grid);
            const auto times = grid.output_times();
            auto& rows = ds.train[task];
            rows.reserve(static_cast<std::size_t>(grid.nx) * grid.ny * times.size());
            for (int i = 0; i < grid.nx; ++i) {
                for (int j = 0; j < grid.ny; ++j) {
                    for (std::size_t k = 0; k < times.size(); ++k) {
                        rows.push_back({src, grid.cell_center(i, j), times[k], snapshots[k](i, j)});
                    }
                }
            }
            return;
        }
        const std::size_t k = task - n_train;
        const Point src = manifest.test_sources[k];
        const wave::SourceParams sp = manifest.source_at(src);
        wave::TraceTable clean = wave::simulate(sp, manifest.medium, grid, manifest.receivers.positions);
        ObservationSet obs;
        obs.receivers = manifest.receivers;
        obs.times = clean.times;
        obs.values = add_noise(clean.values, manifest.sigma0_sq, noise_seed(manifest.seed, k));
        obs.sigma0_sq = manifest.sigma0_sq;
        obs.source_truth = sp;
        ds.test[k] = std::move(obs);
        ds.test_clean[k] = std::move(clean);
    });
    return ds;
}

std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(const std::string& text, const std::string& field) {
    const std::string t = kv::trim(text);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || t.empty()) throw ConfigError(field, "not a number: '" + text + "'");
    return v;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << kTraceHeader << '\n';
    for (const TraceRow& r : rows) {
        out << format_double(r.source.x) << ',' << format_double(r.source.y) << ',' << format_double(r.x.x) << ','
            << format_double(r.x.y) << ',' << format_double(r.t) << ',' << format_double(r.p) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || kv::trim(line) != kTraceHeader) {
        throw IoError(path.string() + ": missing header '" + kTraceHeader + "'");
    }
    std::vector<TraceRow> rows;
    std::size_t lineno = 1;
    std::string cell;
    while (std::getline(in, line)) {
        ++lineno;
        if (kv::trim(line).empty()) continue;
        double v[6];
        std::istringstream ls(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        for (int c = 0; c < 6; ++c) {
            if (!std::getline(ls, cell, ',')) throw IoError(where + ": expected 6 columns");
            try {
                v[c] = parse_double(cell, where);
            } catch (const ConfigError& e) {
                throw IoError(e.what());
            }
        }
        rows.push_back({{v[0], v[1]}, {v[2], v[3]}, v[4], v[5]});
    }
    return rows;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    kv::Entries e{
        {"format", "srcloc-dataset/1"},
        {"seed", std::to_string(m.seed)},
        {"sigma0_sq", format_double(m.sigma0_sq)},
        {"field_tuples", m.field_tuples ? "true" : "false"},
        {"grid.nx", std::to_string(m.grid.nx)},
        {"grid.ny", std::to_string(m.grid.ny)},
        {"grid.nt", std::to_string(m.grid.nt)},
        {"grid.t_end", format_double(m.grid.t_end)},
        {"grid.cfl", format_double(m.grid.cfl)},
        {"medium.kappa", format_double(m.medium.kappa)},
        {"medium.rho", format_double(m.medium.rho)},
        {"source.t0", format_double(m.source.t0)},
        {"source.omega", format_double(m.source.omega)},
        {"source.tau", format_double(m.source.tau)},
        {"receivers", kv::format_points(m.receivers.positions)},
        {"train_sources", kv::format_points(m.train_sources)},
        {"test_sources", kv::format_points(m.test_sources)},
    };
    kv::write_file(e, path, "srcloc dataset manifest");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    const kv::Entries entries = kv::read_file(path);
    std::map<std::string, std::string> m(entries.begin(), entries.end());
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = m.find(key);
        if (it == m.end()) throw IoError(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    if (get("format") != "srcloc-dataset/1") throw IoError(path.string() + ": unsupported format '" + get("format") + "'");
    auto num = [&](const std::string& key) { return parse_double(get(key), key); };
    auto integer = [&](const std::string& key) {
        const std::string& s = get(key);
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(key, "not an integer: '" + s + "'");
        return v;
    };
    DatasetManifest out;
    {
        const std::string& s = get("seed");
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("seed", "not an unsigned integer");
        out.seed = v;
    }
    out.sigma0_sq = num("sigma0_sq");
    out.field_tuples = get("field_tuples") == "true";
    out.grid.nx = static_cast<int>(integer("grid.nx"));
    out.grid.ny = static_cast<int>(integer("grid.ny"));
    out.grid.nt = static_cast<int>(integer("grid.nt"));
    out.grid.t_end = num("grid.t_end");
    out.grid.cfl = num("grid.cfl");
    out.medium.kappa = num("medium.kappa");
    out.medium.rho = num("medium.rho");
    out.source.t0 = num("source.t0");
    out.source.omega = num("source.omega");
    out.source.tau = num("source.tau");
    out.receivers.positions = kv::parse_points(get("receivers"), "receivers");
    out.train_sources = kv::parse_points(get("train_sources"), "train_sources");
    out.test_sources = kv::parse_points(get("test_sources"), "test_sources");
    out.validate();
    return out;
}

namespace {

std::filesystem::path train_path(const std::filesystem::path& dir, std::size_t k) {
    return dir / "train" / ("src_" + std::to_string(k) + ".csv");
}
std::filesystem::path test_path(const std::filesystem::path& dir, std::size_t k, bool clean) {
    return dir / "test" / ("src_" + std::to_string(k) + (clean ? ".clean.csv" : ".csv"));
}

} // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "train", ec);
    if (ec) throw IoError("cannot create " + (dir / "train").string() + ": " + ec.message());
    if (!ds.test.empty()) {
        std::filesystem::create_directories(dir / "test", ec);
        if (ec) throw IoError("cannot create " + (dir / "test").string() + ": " + ec.message());
    }
    write_manifest(ds.manifest, dir / "manifest.txt");
    for (std::size_t k = 0; k < ds.train.size(); ++k) write_trace_csv(ds.train[k], train_path(dir, k));
    for (std::size_t k = 0; k < ds.test.size(); ++k) {
        write_trace_csv(observation_rows(ds.test[k]), test_path(dir, k, false));
        if (k < ds.test_clean.size()) {
            write_trace_csv(table_rows(ds.test_clean[k], ds.manifest.test_sources[k]), test_path(dir, k, true));
        }
    }
}

Dataset read_dataset(const std::filesystem::path& dir, bool load_train, bool load_clean) {
    Dataset ds;
    ds.manifest = read_manifest(dir / "manifest.txt");
    const auto& m = ds.manifest;
    if (load_train) {
        for (std::size_t k = 0; k < m.train_sources.size(); ++k) ds.train.push_back(read_trace_csv(train_path(dir, k)));
    }
    for (std::size_t k = 0; k < m.test_sources.size(); ++k) {
        ds.test.push_back(observations_from_rows(read_trace_csv(test_path(dir, k, false)), m.sigma0_sq, m.source));
        if (load_clean) {
            const ObservationSet clean =
                observations_from_rows(read_trace_csv(test_path(dir, k, true)), 0.0, std::nullopt);
            ds.test_clean.push_back(wave::TraceTable{clean.receivers.positions, clean.times, clean.values});
        }
    }
    return ds;
}

} // namespace srcloc::data
