#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "srcloc/dataset.hpp"
#include "srcloc/errors.hpp"
#include "srcloc/rng.hpp"

using namespace srcloc;
using namespace srcloc::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("srcloc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetManifest small_manifest() {
    DatasetManifest m;
    m.grid.nx = m.grid.ny = 8;
    m.grid.nt = 10;
    m.train_sources = {{0.25, 0.25}, {0.75, 0.75}};
    m.test_sources = {{0.25, 0.75}, {0.75, 0.25}, {0.5, 0.5}};
    m.seed = 11;
    return m;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("lattice sources") {
    const auto one = sample_sources(1, SourceLayout::Lattice, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Point{0.5, 0.5});

    auto four = sample_sources(4, SourceLayout::Lattice, 0);
    std::vector<Point> expect{{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}};
    auto key = [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
    std::sort(four.begin(), four.end(), key);
    CHECK(four == expect);

    for (std::size_t n : {2u, 7u, 50u}) {
        const auto pts = sample_sources(n, SourceLayout::Lattice, 0);
        CHECK(pts.size() == n);
        for (const auto& p : pts) CHECK((p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0));
    }
}

TEST_CASE("random sources are deterministic per seed") {
    const auto a = sample_sources(50, SourceLayout::UniformRandom, 7);
    const auto b = sample_sources(50, SourceLayout::UniformRandom, 7);
    const auto c = sample_sources(50, SourceLayout::UniformRandom, 8);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& p : a) CHECK(in_unit_square(p));
}

TEST_CASE("interleaved split is a disjoint checkerboard") {
    const auto s = interleaved_split(10);
    CHECK(s.train.size() == 50);
    CHECK(s.test.size() == 50);
    std::set<std::pair<double, double>> seen;
    for (const auto& p : s.train) seen.insert({p.x, p.y});
    for (const auto& p : s.test) CHECK(seen.count({p.x, p.y}) == 0);
    // Every interior test point has four train neighbours one lattice step away.
    const Point t = s.test[22];
    REQUIRE((t.x > 0.1 && t.x < 0.9 && t.y > 0.1 && t.y < 0.9));
    int near = 0;
    for (const auto& p : s.train) near += std::abs(squared_distance(p, t) - 0.01) < 1e-12;
    CHECK(near == 4);
}

TEST_CASE("noise injection") {
    const Eigen::MatrixXd clean = Eigen::MatrixXd::Random(5, 50);
    CHECK(add_noise(clean, 0.0, 3) == clean);
    CHECK(add_noise(clean, 0.25, 3) == add_noise(clean, 0.25, 3));
    CHECK(add_noise(clean, 0.25, 3) != add_noise(clean, 0.25, 4));

    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(100, 1000);
    const Eigen::MatrixXd noisy = add_noise(zeros, 0.25, 42);
    const double n = static_cast<double>(noisy.size());
    const double mean = noisy.mean();
    const double var = (noisy.array() - mean).square().sum() / (n - 1.0);
    CHECK(std::abs(var - 0.25) < 0.02 * 0.25);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("receiver identifiability") {
    CHECK(ReceiverSet::standard().identifiable());
    CHECK_FALSE(ReceiverSet{{{0.5, 0.25}, {0.5, 0.75}}}.identifiable());
    CHECK_FALSE(ReceiverSet{{{0.2, 0.5}, {0.9, 0.5}}}.identifiable());
    CHECK_FALSE(ReceiverSet{{{0.2, 0.2}, {0.7, 0.7}, {0.9, 0.9}}}.identifiable());
    CHECK_FALSE(ReceiverSet{{{0.2, 0.8}, {0.6, 0.4}}}.identifiable());
    CHECK_FALSE(ReceiverSet{{{0.3, 0.3}}}.identifiable());
    CHECK(ReceiverSet{{{0.25, 0.625}, {0.75, 0.25}}}.identifiable());

    CHECK_NOTHROW(ReceiverSet::standard().validate(true));
    CHECK_THROWS_AS((ReceiverSet{{{0.3, 0.3}}}.validate(true)), ConfigError);
    CHECK_THROWS_AS((ReceiverSet{{{0.3, 0.3}, {0.3, 0.3}}}.validate()), ConfigError);
    CHECK_THROWS_AS((ReceiverSet{{{0.3, 1.3}, {0.3, 0.3}}}.validate()), ConfigError);
}

TEST_CASE("observation set validation and subsets") {
    ObservationSet o;
    o.receivers = ReceiverSet::standard();
    o.times = {0.1, 0.2, 0.3};
    o.values = Eigen::MatrixXd::Random(5, 3);
    o.sigma0_sq = 0.25;
    CHECK_NOTHROW(o.validate());

    const std::vector<std::size_t> idx{4, 1};
    const ObservationSet s = o.subset(idx);
    REQUIRE(s.values.rows() == 2);
    CHECK(s.receivers.positions[0] == o.receivers.positions[4]);
    CHECK(s.values.row(0) == o.values.row(4));
    CHECK(s.values.row(1) == o.values.row(1));

    const std::vector<std::size_t> bad{7};
    CHECK_THROWS(o.subset(bad));

    ObservationSet neg = o;
    neg.sigma0_sq = -1.0;
    CHECK_THROWS_AS(neg.validate(), ConfigError);
    ObservationSet nan = o;
    nan.values(0, 0) = std::nan("");
    CHECK_THROWS(nan.validate());
    ObservationSet shape = o;
    shape.times.pop_back();
    CHECK_THROWS(shape.validate());
}

TEST_CASE("manifest must keep train and test disjoint") {
    DatasetManifest m = small_manifest();
    CHECK_NOTHROW(m.validate());
    m.test_sources.push_back(m.train_sources[0]);
    CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("build dataset shapes") {
    const DatasetManifest m = small_manifest();
    const Dataset ds = build_dataset(m, 2);
    REQUIRE(ds.train.size() == 2);
    CHECK(ds.train[0].size() == 8u * 8u * 10u);
    REQUIRE(ds.test.size() == 3);
    for (const auto& o : ds.test) {
        CHECK(o.values.rows() == 5);
        CHECK(o.values.cols() == 10);
        CHECK(o.sigma0_sq == 0.25);
        REQUIRE(o.source_truth.has_value());
    }
    CHECK(ds.test[2].source_truth->location == Point{0.5, 0.5});

    DatasetManifest receivers_only = m;
    receivers_only.field_tuples = false;
    CHECK(build_dataset(receivers_only).train[0].size() == 5u * 10u);

    DatasetManifest no_test = m;
    no_test.test_sources.clear();
    const Dataset t = build_dataset(no_test);
    CHECK(t.test.empty());
    CHECK(t.test_clean.empty());
}

TEST_CASE("build dataset is a pure function of the manifest") {
    const DatasetManifest m = small_manifest();
    const Dataset a = build_dataset(m, 1);
    const Dataset b = build_dataset(m, 3);
    CHECK(a.train == b.train);
    for (std::size_t k = 0; k < a.test.size(); ++k) CHECK(a.test[k].values == b.test[k].values);
}

TEST_CASE("pooled noise residuals match sigma0") {
    DatasetManifest m = small_manifest();
    m.test_sources = sample_sources(100, SourceLayout::Lattice, 0);
    m.train_sources = {{0.01, 0.01}};
    m.grid.nt = 200;
    m.grid.t_end = 2.0;
    m.receivers.positions.clear();
    for (int k = 0; k < 5; ++k) m.receivers.positions.push_back({0.1 + 0.2 * k, 0.3 + 0.1 * k});
    const Dataset ds = build_dataset(m, 1);
    std::vector<double> r;
    for (std::size_t k = 0; k < ds.test.size(); ++k) {
        const Eigen::MatrixXd d = ds.test[k].values - ds.test_clean[k].values;
        r.insert(r.end(), d.data(), d.data() + d.size());
    }
    REQUIRE(r.size() >= 100000);
    const double n = static_cast<double>(r.size());
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    CHECK(std::abs(var - 0.25) < 0.005);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("dataset round trip") {
    const Dataset ds = build_dataset(small_manifest());
    const fs::path dir = scratch("roundtrip");
    write_dataset(ds, dir / "dataset");
    CHECK(fs::exists(dir / "dataset" / "manifest.txt"));
    CHECK(fs::exists(dir / "dataset" / "train" / "src_1.csv"));
    CHECK(fs::exists(dir / "dataset" / "test" / "src_2.csv"));
    CHECK(fs::exists(dir / "dataset" / "test" / "src_2.clean.csv"));

    const Dataset back = read_dataset(dir / "dataset");
    CHECK(back.manifest.train_sources == ds.manifest.train_sources);
    CHECK(back.manifest.test_sources == ds.manifest.test_sources);
    CHECK(back.manifest.seed == ds.manifest.seed);
    CHECK(back.manifest.grid.nt == ds.manifest.grid.nt);
    CHECK(back.manifest.receivers.positions == ds.manifest.receivers.positions);
    CHECK(back.train == ds.train);
    REQUIRE(back.test.size() == ds.test.size());
    for (std::size_t k = 0; k < ds.test.size(); ++k) {
        CHECK(back.test[k].values == ds.test[k].values);
        CHECK(back.test[k].times == ds.test[k].times);
        CHECK(back.test[k].receivers.positions == ds.test[k].receivers.positions);
        CHECK(back.test_clean[k].values == ds.test_clean[k].values);
        CHECK(back.test[k].source_truth->location == ds.test[k].source_truth->location);
    }
}

TEST_CASE("trace csv errors") {
    const fs::path dir = scratch("csv");
    CHECK_THROWS_AS(read_trace_csv(dir / "missing.csv"), IoError);
    {
        std::ofstream out(dir / "bad.csv");
        out << "a,b,c\n1,2,3\n";
    }
    CHECK_THROWS_AS(read_trace_csv(dir / "bad.csv"), IoError);
    {
        std::ofstream out(dir / "short.csv");
        out << kTraceHeader << "\n0.1,0.2,0.3\n";
    }
    CHECK_THROWS_AS(read_trace_csv(dir / "short.csv"), IoError);
    CHECK_THROWS_AS(read_dataset(dir / "nothing"), IoError);
}

TEST_CASE("doubles round trip through text") {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(40)) - 20);
        CHECK(parse_double(format_double(v), "v") == v);
    }
}

} // TEST_SUITE
