#include <doctest.h>

#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "srcloc/errors.hpp"
#include "srcloc/inference.hpp"
#include "support.hpp"

using namespace srcloc;
using namespace srcloc::infer;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// p(r, t; y) = cos(3 |r - y| - 2t): smooth, location dependent, cheap.
class ToyForward final : public ForwardModel {
public:
    Eigen::MatrixXd predict(const Point& y, std::span<const Point> receivers,
                            std::span<const double> times) const override {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(receivers.size()), static_cast<Eigen::Index>(times.size()));
        for (std::size_t r = 0; r < receivers.size(); ++r) {
            const double d = std::sqrt(squared_distance(receivers[r], y));
            for (std::size_t j = 0; j < times.size(); ++j) out(r, j) = std::cos(3.0 * d - 2.0 * times[j]);
        }
        return out;
    }
};

class ConstantForward final : public ForwardModel {
public:
    Eigen::MatrixXd predict(const Point&, std::span<const Point> receivers,
                            std::span<const double> times) const override {
        return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(receivers.size()),
                                         static_cast<Eigen::Index>(times.size()), 0.5);
    }
};

data::ObservationSet observe(const ForwardModel& model, const Point& truth) {
    data::ObservationSet o;
    o.receivers = data::ReceiverSet::standard();
    for (int j = 0; j < 20; ++j) o.times.push_back(0.1 * (j + 1));
    o.values = model.predict(truth, o.receivers.positions, o.times);
    o.sigma0_sq = 0.25;
    o.source_truth = wave::SourceParams{truth};
    return o;
}

double std_normal_log_density(const Point& p) { return -0.5 * (p.x * p.x + p.y * p.y); }

} // namespace

TEST_SUITE("inference") {

TEST_CASE("log posterior basics") {
    const ToyForward model;
    const Point truth{0.3, 0.7};
    const Posterior post(observe(model, truth), model, {0.25, 0.1});
    CHECK(post.log_density({1.5, 0.5}) == kNegInf);
    CHECK(post.log_density({-0.01, 0.5}) == kNegInf);
    CHECK(post.log_density(truth) == 0.0);
    CHECK(post.log_density({0.6, 0.2}) < 0.0);
    CHECK(log_posterior(truth, post) == 0.0);
}

TEST_CASE("single residual of one gives minus one") {
    const ConstantForward model;
    data::ObservationSet o;
    o.receivers.positions = {{0.2, 0.3}};
    o.times = {1.0};
    o.values = Eigen::MatrixXd::Constant(1, 1, 1.5);
    o.sigma0_sq = 0.3;
    const Posterior post(o, model, {0.3, 0.2});
    CHECK(post.log_density({0.5, 0.5}) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("posterior rejects zero total variance and mismatched shapes") {
    const ToyForward model;
    const auto obs = observe(model, {0.5, 0.5});
    CHECK_THROWS_AS(Posterior(obs, model, {0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(Posterior(obs, model, {-0.1, 0.2}), ConfigError);
}

TEST_CASE("surrogate forward lays out receivers by times") {
    const nn::Mlp net = nn::Mlp::create({5, 9, 9, 1}, {}, 3);
    const SurrogateForward model(net);
    const std::vector<Point> rec{{0.1, 0.2}, {0.7, 0.4}, {0.5, 0.9}};
    const std::vector<double> times{0.3, 1.1};
    const Point y{0.35, 0.65};
    const Eigen::MatrixXd p = model.predict(y, rec, times);
    REQUIRE(p.rows() == 3);
    REQUIRE(p.cols() == 2);
    for (int r = 0; r < 3; ++r) {
        for (int j = 0; j < 2; ++j) {
            const double in[5] = {y.x, y.y, rec[r].x, rec[r].y, times[j]};
            CHECK(p(r, j) == doctest::Approx(testing::oracle_forward(net, in)).epsilon(1e-12));
        }
    }
}

TEST_CASE("solver forward reproduces simulate") {
    wave::SimGrid g;
    g.nt = 12;
    const SolverForward model(wave::SourceParams{}, wave::MediumParams{}, g);
    const auto rec = data::ReceiverSet::standard().positions;
    const auto times = g.output_times();
    const Point y{0.4, 0.3};
    const auto table = wave::simulate(wave::SourceParams{y}, wave::MediumParams{}, g, rec);
    CHECK(model.predict(y, rec, times) == table.values);
    const std::vector<double> wrong{0.5};
    CHECK_THROWS(model.predict(y, rec, wrong));
}

TEST_CASE("grid search tie-break and evaluation count") {
    std::atomic<int> calls{0};
    const GridResult g = grid_search(
        [&](const Point&) {
            ++calls;
            return -3.0;
        },
        150, 3);
    CHECK(calls == 22500);
    CHECK(g.values.rows() == 150);
    CHECK(g.values.cols() == 150);
    CHECK(g.best_row == 0);
    CHECK(g.best_col == 0);
    CHECK(g.best.x == doctest::Approx(1.0 / 300.0));
    CHECK(g.best.y == doctest::Approx(1.0 / 300.0));
    CHECK((g.values.array() == -3.0).all());

    const ConstantForward model;
    const GridResult h = grid_search(Posterior(observe(model, {0.5, 0.5}), model, {0.25, 0.0}), 20);
    CHECK(h.best_row == 0);
    CHECK(h.best_col == 0);
}

TEST_CASE("grid layout is row = y, col = x") {
    const GridResult g = grid_search([](const Point& p) { return -squared_distance(p, {0.77, 0.12}); }, 10);
    CHECK(g.best_col == 7);
    CHECK(g.best_row == 1);
    CHECK(g.best == Point{0.75, 0.15});
    CHECK(GridResult::cell_center(10, 1, 7) == g.best);
    CHECK(g.values(1, 7) == g.best_value);
}

TEST_CASE("grid search argmax agrees with an exhaustive scan") {
    const ToyForward model;
    const Posterior post(observe(model, {0.62, 0.37}), model, {0.25, 0.0});
    const GridResult g = grid_search(post, 60, 2);
    Eigen::Index br = 0;
    Eigen::Index bc = 0;
    for (Eigen::Index r = 0; r < g.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.values.cols(); ++c) {
            if (g.values(r, c) > g.values(br, bc)) {
                br = r;
                bc = c;
            }
        }
    }
    CHECK(g.best_row == br);
    CHECK(g.best_col == bc);
    CHECK(g.best_value == g.values.maxCoeff());
    CHECK(grid_search(post, 60, 1).values == g.values);
    CHECK_THROWS_AS(grid_search(post, 1), ConfigError);
}

TEST_CASE("grid search ignores NaN cells") {
    const GridResult g = grid_search(
        [](const Point& p) { return p.x < 0.2 ? std::nan("") : -p.y; }, 10);
    CHECK(g.best_row == 0);
    CHECK(g.best_col == 2);
}

TEST_CASE("shift invariance of grid search and MH decisions") {
    const ToyForward model;
    const Posterior post(observe(model, {0.44, 0.58}), model, {0.25, 0.0});
    const LogTarget base = [&](const Point& p) { return post.log_density(p); };
    const LogTarget shifted = [&](const Point& p) { return post.log_density(p) + 1234.5; };
    const GridResult a = grid_search(base, 40);
    const GridResult b = grid_search(shifted, 40);
    CHECK(a.best_row == b.best_row);
    CHECK(a.best_col == b.best_col);

    MhConfig cfg;
    cfg.iterations = 4000;
    cfg.burn_in = 0;
    cfg.seed = 17;
    cfg.proposal_cov = 0.01 * Eigen::Matrix2d::Identity();
    const Chain ca = mh_sample(a.best, base, cfg);
    const Chain cb = mh_sample(a.best, shifted, cfg);
    CHECK(ca.accepted == cb.accepted);
    CHECK(ca.samples == cb.samples);
}

TEST_CASE("mh config validation") {
    MhConfig c;
    CHECK_NOTHROW(c.validate());
    c.burn_in = c.iterations;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = MhConfig{};
    c.burn_in = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = MhConfig{};
    c.proposal_cov << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.proposal_cov << 1.0, 0.1, 0.0, 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("invalid initial point") {
    const ToyForward model;
    const Posterior post(observe(model, {0.5, 0.5}), model, {0.25, 0.0});
    CHECK_THROWS_AS(mh_sample({1.2, 0.5}, post, MhConfig{}), InvalidInit);
    CHECK_THROWS_AS(mh_sample({0.5, 0.5}, [](const Point&) { return std::nan(""); }, MhConfig{}), InvalidInit);
}

TEST_CASE("out-of-support proposals are always rejected") {
    std::atomic<int> outside{0};
    const LogTarget target = [&](const Point& p) {
        if (!in_unit_square(p)) {
            ++outside;
            return kNegInf;
        }
        return 0.0;
    };
    MhConfig cfg;
    cfg.proposal_cov = 25.0 * Eigen::Matrix2d::Identity();
    cfg.iterations = 3000;
    cfg.burn_in = 0;
    cfg.seed = 3;
    const Chain c = mh_sample({0.999, 0.999}, target, cfg);
    CHECK(outside > 2500);
    CHECK(c.accepted_count <= c.proposed_count);
    CHECK(c.proposed_count == 3000);
    for (const Point& p : c.samples) CHECK(in_unit_square(p));
    // Acceptance only ever happens inside the square, where the target is flat.
    CHECK(c.accepted_count == 3000 - outside.load());
}

TEST_CASE("chain bookkeeping and determinism") {
    MhConfig cfg;
    cfg.iterations = 1000;
    cfg.burn_in = 100;
    cfg.seed = 8;
    cfg.proposal_cov = 0.05 * Eigen::Matrix2d::Identity();
    const LogTarget t = [](const Point& p) { return in_unit_square(p) ? -10.0 * squared_distance(p, {0.5, 0.5}) : kNegInf; };
    const Chain a = mh_sample({0.5, 0.5}, t, cfg);
    const Chain b = mh_sample({0.5, 0.5}, t, cfg);
    CHECK(a.samples == b.samples);
    CHECK(a.log_post == b.log_post);
    CHECK(a.samples.size() == 900);
    CHECK(a.first_iteration == 101);
    CHECK(a.proposed_count == 1000);
    long long kept = 0;
    for (unsigned char f : a.accepted) kept += f;
    CHECK(kept <= a.accepted_count);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.log_post[i] == t(a.samples[i]));
    cfg.seed = 9;
    CHECK(mh_sample({0.5, 0.5}, t, cfg).samples != a.samples);
}

TEST_CASE("mh reproduces standard normal moments") {
    MhConfig cfg;
    cfg.iterations = 50000;
    cfg.burn_in = 1000;
    cfg.seed = 2024;
    cfg.proposal_cov = 2.88 * Eigen::Matrix2d::Identity();
    const Chain c = mh_sample({0.0, 0.0}, std_normal_log_density, cfg);
    const Summary s = summarize(c, std::nullopt);
    const Point se = batch_means_standard_error(c.samples, 50);
    CHECK(std::abs(s.mean.x) < 3.0 * se.x);
    CHECK(std::abs(s.mean.y) < 3.0 * se.y);
    CHECK(std::abs(s.covariance(0, 0) - 1.0) < 0.1);
    CHECK(std::abs(s.covariance(1, 1) - 1.0) < 0.1);
    CHECK(std::abs(s.covariance(0, 1)) < 0.1);
}

TEST_CASE("transition counts satisfy detailed balance") {
    // Two-bump target on the square, split into four quadrants. For a
    // reversible stationary chain the flux i -> j equals the flux j -> i.
    const LogTarget t = [](const Point& p) {
        if (!in_unit_square(p)) return kNegInf;
        const double a = std::exp(-20.0 * squared_distance(p, {0.25, 0.3}));
        const double b = 0.6 * std::exp(-30.0 * squared_distance(p, {0.7, 0.75}));
        return std::log(a + b + 1e-3);
    };
    MhConfig cfg;
    cfg.iterations = 400000;
    cfg.burn_in = 1000;
    cfg.seed = 5;
    cfg.proposal_cov = 0.04 * Eigen::Matrix2d::Identity();
    const Chain c = mh_sample({0.25, 0.3}, t, cfg);
    auto region = [](const Point& p) { return (p.x < 0.5 ? 0 : 1) + (p.y < 0.5 ? 0 : 2); };
    std::array<std::array<double, 4>, 4> n{};
    for (std::size_t i = 1; i < c.samples.size(); ++i) n[region(c.samples[i - 1])][region(c.samples[i])] += 1.0;
    int pairs = 0;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            const double total = n[i][j] + n[j][i];
            if (total < 100.0) continue;
            ++pairs;
            // Counts are autocorrelated; allow a generous multiple of the Poisson scale.
            CHECK(std::abs(n[i][j] - n[j][i]) < 6.0 * std::sqrt(total));
        }
    }
    CHECK(pairs >= 3);
}

TEST_CASE("summaries") {
    Chain same;
    same.samples.assign(5, Point{0.3, 0.4});
    same.proposed_count = 10;
    same.accepted_count = 4;
    const Summary a = summarize(same, Point{0.3, 0.4});
    CHECK(a.mean == Point{0.3, 0.4});
    CHECK(*a.mse == 0.0);
    CHECK(a.covariance.isZero(1e-30));
    CHECK(a.acceptance_rate == doctest::Approx(0.4));

    Chain two;
    two.samples = {{0.0, 0.0}, {1.0, 1.0}};
    const Summary b = summarize(two, Point{0.0, 0.0});
    CHECK(b.mean == Point{0.5, 0.5});
    CHECK(*b.mse == doctest::Approx(1.0));
    CHECK(b.covariance(0, 1) == doctest::Approx(0.5));
    CHECK_FALSE(summarize(two, std::nullopt).mse.has_value());

    CHECK_THROWS(summarize(Chain{}, std::nullopt));
}

TEST_CASE("batch means standard error on independent draws") {
    Rng rng(1);
    std::vector<Point> s(100000);
    for (auto& p : s) p = {rng.normal(), 2.0 * rng.normal()};
    const Point se = batch_means_standard_error(s, 50);
    CHECK(se.x == doctest::Approx(1.0 / std::sqrt(1e5)).epsilon(0.3));
    CHECK(se.y == doctest::Approx(2.0 / std::sqrt(1e5)).epsilon(0.3));
    CHECK_THROWS(batch_means_standard_error(std::span<const Point>(s.data(), 10), 50));
}

} // TEST_SUITE
