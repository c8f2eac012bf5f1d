#include "srcloc/wave_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "srcloc/errors.hpp"

namespace srcloc::wave {

double MediumParams::wave_speed() const { return std::sqrt(kappa / rho); }

void MediumParams::validate() const {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("medium.kappa", "must be finite and > 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("medium.rho", "must be finite and > 0");
}

void SourceParams::validate(double t_end) const {
    if (!in_unit_square(location)) throw ConfigError("source.location", "must lie in [0,1]^2");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("source.omega", "must be finite and > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("source.tau", "must be finite and > 0");
    if (!(t0 >= 0.0 && t0 <= t_end)) throw ConfigError("source.t0", "must lie in [0, t_end]");
}

double SimGrid::max_stable_dt(const MediumParams& medium) const {
    return cfl * std::min(dx(), dy()) / (medium.wave_speed() * std::numbers::sqrt2);
}

int SimGrid::substeps(const MediumParams& medium) const {
    // The relative slack keeps exact ratios (0.04 / 0.02) from rounding up.
    const double ratio = output_interval() / max_stable_dt(medium);
    return std::max(1, static_cast<int>(std::ceil(ratio * (1.0 - 1e-12))));
}

std::vector<double> SimGrid::output_times() const {
    std::vector<double> times(static_cast<std::size_t>(nt));
    for (int j = 0; j < nt; ++j) times[j] = (j + 1) * t_end / nt;
    return times;
}

void SimGrid::validate() const {
    if (nx < 2) throw ConfigError("grid.nx", "must be >= 2");
    if (ny < 2) throw ConfigError("grid.ny", "must be >= 2");
    if (nt < 1) throw ConfigError("grid.nt", "must be >= 1");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("grid.t_end", "must be finite and > 0");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("grid.cfl", "must lie in (0, 1]");
}

WaveState WaveState::at_rest(int nx, int ny) {
    return WaveState{Field(nx, ny), Field(nx + 1, ny), Field(nx, ny + 1), 0.0};
}

bool WaveState::shape_consistent() const {
    return vx.nx() == nx() + 1 && vx.ny() == ny() && vy.nx() == nx() && vy.ny() == ny() + 1;
}

bool WaveState::all_finite() const {
    auto finite = [](const Field& f) {
        return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
    };
    return finite(p) && finite(vx) && finite(vy);
}

double ricker_source(const Point& x, double t, const SourceParams& source) {
    const double a = 2.0 * std::numbers::pi * source.omega;
    const double s2 = a * a * (t - source.t0) * (t - source.t0);
    const double r2 = squared_distance(x, source.location);
    return source.tau / std::numbers::pi * (1.0 - s2) * std::exp(-0.5 * (s2 + 2.0 * source.tau * r2));
}

namespace {

void kick(WaveState& s, double h_over_rho, double dx, double dy) {
    const int nx = s.nx();
    const int ny = s.ny();
    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) s.vx(i, j) -= h_over_rho * (s.p(i, j) - s.p(i - 1, j)) / dx;
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) s.vy(i, j) -= h_over_rho * (s.p(i, j) - s.p(i, j - 1)) / dy;
    }
}

void check_guard(const WaveState& s) {
    auto over = [](const Field& f) {
        return std::any_of(f.values().begin(), f.values().end(),
                           [](double v) { return !(std::abs(v) <= kOverflowGuard); });
    };
    if (over(s.p) || over(s.vx) || over(s.vy)) {
        throw StabilityViolation("field magnitude exceeded 1e12 at t = " + std::to_string(s.t));
    }
}

} // namespace

void advance(WaveState& s, const MediumParams& medium, const std::optional<SourceParams>& source, double dt) {
    const int nx = s.nx();
    const int ny = s.ny();
    const double dx = 1.0 / nx;
    const double dy = 1.0 / ny;
    const double half = 0.5 * dt / medium.rho;

    kick(s, half, dx, dy);

    const double t_mid = s.t + 0.5 * dt;
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const double div = (s.vx(i + 1, j) - s.vx(i, j)) / dx + (s.vy(i, j + 1) - s.vy(i, j)) / dy;
            double rate = -medium.kappa * div;
            if (source) rate += ricker_source({(i + 0.5) * dx, (j + 0.5) * dy}, t_mid, *source);
            s.p(i, j) += dt * rate;
        }
    }

    kick(s, half, dx, dy);
    s.t += dt;
    check_guard(s);
}

WaveState step(const WaveState& state, const MediumParams& medium, const std::optional<SourceParams>& source,
               double dt) {
    WaveState next = state;
    advance(next, medium, source, dt);
    return next;
}

double sample_pressure(const Field& p, const Point& x) {
    const int nx = p.nx();
    const int ny = p.ny();
    const double fx = std::clamp(x.x * nx - 0.5, 0.0, static_cast<double>(nx - 1));
    const double fy = std::clamp(x.y * ny - 0.5, 0.0, static_cast<double>(ny - 1));
    const int i = std::min(static_cast<int>(fx), nx - 2);
    const int j = std::min(static_cast<int>(fy), ny - 2);
    const double ax = fx - i;
    const double ay = fy - j;
    return (1.0 - ax) * (1.0 - ay) * p(i, j) + ax * (1.0 - ay) * p(i + 1, j) + (1.0 - ax) * ay * p(i, j + 1) +
           ax * ay * p(i + 1, j + 1);
}

namespace {

template <typename Observer>
void run(const SourceParams& source, const MediumParams& medium, const SimGrid& grid, Observer&& observe) {
    grid.validate();
    medium.validate();
    source.validate(grid.t_end);

    const int k = grid.substeps(medium);
    const double dt = grid.output_interval() / k;
    const std::optional<SourceParams> forcing = source;
    WaveState state = WaveState::at_rest(grid.nx, grid.ny);
    for (int j = 0; j < grid.nt; ++j) {
        for (int s = 0; s < k; ++s) advance(state, medium, forcing, dt);
        observe(j, state);
    }
}

} // namespace

TraceTable simulate(const SourceParams& source, const MediumParams& medium, const SimGrid& grid,
                    std::span<const Point> receivers) {
    for (const Point& r : receivers) {
        if (!in_unit_square(r)) throw ConfigError("receivers", "receiver outside [0,1]^2");
    }
    TraceTable table;
    table.receivers.assign(receivers.begin(), receivers.end());
    table.times = grid.output_times();
    table.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(receivers.size()), grid.nt);
    run(source, medium, grid, [&](int j, const WaveState& state) {
        for (std::size_t r = 0; r < receivers.size(); ++r) {
            table.values(static_cast<Eigen::Index>(r), j) = sample_pressure(state.p, receivers[r]);
        }
    });
    return table;
}

std::vector<Field> simulate_snapshots(const SourceParams& source, const MediumParams& medium, const SimGrid& grid) {
    std::vector<Field> out;
    out.reserve(static_cast<std::size_t>(grid.nt));
    run(source, medium, grid, [&](int, const WaveState& state) { out.push_back(state.p); });
    return out;
}

double energy(const WaveState& state, const MediumParams& medium) {
    double pressure = 0.0;
    for (double v : state.p.values()) pressure += v * v;
    double kinetic = 0.0;
    for (double v : state.vx.values()) kinetic += v * v;
    for (double v : state.vy.values()) kinetic += v * v;
    const double area = 1.0 / (static_cast<double>(state.nx()) * state.ny());
    return 0.5 * (pressure / medium.kappa + medium.rho * kinetic) * area;
}

} // namespace srcloc::wave
