#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "srcloc/geometry.hpp"

namespace srcloc::wave {

/// Homogeneous acoustic medium. Wave speed is sqrt(kappa / rho).
struct MediumParams {
    double kappa = 1.0;
    double rho = 1.0;

    double wave_speed() const;
    void validate() const;
};

/// Space-time Ricker forcing centred at `location`.
struct SourceParams {
    Point location{0.5, 0.5};
    double t0 = 0.2;
    double omega = 1.0;
    double tau = 200.0;

    void validate(double t_end) const;
};

/// Discretisation of the unit square and the time window [0, t_end].
///
/// `nt` is the number of uniformly spaced output samples, at
/// t_j = (j + 1) * t_end / nt. The solver sub-steps each output interval
/// with the largest step that satisfies dt <= cfl * min(dx, dy) / (c * sqrt 2).
struct SimGrid {
    int nx = 16;
    int ny = 16;
    int nt = 50;
    double t_end = 2.0;
    double cfl = 0.5;

    double dx() const { return 1.0 / nx; }
    double dy() const { return 1.0 / ny; }
    double output_interval() const { return t_end / nt; }
    double max_stable_dt(const MediumParams& medium) const;
    int substeps(const MediumParams& medium) const;
    double solver_dt(const MediumParams& medium) const { return output_interval() / substeps(medium); }
    std::vector<double> output_times() const;
    Point cell_center(int i, int j) const { return {(i + 0.5) * dx(), (j + 0.5) * dy()}; }
    void validate() const;
};

/// Dense 2-D array indexed (i, j), i along x. Storage is i-major.
class Field {
public:
    Field() = default;
    Field(int nx, int ny, double value = 0.0)
        : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), value) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * ny_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * ny_ + j]; }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> data_;
};

/// Pressure at cell centres, normal velocities on faces, all at time t.
/// vx is (nx + 1) x ny, vy is nx x (ny + 1); wall faces carry zero velocity.
struct WaveState {
    Field p;
    Field vx;
    Field vy;
    double t = 0.0;

    static WaveState at_rest(int nx, int ny);
    int nx() const { return p.nx(); }
    int ny() const { return p.ny(); }
    bool shape_consistent() const;
    bool all_finite() const;
};

/// Receiver traces: values(r, j) is the pressure at receivers[r] and times[j].
struct TraceTable {
    std::vector<Point> receivers;
    std::vector<double> times;
    Eigen::MatrixXd values;
};

inline constexpr double kOverflowGuard = 1e12;

double ricker_source(const Point& x, double t, const SourceParams& source);

/// One velocity-Verlet update of the staggered system: half kick of v from
/// grad p, full pressure update from div v plus dt * f_s at the step midpoint,
/// second half kick. No forcing when `source` is empty.
WaveState step(const WaveState& state, const MediumParams& medium, const std::optional<SourceParams>& source,
               double dt);

/// In-place variant used by the simulation loops.
void advance(WaveState& state, const MediumParams& medium, const std::optional<SourceParams>& source, double dt);

/// Bilinear interpolation of the cell-centred pressure. Points between the
/// outermost centres and the wall take the nearest centre value, matching the
/// zero normal derivative of a rigid wall.
double sample_pressure(const Field& p, const Point& x);

/// Runs grid.nt output intervals from rest and records receiver traces.
TraceTable simulate(const SourceParams& source, const MediumParams& medium, const SimGrid& grid,
                    std::span<const Point> receivers);

/// Same run as `simulate`, returning the whole pressure field at every output time.
std::vector<Field> simulate_snapshots(const SourceParams& source, const MediumParams& medium, const SimGrid& grid);

/// Discrete energy 0.5 * sum(p^2 / kappa + rho * |v|^2) * cell area.
double energy(const WaveState& state, const MediumParams& medium);

} // namespace srcloc::wave
