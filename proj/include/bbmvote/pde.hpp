#pragma once

#include <span>
#include <vector>

#include "bbmvote/estimate.hpp"
#include "bbmvote/poly.hpp"

namespace bbmvote {

struct Grid1D {
    double x_min = -1.0;
    double x_max = 1.0;
    int n_points = 16;

    double dx() const { return (x_max - x_min) / (n_points - 1); }
    double x(int i) const { return x_min + i * dx(); }
};

struct Field {
    Grid1D grid;
    double t = 0.0;
    std::vector<double> values;

    // Linear interpolation; clamped outside the grid.
    double at(double x) const;
};

struct SolveConfig {
    double dt = 0.0;            // 0 -> 0.25 * dx^2
    int reaction_substeps = 1;  // RK4 substeps per reaction half-step
    double snapshot_interval = 0.0;
};

// Semilinear solve of u_t = u_xx + f(u) with zero-flux boundaries.  Strang
// splitting: half-step RK4 reaction, full Crank-Nicolson diffusion step,
// half-step reaction.  No clamping anywhere; the scheme itself preserves
// [0,1] when f(0) = f(1) = 0 and dt <= dx^2.
Field solve(const Polynomial& f, const InitialDatum& g, const Grid1D& grid, double t_end,
            const SolveConfig& cfg = {}, std::vector<Field>* snapshots = nullptr);

// Unit-diffusion heat solution with step datum 1(x<0): erfc(x / (2 sqrt t))/2.
double heat_exact_step(double t, double x);

// Rightmost level crossing of the field, linearly interpolated.
double front_location(const Field& field, double level = 0.5);

struct FrontPoint {
    double t;
    double x;
};

struct FrontFit {
    double speed = 0.0;      // linear coefficient (pinned for the log fit)
    double log_slope = 0.0;  // coefficient of log t
    double intercept = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    double residual = 0.0;  // RMS residual of the fit
};

// Least squares of X(t) - 2 sqrt(f'(0)) t against log t over the window.
FrontFit bramson_fit(std::span<const FrontPoint> series, double f_prime_0, double t_start,
                     double t_end);

// Least-squares linear slope of X(t) over the window.
double pushed_speed(std::span<const FrontPoint> series, double t_start, double t_end);

struct FrontRunConfig {
    double dx = 0.05;
    double dt = 0.0;  // 0 -> dx^2 (the largest monotone Crank-Nicolson step)
    double window_half_width = 40.0;
    double regrid_interval = 1.0;
    double sample_interval = 1.0;
    double level = 0.5;
    double u_left = 1.0;   // limiting state filled behind the front
    double u_right = 0.0;  // limiting state filled ahead of the front
    int reaction_substeps = 1;
};

// Long-time front tracking in a comoving window: step datum at 0, the window
// [X - W, X + W] re-centers on the front every regrid_interval.  Returns the
// sampled absolute front locations.
std::vector<FrontPoint> front_run(const Polynomial& f, double t_end,
                                  const FrontRunConfig& cfg = {});

}  // namespace bbmvote
