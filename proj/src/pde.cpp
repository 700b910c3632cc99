#include "bbmvote/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbmvote/errors.hpp"

namespace bbmvote {

namespace {

// Crank-Nicolson diffusion step with zero-flux boundaries.  The matrix is
// constant over a run, so the Thomas factorization happens once.
class CnDiffusion {
  public:
    CnDiffusion(int n, double dx, double dt) : n_(n), a_(dt / (2.0 * dx * dx)) {
        cp_.resize(static_cast<size_t>(n_));
        inv_.resize(static_cast<size_t>(n_));
        rhs_.resize(static_cast<size_t>(n_));
        // LHS tridiagonal: sub/super are -a (doubled at the mirrored ends).
        double b0 = 1.0 + 2.0 * a_;
        cp_[0] = -2.0 * a_ / b0;
        inv_[0] = 1.0 / b0;
        for (int i = 1; i < n_; ++i) {
            double sub = (i == n_ - 1) ? -2.0 * a_ : -a_;
            double denom = (1.0 + 2.0 * a_) - sub * cp_[static_cast<size_t>(i - 1)];
            inv_[static_cast<size_t>(i)] = 1.0 / denom;
            sub_.push_back(sub);
            double super = -a_;  // unused on the last row
            cp_[static_cast<size_t>(i)] = super / denom;
        }
    }

    void step(std::vector<double>& u) {
        const int n = n_;
        // RHS = (I + (dt/2) L) u, with mirrored Neumann end rows.
        rhs_[0] = (1.0 - 2.0 * a_) * u[0] + 2.0 * a_ * u[1];
        for (int i = 1; i < n - 1; ++i)
            rhs_[static_cast<size_t>(i)] = a_ * u[static_cast<size_t>(i - 1)] +
                                           (1.0 - 2.0 * a_) * u[static_cast<size_t>(i)] +
                                           a_ * u[static_cast<size_t>(i + 1)];
        rhs_[static_cast<size_t>(n - 1)] =
            2.0 * a_ * u[static_cast<size_t>(n - 2)] + (1.0 - 2.0 * a_) * u[static_cast<size_t>(n - 1)];
        // Thomas forward sweep with the precomputed factorization.
        u[0] = rhs_[0] * inv_[0];
        for (int i = 1; i < n; ++i)
            u[static_cast<size_t>(i)] =
                (rhs_[static_cast<size_t>(i)] - sub_[static_cast<size_t>(i - 1)] * u[static_cast<size_t>(i - 1)]) *
                inv_[static_cast<size_t>(i)];
        for (int i = n - 2; i >= 0; --i)
            u[static_cast<size_t>(i)] -= cp_[static_cast<size_t>(i)] * u[static_cast<size_t>(i + 1)];
    }

  private:
    int n_;
    double a_;
    std::vector<double> cp_, inv_, sub_, rhs_;
};

// RK4 on u' = f(u), pointwise.
void reaction_half_step(std::vector<double>& u, const Polynomial& f, double dt_half,
                        int substeps) {
    if (f.is_zero()) return;
    const double h = dt_half / substeps;
    for (double& y : u) {
        for (int s = 0; s < substeps; ++s) {
            double k1 = f.eval(y);
            double k2 = f.eval(y + 0.5 * h * k1);
            double k3 = f.eval(y + 0.5 * h * k2);
            double k4 = f.eval(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
}

void check_finite(const std::vector<double>& u, double dt) {
    for (double v : u)
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "solver went unstable (non-finite values); retry with dt <= " << dt / 4.0;
            throw NumericsError(os.str());
        }
}

struct WindowFit {
    std::vector<double> ts, xs;
};

WindowFit collect_window(std::span<const FrontPoint> series, double t_start, double t_end,
                         const char* who) {
    if (!(t_start < t_end)) throw ValidationError(std::string(who) + ": window must be ordered");
    WindowFit w;
    for (const auto& p : series)
        if (p.t >= t_start && p.t <= t_end && p.t > 0.0) {
            w.ts.push_back(p.t);
            w.xs.push_back(p.x);
        }
    if (w.ts.size() < 10)
        throw ValidationError(std::string(who) + ": degenerate window with " +
                              std::to_string(w.ts.size()) + " samples (need >= 10)");
    return w;
}

// Least squares y = slope * z + intercept.
struct LineFit {
    double slope, intercept, rms;
};

LineFit fit_line(const std::vector<double>& z, const std::vector<double>& y) {
    const double n = static_cast<double>(z.size());
    double sz = 0, sy = 0, szz = 0, szy = 0;
    for (size_t i = 0; i < z.size(); ++i) {
        sz += z[i];
        sy += y[i];
        szz += z[i] * z[i];
        szy += z[i] * y[i];
    }
    double denom = n * szz - sz * sz;
    LineFit fit{};
    fit.slope = (n * szy - sz * sy) / denom;
    fit.intercept = (sy - fit.slope * sz) / n;
    double ss = 0;
    for (size_t i = 0; i < z.size(); ++i) {
        double r = y[i] - fit.slope * z[i] - fit.intercept;
        ss += r * r;
    }
    fit.rms = std::sqrt(ss / n);
    return fit;
}

}  // namespace

double Field::at(double x) const {
    const double dx = grid.dx();
    if (x <= grid.x_min) return values.front();
    if (x >= grid.x_max) return values.back();
    double s = (x - grid.x_min) / dx;
    int i = std::min(static_cast<int>(s), grid.n_points - 2);
    double w = s - i;
    return values[static_cast<size_t>(i)] * (1.0 - w) + values[static_cast<size_t>(i + 1)] * w;
}

Field solve(const Polynomial& f, const InitialDatum& g, const Grid1D& grid, double t_end,
            const SolveConfig& cfg, std::vector<Field>* snapshots) {
    if (grid.n_points < 16) throw ValidationError("solve: grid needs at least 16 points");
    if (!(grid.x_min < grid.x_max)) throw ValidationError("solve: x_min must be below x_max");
    if (t_end < 0.0) throw ValidationError("solve: t_end must be >= 0");
    if (cfg.reaction_substeps < 1) throw ValidationError("solve: reaction_substeps must be >= 1");

    Field field{grid, 0.0, std::vector<double>(static_cast<size_t>(grid.n_points))};
    const double half = 0.5 * grid.dx();
    for (int i = 0; i < grid.n_points; ++i)
        field.values[static_cast<size_t>(i)] = g.average(grid.x(i) - half, grid.x(i) + half);
    if (t_end == 0.0) return field;

    const double dx = grid.dx();
    double dt_req = cfg.dt > 0.0 ? cfg.dt : 0.25 * dx * dx;
    const int n_steps = std::max<int>(1, static_cast<int>(std::ceil(t_end / dt_req - 1e-12)));
    const double dt = t_end / n_steps;

    CnDiffusion diffusion(grid.n_points, dx, dt);
    double next_snapshot = cfg.snapshot_interval;
    for (int s = 1; s <= n_steps; ++s) {
        reaction_half_step(field.values, f, dt / 2.0, cfg.reaction_substeps);
        diffusion.step(field.values);
        reaction_half_step(field.values, f, dt / 2.0, cfg.reaction_substeps);
        field.t = s * dt;
        if (s % 50 == 0) check_finite(field.values, dt);
        if (snapshots && cfg.snapshot_interval > 0.0 && field.t >= next_snapshot - dt / 2.0 &&
            s < n_steps) {
            snapshots->push_back(field);
            next_snapshot += cfg.snapshot_interval;
        }
    }
    field.t = t_end;
    check_finite(field.values, dt);
    if (snapshots && cfg.snapshot_interval > 0.0) snapshots->push_back(field);
    return field;
}

double heat_exact_step(double t, double x) {
    if (!(t > 0.0)) throw ValidationError("heat_exact_step requires t > 0");
    return 0.5 * std::erfc(x / (2.0 * std::sqrt(t)));
}

double front_location(const Field& field, double level) {
    const auto& u = field.values;
    for (int i = static_cast<int>(u.size()) - 2; i >= 0; --i) {
        double a = u[static_cast<size_t>(i)];
        double b = u[static_cast<size_t>(i + 1)];
        if (a >= level && b < level) {
            double w = (a - level) / (a - b);
            return field.grid.x(i) + w * field.grid.dx();
        }
    }
    throw ValidationError("front_location: the field does not cross the level");
}

FrontFit bramson_fit(std::span<const FrontPoint> series, double f_prime_0, double t_start,
                     double t_end) {
    if (!(f_prime_0 > 0.0)) throw ValidationError("bramson_fit requires f'(0) > 0");
    WindowFit w = collect_window(series, t_start, t_end, "bramson_fit");
    const double c = 2.0 * std::sqrt(f_prime_0);
    std::vector<double> z(w.ts.size()), y(w.ts.size());
    for (size_t i = 0; i < w.ts.size(); ++i) {
        z[i] = std::log(w.ts[i]);
        y[i] = w.xs[i] - c * w.ts[i];
    }
    LineFit fit = fit_line(z, y);
    return FrontFit{c, fit.slope, fit.intercept, t_start, t_end, fit.rms};
}

double pushed_speed(std::span<const FrontPoint> series, double t_start, double t_end) {
    WindowFit w = collect_window(series, t_start, t_end, "pushed_speed");
    return fit_line(w.ts, w.xs).slope;
}

std::vector<FrontPoint> front_run(const Polynomial& f, double t_end, const FrontRunConfig& cfg) {
    if (!(cfg.dx > 0.0)) throw ValidationError("front_run: dx must be positive");
    if (!(cfg.sample_interval > 0.0) || !(cfg.regrid_interval > 0.0))
        throw ValidationError("front_run: intervals must be positive");
    if (!(t_end >= cfg.sample_interval))
        throw ValidationError("front_run: t_end is below one sample interval");
    const int half_cells = static_cast<int>(std::lround(cfg.window_half_width / cfg.dx));
    if (half_cells < 20) throw ValidationError("front_run: window too narrow for the grid step");
    const int n = 2 * half_cells + 1;
    const double dx = cfg.dx;
    Grid1D grid{-half_cells * dx, half_cells * dx, n};

    // Step datum between the limiting states, initialized by cell averages.
    std::vector<double> u(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double frac = std::clamp((0.0 - (grid.x(i) - 0.5 * dx)) / dx, 0.0, 1.0);
        u[static_cast<size_t>(i)] = cfg.u_left * frac + cfg.u_right * (1.0 - frac);
    }

    double dt_req = cfg.dt > 0.0 ? cfg.dt : dx * dx;
    const int steps_per_sample =
        std::max<int>(1, static_cast<int>(std::ceil(cfg.sample_interval / dt_req - 1e-12)));
    const double dt = cfg.sample_interval / steps_per_sample;
    const int regrid_every =
        std::max<int>(1, static_cast<int>(std::lround(cfg.regrid_interval / cfg.sample_interval)));
    const int n_samples = static_cast<int>(std::lround(t_end / cfg.sample_interval));

    CnDiffusion diffusion(n, dx, dt);
    double offset = 0.0;
    std::vector<FrontPoint> series;
    series.reserve(static_cast<size_t>(n_samples));
    Field view{grid, 0.0, {}};

    for (int s = 1; s <= n_samples; ++s) {
        for (int k = 0; k < steps_per_sample; ++k) {
            reaction_half_step(u, f, dt / 2.0, cfg.reaction_substeps);
            diffusion.step(u);
            reaction_half_step(u, f, dt / 2.0, cfg.reaction_substeps);
        }
        check_finite(u, dt);
        view.values = u;
        view.t = s * cfg.sample_interval;
        double local = front_location(view, cfg.level);
        series.push_back({view.t, offset + local});

        if (s % regrid_every == 0) {
            // Re-center the window on the front by a whole number of cells,
            // filling exposed cells with the limiting states.
            int shift = static_cast<int>(std::lround(local / dx));
            if (std::abs(shift) >= n)
                throw NumericsError("front moved past the comoving window in one regrid "
                                    "interval; shrink regrid_interval or widen the window");
            if (shift > 0) {
                std::move(u.begin() + shift, u.end(), u.begin());
                std::fill(u.end() - shift, u.end(), cfg.u_right);
            } else if (shift < 0) {
                std::move_backward(u.begin(), u.end() + shift, u.end());
                std::fill(u.begin(), u.begin() - shift, cfg.u_left);
            }
            offset += shift * dx;
        }
    }
    return series;
}

}  // namespace bbmvote
