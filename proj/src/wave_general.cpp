#include "escape/wave_general.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "escape/errors.hpp"
#include "escape/wave_radial.hpp"

namespace escape {

namespace {

double gamma_at(const MetricField& g, double r, double th) {
  Vec x(2), t(2);
  x << r * std::cos(th), r * std::sin(th);
  t << -std::sin(th), std::cos(th);
  return r * r * t.dot(g.G_raw(x) * t);
}

Vec point(double r, double th) {
  Vec x(2);
  x << r * std::cos(th), r * std::sin(th);
  return x;
}

Vec angular_vector(double r, double th) {
  Vec v(2);
  v << -r * std::sin(th), r * std::cos(th);
  return v;
}

// Fills `out` (rows x N_theta) from f(r_row, theta_col); isotropic metrics
// evaluate once per row so every column is bitwise identical.
template <class F>
void sample(std::vector<double>& out, int rows, const PolarGrid& grid, bool per_row,
            const F& f) {
  out.resize(static_cast<std::size_t>(rows) * grid.N_theta);
  for (int i = 0; i < rows; ++i) {
    if (per_row) {
      const double v = f(i, 0.0);
      for (int j = 0; j < grid.N_theta; ++j) out[grid.idx(i, j)] = v;
    } else {
      for (int j = 0; j < grid.N_theta; ++j) out[grid.idx(i, j)] = f(i, grid.theta(j));
    }
  }
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

}  // namespace

PolarGrid make_polar_grid(const MetricField& g, double r0, double R_max, int N_r, int N_theta) {
  if (g.dim() != 2) throw ParameterError("the polar solver needs a two-dimensional metric");
  if (!(r0 > 0.0) || !(R_max > r0)) throw ConfigError("need 0 < r0 < R_max");
  if (N_r < 4 || N_theta < 4) throw ConfigError("need N_r >= 4 and N_theta >= 4");
  if (g.exterior() && r0 < g.r_c() * (1.0 - 1e-12)) {
    throw DomainError("obstacle radius lies inside r_c of an exterior metric");
  }
  PolarGrid grid;
  grid.N_r = N_r;
  grid.N_theta = N_theta;
  grid.r0 = r0;
  grid.R_max = R_max;
  grid.dr = (R_max - r0) / N_r;
  grid.dtheta = 2.0 * M_PI / N_theta;
  grid.theta_independent = g.isotropic();
  const bool row = grid.theta_independent;

  std::vector<double> gam;
  sample(gam, N_r + 1, grid, row, [&](int i, double th) { return gamma_at(g, grid.r(i), th); });
  grid.sqrt_gamma.resize(gam.size());
  grid.inv_gamma.resize(gam.size());
  for (std::size_t k = 0; k < gam.size(); ++k) {
    if (!(gam[k] > 0.0)) throw NonPositiveDefinite("gamma must be positive on the grid");
    grid.sqrt_gamma[k] = std::sqrt(gam[k]);
    grid.inv_gamma[k] = 1.0 / gam[k];
  }
  sample(grid.sqrt_gamma_rh, N_r, grid, row,
         [&](int i, double th) { return std::sqrt(gamma_at(g, grid.r0 + (i + 0.5) * grid.dr, th)); });
  sample(grid.inv_sqrt_gamma_th, N_r + 1, grid, row, [&](int i, double th) {
    return 1.0 / std::sqrt(gamma_at(g, grid.r(i), th + 0.5 * grid.dtheta));
  });
  return grid;
}

WaveField zero_field(const PolarGrid& grid) {
  WaveField f;
  f.u.assign(grid.size(), 0.0);
  f.ut.assign(grid.size(), 0.0);
  return f;
}

void laplace_beltrami_apply(const PolarGrid& grid, const std::vector<double>& u,
                            std::vector<double>& out) {
  const int Nr = grid.N_r, Nt = grid.N_theta;
  const double ir2 = 1.0 / (grid.dr * grid.dr);
  const double it2 = 1.0 / (grid.dtheta * grid.dtheta);
  out.assign(grid.size(), 0.0);
  for (int i = 1; i < Nr; ++i) {
    const double* up = &u[grid.idx(i + 1, 0)];
    const double* uc = &u[grid.idx(i, 0)];
    const double* um = &u[grid.idx(i - 1, 0)];
    const double* sp = &grid.sqrt_gamma_rh[grid.idx(i, 0)];
    const double* sm = &grid.sqrt_gamma_rh[grid.idx(i - 1, 0)];
    const double* qt = &grid.inv_sqrt_gamma_th[grid.idx(i, 0)];
    const double* sg = &grid.sqrt_gamma[grid.idx(i, 0)];
    double* o = &out[grid.idx(i, 0)];
    for (int j = 0; j < Nt; ++j) {
      const int jp = j + 1 == Nt ? 0 : j + 1;
      const int jm = j == 0 ? Nt - 1 : j - 1;
      const double radial = (sp[j] * (up[j] - uc[j]) - sm[j] * (uc[j] - um[j])) * ir2;
      const double angular = (qt[j] * (uc[jp] - uc[j]) - qt[jm] * (uc[j] - uc[jm])) * it2;
      o[j] = (radial + angular) / sg[j];
    }
  }
}

double weighted_inner(const PolarGrid& grid, const std::vector<double>& u,
                      const std::vector<double>& v) {
  double s = 0.0;
  for (int i = 1; i < grid.N_r; ++i) {
    for (int j = 0; j < grid.N_theta; ++j) {
      const std::size_t k = grid.idx(i, j);
      s += grid.sqrt_gamma[k] * u[k] * v[k];
    }
  }
  return s * grid.dr * grid.dtheta;
}

double max_stable_dt(const PolarGrid& grid) {
  double m = grid.dr;
  for (double s : grid.sqrt_gamma) m = std::min(m, s * grid.dtheta);
  return 0.4 * m;
}

namespace {

// Leapfrog with the acceleration of the current state cached.
class Leapfrog {
 public:
  Leapfrog(const PolarGrid& grid, WaveField& f) : grid_(grid), f_(f) {
    laplace_beltrami_apply(grid_, f_.u, acc_);
  }

  void step(double dt) {
    const std::size_t n = grid_.size();
    for (std::size_t k = 0; k < n; ++k) f_.ut[k] += 0.5 * dt * acc_[k];
    for (std::size_t k = 0; k < n; ++k) f_.u[k] += dt * f_.ut[k];
    laplace_beltrami_apply(grid_, f_.u, acc_);
    for (std::size_t k = 0; k < n; ++k) f_.ut[k] += 0.5 * dt * acc_[k];
    f_.t += dt;
  }

 private:
  const PolarGrid& grid_;
  WaveField& f_;
  std::vector<double> acc_;
};

void check_dt(const PolarGrid& grid, double dt) {
  if (!(dt > 0.0) || dt > max_stable_dt(grid) * (1.0 + 1e-12)) {
    throw CFLViolation("polar step needs 0 < dt <= 0.4 min(dr, sqrt(gamma) dtheta)");
  }
}

}  // namespace

void step_wave(WaveField& f, const PolarGrid& grid, double dt) {
  check_dt(grid, dt);
  Leapfrog(grid, f).step(dt);
}

EnergyParts energies(const WaveField& f, const PolarGrid& grid, double a, double s1) {
  EnergyParts e;
  const double cell = grid.dr * grid.dtheta;
  const int Nr = grid.N_r, Nt = grid.N_theta;
  for (int i = 0; i <= Nr; ++i) {
    const double r = grid.r(i);
    const bool inside = r <= a;
    const double w = std::pow(r, -s1);
    const double rh = r + 0.5 * grid.dr;
    const double wh = std::pow(rh, -s1);
    const bool inside_h = i < Nr && grid.r(i + 1) <= a;
    for (int j = 0; j < Nt; ++j) {
      const std::size_t k = grid.idx(i, j);
      const int jp = j + 1 == Nt ? 0 : j + 1;
      const double kin = 0.5 * grid.sqrt_gamma[k] * f.ut[k] * f.ut[k] * cell;
      const double du_t = (f.u[grid.idx(i, jp)] - f.u[k]) / grid.dtheta;
      const double ang = 0.5 * grid.inv_sqrt_gamma_th[k] * du_t * du_t * cell;
      double rad = 0.0;
      if (i < Nr) {
        const double du_r = (f.u[grid.idx(i + 1, j)] - f.u[k]) / grid.dr;
        rad = 0.5 * grid.sqrt_gamma_rh[k] * du_r * du_r * cell;
      }
      e.total += kin + ang + rad;
      if (inside) e.local += kin + ang;
      if (inside_h) e.local += rad;
      e.weighted += 2.0 * (w * (kin + ang) + wh * rad);
    }
  }
  return e;
}

double max_outside(const WaveField& f, const PolarGrid& grid, double radius) {
  double m = 0.0;
  const int first = std::max(0, static_cast<int>(std::ceil((radius - grid.r0) / grid.dr - 1e-9)));
  for (int i = first; i <= grid.N_r; ++i) {
    for (int j = 0; j < grid.N_theta; ++j) m = std::max(m, std::abs(f.u[grid.idx(i, j)]));
  }
  return m;
}

void GeneralConfig::validate() const {
  if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
  if (!(R0_support > r0)) throw ConfigError("R0_support must exceed r0");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (N_r < 4 || N_theta < 4) throw ConfigError("need N_r >= 4 and N_theta >= 4");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt must be positive");
  if (bump_power < 3 || bump_power > 16) throw ConfigError("bump_power must lie in [3, 16]");
  if (R_max > 0.0 && R_max < R0_support + T) {
    throw ConfigError("R_max must be at least R0_support + T");
  }
  if (!(radius_a() > r0 && radius_a() <= outer())) throw ConfigError("a must lie in (r0, R_max]");
}

WaveField initial_field(const PolarGrid& grid, const GeneralConfig& cfg) {
  WaveField f = zero_field(grid);
  const double a1 = cfg.support_lo(), a2 = cfg.support_hi();
  for (int i = 1; i < grid.N_r; ++i) {
    const double b = radial_bump(grid.r(i), a1, a2, cfg.bump_power);
    if (b == 0.0) continue;
    for (int j = 0; j < grid.N_theta; ++j) {
      f.u[grid.idx(i, j)] = b * (cfg.angular ? 1.0 + 0.5 * std::cos(grid.theta(j)) : 1.0);
    }
  }
  return f;
}

GeneralRun run_general(const MetricField& g, const GeneralConfig& cfg,
                       const FieldObserver& observer) {
  cfg.validate();
  GeneralRun run;
  run.grid = make_polar_grid(g, cfg.r0, cfg.outer(), cfg.N_r, cfg.N_theta);
  const PolarGrid& grid = run.grid;
  const double dt_max = cfg.cfl * max_stable_dt(grid);
  const long steps = static_cast<long>(std::ceil(cfg.T / dt_max - 1e-9));
  run.dt = cfg.T / steps;
  check_dt(grid, run.dt);
  const long every = std::max(1L, std::lround(cfg.sample_dt / run.dt));
  const double a = cfg.radius_a();

  WaveField f = initial_field(grid, cfg);
  EnergyParts e = energies(f, grid, a, cfg.s1);
  const double E0 = e.total;
  double S = 0.0;
  auto record = [&](double t) {
    run.records.push_back({t, e.total, e.local, S, E0 > 0.0 ? t * e.local / E0 : 0.0});
  };
  record(0.0);
  run.max_precursor = max_outside(f, grid, cfg.R0_support);
  if (observer) observer(f, 0, steps == 0);

  Leapfrog lf(grid, f);
  for (long k = 1; k <= steps; ++k) {
    lf.step(run.dt);
    f.t = k * run.dt;
    const double w_prev = e.weighted;
    e = energies(f, grid, a, cfg.s1);
    const double S_prev = S;
    S += 0.5 * run.dt * (w_prev + e.weighted);
    if (S < S_prev) run.S_monotone = false;
    if (E0 > 0.0) run.max_energy_drift = std::max(run.max_energy_drift, std::abs(e.total - E0) / E0);
    run.max_precursor = std::max(run.max_precursor, max_outside(f, grid, cfg.R0_support + f.t));
    if (k % every == 0 || k == steps) record(f.t);
    if (observer) observer(f, k, k == steps);
  }
  run.final_field = std::move(f);
  return run;
}

void write_energy_csv(std::ostream& out, const std::vector<EnergyRecord>& rows) {
  out << "t,E_total,E_local_a,S_weighted,t_times_Elocal_over_E0\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.E_total, r.E_local,
                  r.S, r.decay_stat);
    out << buf;
  }
}

// ---------------------------------------------------------------- experiments

std::string UniformDecayReport::report() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "experiment: uniform_decay\nhypothesis m1 > 1/2: holds (m1 = %.6g)\n"
                "a: %.6g\nwindow: [%.6g, %.6g]\nmid-window max of t E(t,a)/E(0): %.9g\n"
                "last-quarter max: %.9g\nratio: %.6f (limit 1.2)\nverdict: %s\n",
                m1, a, window_lo, window_hi, mid_max, last_max,
                mid_max > 0.0 ? last_max / mid_max : 0.0, pass ? "pass" : "fail");
  return buf;
}

UniformDecayReport uniform_decay_experiment(double m1, const GeneralConfig& cfg,
                                            double window_lo) {
  if (!(m1 > 0.5)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "m1 > 1/2 fails (m1 = %g)", m1);
    throw HypothesisViolation(buf);
  }
  if (!(window_lo < cfg.T)) throw ConfigError("decay window must start before T");
  const MetricField g = make_radial_power(2, m1, cfg.r0, Domain::exterior);
  UniformDecayReport rep;
  rep.m1 = m1;
  rep.a = cfg.radius_a();
  rep.window_lo = window_lo;
  rep.window_hi = cfg.T;
  rep.run = run_general(g, cfg);
  const double mid = 0.5 * (window_lo + cfg.T);
  const double quarter = cfg.T - 0.25 * (cfg.T - window_lo);
  double running = 0.0;
  for (const auto& r : rep.run.records) {
    if (r.t < window_lo) continue;
    running = std::max(running, r.decay_stat);
    rep.t.push_back(r.t);
    rep.stat.push_back(r.decay_stat);
    rep.running_max.push_back(running);
    if (r.t <= mid) rep.mid_max = running;
    if (r.t >= quarter) rep.last_max = std::max(rep.last_max, running);
  }
  rep.pass = rep.mid_max > 0.0 && rep.last_max <= 1.2 * rep.mid_max;
  return rep;
}

std::string decay_hypothesis_violation(const DecayHypotheses& p, int n) {
  char buf[256];
  if (!(p.s1 > 1.0)) {
    std::snprintf(buf, sizeof buf, "s1 > 1 fails (s1 = %g)", p.s1);
    return buf;
  }
  if (!(p.s2 > 0.0 && p.s2 <= 1.0)) {
    std::snprintf(buf, sizeof buf, "0 < s2 <= 1 fails (s2 = %g)", p.s2);
    return buf;
  }
  if (!(p.r0 > 0.0)) return "r0 > 0 fails";
  const double lhs = (p.s2 + 1.0) * std::pow(p.r0, p.s2 - 1.0);
  if (!(lhs < p.m2)) {
    std::snprintf(buf, sizeof buf, "(s2 + 1) r0^(s2 - 1) < m2 fails (%g >= %g)", lhs, p.m2);
    return buf;
  }
  const double rhs = (n - 1) * p.m1 * std::pow(p.r0, p.s2 - p.s1);
  if (!(p.m2 >= rhs)) {
    std::snprintf(buf, sizeof buf, "m2 >= (n - 1) m1 r0^(s2 - s1) fails (%g < %g)", p.m2, rhs);
    return buf;
  }
  return {};
}

std::string SpacetimeReport::report() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "experiment: spacetime_bound\nhypotheses: %s\nS(T)/E(0): %.9g\n"
                "last-quarter increase: %.6f (limit 0.05)\nverdict: %s\n",
                hypotheses_checked ? "all decay hypotheses hold" : "not checked",
                total, last_quarter_increase, pass ? "pass" : "fail");
  return buf;
}

SpacetimeReport spacetime_statistics(const MetricField& g, const GeneralConfig& cfg) {
  SpacetimeReport rep;
  rep.hypotheses_checked = false;
  rep.run = run_general(g, cfg);
  const double E0 = rep.run.records.front().E_total;
  double S_q = 0.0;
  const double quarter = 0.75 * cfg.T;
  for (const auto& r : rep.run.records) {
    rep.t.push_back(r.t);
    rep.S_over_E0.push_back(E0 > 0.0 ? r.S / E0 : 0.0);
    if (r.t <= quarter + 1e-12) S_q = r.S;
  }
  const double S_T = rep.run.records.back().S;
  rep.total = E0 > 0.0 ? S_T / E0 : 0.0;
  rep.last_quarter_increase = S_T > 0.0 ? (S_T - S_q) / S_T : 0.0;
  rep.pass = S_T > 0.0 && rep.last_quarter_increase <= 0.05;
  return rep;
}

SpacetimeReport spacetime_bound_experiment(const DecayHypotheses& p, GeneralConfig cfg) {
  const std::string bad = decay_hypothesis_violation(p);
  if (!bad.empty()) throw HypothesisViolation(bad);
  cfg.r0 = p.r0;
  cfg.s1 = p.s1;
  const MetricField g = make_radial_exp(2, p.m1, p.m2, p.s1, p.s2, p.r0, Domain::exterior);
  SpacetimeReport rep = spacetime_statistics(g, cfg);
  rep.hypotheses_checked = true;
  return rep;
}

// ---------------------------------------------------------------- multiplier

RadialMultiplier RadialMultiplier::r_dr() {
  return {[](double r) { return r; }, [](double) { return 1.0; }};
}

MorawetzTerms morawetz_residual(const std::vector<WaveField>& history, const PolarGrid& grid,
                                const MetricField& g, double a, const RadialMultiplier& H) {
  MorawetzTerms out;
  if (history.empty()) return out;
  const int Nt = grid.N_theta;
  const int ia = std::clamp(static_cast<int>(std::lround((a - grid.r0) / grid.dr)), 2, grid.N_r);
  out.a = grid.r(ia);
  const double dr = grid.dr, dth = grid.dtheta;

  // D^2 r(d_theta, d_theta) and div H at the nodes of Omega(a)
  std::vector<double> d2(static_cast<std::size_t>(ia + 1) * Nt), divH(d2.size());
  for (int i = 0; i <= ia; ++i) {
    const double r = grid.r(i);
    for (int j = 0; j < Nt; ++j) {
      const std::size_t k = grid.idx(i, j);
      if (grid.theta_independent && j > 0) {
        d2[k] = d2[grid.idx(i, 0)];
        divH[k] = divH[grid.idx(i, 0)];
        continue;
      }
      const double th = grid.theta(j);
      const Vec x = point(r, th);
      d2[k] = hessian_r(g, x, angular_vector(r, th)).closed_form;
      divH[k] = H.dh(r) + H.h(r) * laplacian_r(g, x).closed_form;
    }
  }

  std::vector<double> t, flux, benergy, dh, dkin, dgrad;
  double X_first = 0.0, X_last = 0.0;
  for (std::size_t s = 0; s < history.size(); ++s) {
    const WaveField& f = history[s];
    const auto& u = f.u;
    const auto& ut = f.ut;
    auto u_r = [&](int i, int j) {
      if (i == 0) {
        return (-3.0 * u[grid.idx(0, j)] + 4.0 * u[grid.idx(1, j)] - u[grid.idx(2, j)]) / (2.0 * dr);
      }
      return (u[grid.idx(i + 1, j)] - u[grid.idx(i - 1, j)]) / (2.0 * dr);
    };
    auto u_th = [&](int i, int j) {
      const int jp = j + 1 == Nt ? 0 : j + 1;
      const int jm = j == 0 ? Nt - 1 : j - 1;
      return (u[grid.idx(i, jp)] - u[grid.idx(i, jm)]) / (2.0 * dth);
    };

    double b_flux = 0.0, b_en = 0.0, X = 0.0, i_dh = 0.0, i_kin = 0.0, i_grad = 0.0;
    for (int i = 0; i <= ia; ++i) {
      const double r = grid.r(i);
      const double h = H.h(r), hp = H.dh(r);
      const double wr = (i == 0 || i == ia) ? 0.5 : 1.0;
      const bool edge = i == 0 || i == ia;
      const double side = i == 0 ? -1.0 : 1.0;  // <d_r, nu>
      for (int j = 0; j < Nt; ++j) {
        const std::size_t k = grid.idx(i, j);
        const double ur = u_r(i, j);
        const double uth = u_th(i, j);
        const double grad2 = ur * ur + grid.inv_gamma[k] * uth * uth;
        const double vol = grid.sqrt_gamma[k] * wr * dr * dth;
        X += ut[k] * h * ur * vol;
        i_dh += (hp * ur * ur + h * d2[k] * grid.inv_gamma[k] * grid.inv_gamma[k] * uth * uth) * vol;
        i_kin += 0.5 * ut[k] * ut[k] * divH[k] * vol;
        i_grad += -0.5 * grad2 * divH[k] * vol;
        if (edge) {
          const double len = grid.sqrt_gamma[k] * dth;
          b_flux += side * ur * h * ur * len;
          b_en += 0.5 * (ut[k] * ut[k] - grad2) * h * side * len;
        }
      }
    }
    t.push_back(f.t);
    flux.push_back(b_flux);
    benergy.push_back(b_en);
    dh.push_back(i_dh);
    dkin.push_back(i_kin);
    dgrad.push_back(i_grad);
    if (s == 0) X_first = X;
    X_last = X;
  }
  out.boundary_flux = trapezoid(t, flux);
  out.boundary_energy = trapezoid(t, benergy);
  out.X_0 = X_first;
  out.X_T = X_last;
  out.DH = trapezoid(t, dh);
  out.div_kinetic = trapezoid(t, dkin);
  out.div_gradient = trapezoid(t, dgrad);
  return out;
}

MorawetzStudy morawetz_refinement(const MetricField& g, GeneralConfig cfg, double a, int levels,
                                  int every) {
  MorawetzStudy study;
  for (int l = 0; l < levels; ++l) {
    std::vector<WaveField> history;
    const GeneralRun run = run_general(g, cfg, [&](const WaveField& f, long k, bool last) {
      if (k % every == 0 || last) history.push_back(f);
    });
    study.N_r.push_back(cfg.N_r);
    study.N_theta.push_back(cfg.N_theta);
    study.terms.push_back(morawetz_residual(history, run.grid, g, a));
    cfg.N_r *= 2;
    cfg.N_theta *= 2;
  }
  for (std::size_t k = 1; k < study.terms.size(); ++k) {
    const double prev = std::abs(study.terms[k - 1].residual());
    const double cur = std::abs(study.terms[k].residual());
    study.ratios.push_back(cur > 0.0 ? prev / cur : INFINITY);
  }
  return study;
}

// ---------------------------------------------------------------- snapshots

void write_snapshot(std::ostream& out, const PolarGrid& grid, const WaveField& f) {
  char buf[128];
  out << "# polar snapshot\n";
  out << "N_r " << grid.N_r << "\n";
  out << "N_theta " << grid.N_theta << "\n";
  std::snprintf(buf, sizeof buf, "r0 %.17g\nR_max %.17g\nt %.17g\n", grid.r0, grid.R_max, f.t);
  out << buf;
  for (int i = 0; i <= grid.N_r; ++i) {
    for (int j = 0; j < grid.N_theta; ++j) {
      std::snprintf(buf, sizeof buf, j == 0 ? "%.17g" : ",%.17g", f.u[grid.idx(i, j)]);
      out << buf;
    }
    out << "\n";
  }
}

Snapshot read_snapshot(std::istream& in) {
  Snapshot s;
  std::string line;
  if (!std::getline(in, line) || line != "# polar snapshot") {
    throw ConfigError("snapshot: missing header line");
  }
  auto field = [&](const char* name) {
    if (!std::getline(in, line)) throw ConfigError(std::string("snapshot: missing ") + name);
    std::istringstream ls(line);
    std::string key;
    double v = 0.0;
    if (!(ls >> key >> v) || key != name) throw ConfigError(std::string("snapshot: bad ") + name);
    return v;
  };
  s.N_r = static_cast<int>(field("N_r"));
  s.N_theta = static_cast<int>(field("N_theta"));
  s.r0 = field("r0");
  s.R_max = field("R_max");
  s.t = field("t");
  if (s.N_r < 1 || s.N_theta < 1) throw ConfigError("snapshot: bad dimensions");
  s.u.reserve(static_cast<std::size_t>(s.N_r + 1) * s.N_theta);
  for (int i = 0; i <= s.N_r; ++i) {
    if (!std::getline(in, line)) throw ConfigError("snapshot: truncated data");
    std::istringstream ls(line);
    std::string cell;
    int count = 0;
    while (std::getline(ls, cell, ',')) {
      s.u.push_back(std::stod(cell));
      ++count;
    }
    if (count != s.N_theta) throw ConfigError("snapshot: wrong row length");
  }
  return s;
}

}  // namespace escape
