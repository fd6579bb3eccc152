#include "escape/wave_radial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "escape/errors.hpp"

namespace escape {

double RadialGrid::weight(double r) const { return m == 0.0 ? 1.0 : std::pow(r, m); }

RadialGrid make_radial_grid(double m, double r0, double R_max, int N) {
  if (!(m >= 0.0)) throw ConfigError("m must be nonnegative");
  if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
  if (!(R_max > r0)) throw ConfigError("R_max must exceed r0");
  if (N < 4) throw ConfigError("N must be at least 4");
  RadialGrid g{m, r0, R_max, N, {}, {}, {}};
  g.w_node.resize(N + 1);
  g.w_mid.resize(N);
  g.coef.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    g.w_node[i] = g.weight(g.r(i));
    g.coef[i] = m / g.r(i);
  }
  for (int i = 0; i < N; ++i) g.w_mid[i] = g.weight(r0 + (i + 0.5) * g.dr());
  return g;
}

void radial_operator(const RadialGrid& g, const std::vector<double>& u, std::vector<double>& out) {
  const int N = g.N;
  const double dr = g.dr();
  const double inv2 = 1.0 / (dr * dr);
  const double inv1 = 1.0 / (2.0 * dr);
  out.assign(N + 1, 0.0);
  for (int i = 1; i < N; ++i) {
    out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv2 + g.coef[i] * (u[i + 1] - u[i - 1]) * inv1;
  }
}

void step_radial(RadialWaveState& s, const RadialGrid& g, double dt) {
  if (!(dt > 0.0) || dt > 0.5 * g.dr() * (1.0 + 1e-12)) {
    throw CFLViolation("radial step needs 0 < dt <= 0.5 dr");
  }
  static thread_local std::vector<double> acc;
  const int N = g.N;
  radial_operator(g, s.u, acc);
  for (int i = 1; i < N; ++i) s.ut[i] += 0.5 * dt * acc[i];
  for (int i = 1; i < N; ++i) s.u[i] += dt * s.ut[i];
  radial_operator(g, s.u, acc);
  for (int i = 1; i < N; ++i) s.ut[i] += 0.5 * dt * acc[i];
  s.u[0] = s.u[N] = 0.0;
  s.ut[0] = s.ut[N] = 0.0;
  s.t += dt;
}

RadialEnergy radial_energy(const RadialWaveState& s, const RadialGrid& g, double a) {
  const int N = g.N;
  const double dr = g.dr();
  RadialEnergy e;
  for (int i = 0; i <= N; ++i) {
    const double r = g.r(i);
    const double w = (i == 0 || i == N) ? 0.5 : 1.0;
    const double kin = 0.5 * w * s.ut[i] * s.ut[i] * g.w_node[i] * dr;
    e.total += kin;
    if (r <= a) e.local += kin;
  }
  for (int i = 0; i < N; ++i) {
    const double ur = (s.u[i + 1] - s.u[i]) / dr;
    const double pot = 0.5 * ur * ur * g.w_mid[i] * dr;
    e.total += pot;
    if (g.r(i + 1) <= a) e.local += pot;
  }
  return e;
}

double radial_bump(double r, double a1, double a2, int p) {
  if (r <= a1 || r >= a2) return 0.0;
  const double half = 0.5 * (a2 - a1);
  const double q = (r - a1) * (a2 - r) / (half * half);
  return std::pow(q, p);
}

double radial_bump_dr(double r, double a1, double a2, int p) {
  if (r <= a1 || r >= a2) return 0.0;
  const double half = 0.5 * (a2 - a1);
  const double h2 = half * half;
  const double q = (r - a1) * (a2 - r) / h2;
  const double dq = (a1 + a2 - 2.0 * r) / h2;
  return p * std::pow(q, p - 1) * dq;
}

double dalembert_m2(const std::function<double(double)>& u0, double r0, double r, double t) {
  auto V = [&](double s) {
    if (s >= r0) return s * u0(s);
    const double m = 2.0 * r0 - s;
    return -m * u0(m);
  };
  return 0.5 * (V(r - t) + V(r + t)) / r;
}

const char* decay_class_name(DecayClass c) {
  switch (c) {
    case DecayClass::finite_time_zero: return "finite_time_zero";
    case DecayClass::exponential: return "exponential";
    case DecayClass::polynomial: return "polynomial";
    case DecayClass::inconclusive: return "inconclusive";
  }
  return "?";
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = static_cast<int>(std::min(x.size(), y.size()));
  if (f.n < 2) return f;
  double mx = 0, my = 0;
  for (int i = 0; i < f.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

std::string DecayFit::report() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "class: %s\nwindow: [%.6g, %.6g] (%d samples)\nexponential: rate %.6g R2 %.6f\n"
                "polynomial: exponent %.6g R2 %.6f\n",
                decay_class_name(cls), t_start, t_end, samples, rate, r2_exp, exponent, r2_poly);
  std::string out = buf;
  if (t_zero > 0.0) {
    std::snprintf(buf, sizeof buf, "zero at t = %.6g\n", t_zero);
    out += buf;
  }
  return out;
}

DecayFit decay_classify(const std::vector<double>& t, const std::vector<double>& E, double E0,
                        double t_start, const DecayOptions& opt) {
  DecayFit fit;
  fit.t_start = t_start;
  fit.t_end = t_start;
  std::vector<double> ts, logt, logE;
  const double floor = opt.zero_threshold * E0;
  bool reached_zero = false;
  for (std::size_t i = 0; i < std::min(t.size(), E.size()); ++i) {
    if (t[i] < t_start) continue;
    if (E[i] < floor) {
      reached_zero = true;
      fit.t_zero = t[i];
      break;
    }
    fit.t_end = t[i];
    ts.push_back(t[i]);
    logt.push_back(std::log(t[i]));
    logE.push_back(std::log(E[i]));
  }
  fit.samples = static_cast<int>(ts.size());
  if (ts.size() >= 8) {
    const LineFit le = fit_line(ts, logE);
    const LineFit lp = fit_line(logt, logE);
    fit.rate = -le.slope;
    fit.exponent = lp.slope;
    fit.r2_exp = le.r2;
    fit.r2_poly = lp.r2;
    if (lp.r2 >= le.r2 + opt.r2_margin) {
      fit.cls = DecayClass::polynomial;
      return fit;
    }
    if (le.r2 >= lp.r2 + opt.r2_margin) {
      fit.cls = DecayClass::exponential;
      return fit;
    }
  }
  fit.cls = reached_zero ? DecayClass::finite_time_zero : DecayClass::inconclusive;
  return fit;
}

double RadialConfig::support_lo() const {
  return bump_a1 > 0.0 ? bump_a1 : r0 + 0.25 * (R0_support - r0);
}
double RadialConfig::support_hi() const {
  return bump_a2 > 0.0 ? bump_a2 : R0_support - 0.25 * (R0_support - r0);
}

void RadialConfig::validate() const {
  if (!(m >= 0.0)) throw ConfigError("m must be nonnegative");
  if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
  if (!(R0_support > r0)) throw ConfigError("R0_support must exceed r0");
  if (!(a > r0)) throw ConfigError("a must exceed r0");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (N < 4) throw ConfigError("N must be at least 4");
  if (!(cfl > 0.0 && cfl <= 0.5)) throw ConfigError("cfl must lie in (0, 0.5]");
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt must be positive");
  if (bump_power < 3 || bump_power > 16) throw ConfigError("bump_power must lie in [3, 16]");
  if (!(support_lo() > r0 && support_hi() <= R0_support && support_lo() < support_hi())) {
    throw ConfigError("bump support must lie in (r0, R0_support]");
  }
  if (R_max > 0.0 && R_max < r0 + R0_support + T) {
    throw ConfigError("R_max must be at least r0 + R0_support + T");
  }
  const double R = R_max > 0.0 ? R_max : r0 + R0_support + T;
  if (a > R) throw ConfigError("a must not exceed R_max");
}

RadialRun run_radial(const RadialConfig& cfg,
                     const std::function<void(const RadialWaveState&)>& observer) {
  cfg.validate();
  RadialRun run;
  const double R = cfg.R_max > 0.0 ? cfg.R_max : cfg.r0 + cfg.R0_support + cfg.T;
  run.grid = make_radial_grid(cfg.m, cfg.r0, R, cfg.N);
  const RadialGrid& g = run.grid;
  const double dr = g.dr();
  const long steps = static_cast<long>(std::ceil(cfg.T / (cfg.cfl * dr) - 1e-9));
  run.dt = cfg.T / steps;
  const long every = std::max(1L, std::lround(cfg.sample_dt / run.dt));

  RadialWaveState s;
  s.u.assign(g.N + 1, 0.0);
  s.ut.assign(g.N + 1, 0.0);
  const double a1 = cfg.support_lo(), a2 = cfg.support_hi();
  for (int i = 1; i < g.N; ++i) {
    (cfg.bump_in_velocity ? s.ut : s.u)[i] = radial_bump(g.r(i), a1, a2, cfg.bump_power);
  }

  auto sample = [&](const RadialEnergy& e) {
    run.t.push_back(s.t);
    run.E_total.push_back(e.total);
    run.E_local.push_back(e.local);
  };
  const RadialEnergy e0 = radial_energy(s, g, cfg.a);
  sample(e0);
  if (observer) observer(s);
  for (long k = 1; k <= steps; ++k) {
    step_radial(s, g, run.dt);
    s.t = k * run.dt;
    const RadialEnergy e = radial_energy(s, g, cfg.a);
    if (e0.total > 0.0) {
      run.max_energy_drift = std::max(run.max_energy_drift, std::abs(e.total - e0.total) / e0.total);
    }
    if (k % every == 0 || k == steps) sample(e);
    if (observer) observer(s);
  }
  run.final_state = std::move(s);
  return run;
}

RadialConfig decay_config(double m) {
  RadialConfig c;
  c.m = m;
  c.r0 = 3.0;
  c.R0_support = 12.0;
  c.a = 12.0;
  c.T = 500.0;
  c.N = 12288;
  c.sample_dt = 0.5;
  c.bump_power = 6;
  c.bump_in_velocity = true;
  return c;
}

OracleCheck m2_oracle_check(const RadialConfig& cfg, int every) {
  if (cfg.m != 2.0 || cfg.bump_in_velocity) {
    throw ConfigError("the d'Alembert oracle needs m = 2 and u1 = 0");
  }
  const double a1 = cfg.support_lo(), a2 = cfg.support_hi();
  const int p = cfg.bump_power;
  const auto u0 = [&](double r) { return radial_bump(r, a1, a2, p); };
  OracleCheck out;
  const double R = cfg.R_max > 0.0 ? cfg.R_max : cfg.r0 + cfg.R0_support + cfg.T;
  const double h = (R - cfg.r0) / cfg.N;
  long k = 0;
  RadialRun run = run_radial(cfg, [&](const RadialWaveState& s) {
    if (k++ % std::max(1, every) != 0) return;
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      const double r = cfg.r0 + static_cast<double>(i) * h;
      out.max_error = std::max(out.max_error, std::abs(s.u[i] - dalembert_m2(u0, cfg.r0, r, s.t)));
    }
  });
  const RadialWaveState& s = run.final_state;
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    const double r = run.grid.r(static_cast<int>(i));
    out.max_error = std::max(out.max_error, std::abs(s.u[i] - dalembert_m2(u0, cfg.r0, r, s.t)));
  }
  out.dr = run.grid.dr();
  out.data_norm = std::sqrt(2.0 * run.E_total.front());
  return out;
}

}  // namespace escape
