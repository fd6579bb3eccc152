#pragma once

#include <functional>
#include <string>
#include <vector>

namespace escape {

/// Uniform grid on [r0, R_max] for u_tt = u_rr + (m/r) u_r. The volume
/// weight is r^m.
struct RadialGrid {
  double m = 2.0;
  double r0 = 1.0;
  double R_max = 0.0;
  int N = 0;

  // filled by make_radial_grid
  std::vector<double> w_node, w_mid, coef;  // r_i^m, r_{i+1/2}^m, m / r_i

  double dr() const { return (R_max - r0) / N; }
  double r(int i) const { return r0 + i * dr(); }
  double weight(double r) const;
};

/// Throws ConfigError on a degenerate grid.
RadialGrid make_radial_grid(double m, double r0, double R_max, int N);

struct RadialWaveState {
  std::vector<double> u, ut;  // N + 1 nodes, u[0] = u[N] = 0
  double t = 0.0;
};

/// (u_rr + (m/r) u_r) at interior nodes, centered differences; zero at the ends.
void radial_operator(const RadialGrid& g, const std::vector<double>& u, std::vector<double>& out);

/// One leapfrog step in kick-drift-kick form. Throws CFLViolation when
/// dt > 0.5 dr.
void step_radial(RadialWaveState& s, const RadialGrid& g, double dt);

struct RadialEnergy {
  double total = 0.0;
  double local = 0.0;  // r <= a
};
/// Trapezoid in u_t^2, midpoint differences for u_r^2, both weighted by r^m.
RadialEnergy radial_energy(const RadialWaveState& s, const RadialGrid& g, double a);

/// ((r - a1)(a2 - r))^p scaled to peak 1, zero outside [a1, a2]. C^(p-1).
double radial_bump(double r, double a1, double a2, int p = 3);
double radial_bump_dr(double r, double a1, double a2, int p = 3);

/// v = r u for m = 2 reduces to the 1D wave equation with v(r0) = 0; this is
/// the odd-reflection d'Alembert solution for u(0) = u0, u_t(0) = 0.
double dalembert_m2(const std::function<double(double)>& u0, double r0, double r, double t);

enum class DecayClass { finite_time_zero, exponential, polynomial, inconclusive };
const char* decay_class_name(DecayClass c);

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
  int n = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
  DecayClass cls = DecayClass::inconclusive;
  double rate = 0.0;      // E ~ exp(-rate t)
  double exponent = 0.0;  // E ~ t^exponent
  double r2_exp = 0.0, r2_poly = 0.0;
  double t_start = 0.0, t_end = 0.0;
  double t_zero = 0.0;  // first sample below the zero threshold, 0 if none
  int samples = 0;

  std::string report() const;
};

struct DecayOptions {
  double zero_threshold = 1e-12;  // relative to E0
  double r2_margin = 0.1;
};

/// Classifies the samples with t >= t_start. The fits use the samples before
/// E first drops below zero_threshold * E0; a series that reaches that floor
/// without a decisive fit is finite_time_zero.
DecayFit decay_classify(const std::vector<double>& t, const std::vector<double>& E, double E0,
                        double t_start, const DecayOptions& opt = {});

struct RadialConfig {
  double m = 2.0;
  double r0 = 1.0;
  double a = 4.0;           // local-energy radius
  double R0_support = 4.0;  // data vanish for r >= R0_support
  double T = 50.0;
  int N = 4096;
  double cfl = 0.5;          // dt = cfl * dr
  double sample_dt = 0.05;   // energy sampling interval (rounded to whole steps)
  double R_max = 0.0;        // 0: r0 + R0_support + T
  double bump_a1 = 0.0, bump_a2 = 0.0;  // 0: middle half of (r0, R0_support)
  int bump_power = 3;
  bool bump_in_velocity = false;  // u0 = 0, u1 = bump instead of u0 = bump, u1 = 0

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
  double support_lo() const;
  double support_hi() const;
  double window_start() const { return a + R0_support + 2.0; }
};

struct RadialRun {
  RadialGrid grid;
  double dt = 0.0;
  std::vector<double> t, E_total, E_local;
  double max_energy_drift = 0.0;  // max |E(t) - E(0)| / E(0) over every step
  RadialWaveState final_state;
};

/// Runs the default bump data. `observer` sees the state after every step.
RadialRun run_radial(const RadialConfig& cfg,
                     const std::function<void(const RadialWaveState&)>& observer = {});

/// Setup used for the decay dichotomy: wide support, velocity data with a
/// C^5 bump, long window. Only m varies.
RadialConfig decay_config(double m);

struct OracleCheck {
  double max_error = 0.0;  // max-norm over all nodes and sampled times
  double dr = 0.0;
  double data_norm = 0.0;  // energy norm sqrt(2 E(0)) of the data
  double bound() const { return 5.0 * dr * dr * data_norm; }
};
/// Compares an m = 2 run (u1 = 0) with dalembert_m2 every `every` steps.
OracleCheck m2_oracle_check(const RadialConfig& cfg, int every = 10);

}  // namespace escape
