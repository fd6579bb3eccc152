#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "escape/metric.hpp"

namespace escape {

/// Polar grid on the annulus r0 <= r <= R_max for a 2D metric in the form
/// g = dr^2 + gamma(r, theta) dtheta^2. Index (i, j) is radius r0 + i dr,
/// angle j dtheta, stored at i * N_theta + j.
struct PolarGrid {
  int N_r = 0, N_theta = 0;
  double r0 = 1.0, R_max = 0.0;
  double dr = 0.0, dtheta = 0.0;
  bool theta_independent = false;

  std::vector<double> sqrt_gamma;  // nodes
  std::vector<double> inv_gamma;   // nodes
  std::vector<double> sqrt_gamma_rh;   // (i + 1/2, j), N_r rows
  std::vector<double> inv_sqrt_gamma_th;  // (i, j + 1/2)

  double r(int i) const { return r0 + i * dr; }
  double theta(int j) const { return j * dtheta; }
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * N_theta + static_cast<std::size_t>(j);
  }
  std::size_t size() const { return static_cast<std::size_t>(N_r + 1) * N_theta; }
};

/// gamma = r^2 t^T G t with t the unit angular direction. Throws ParameterError
/// unless the metric is two-dimensional, DomainError when r0 lies inside r_c
/// of an exterior metric, ConfigError on a degenerate grid.
PolarGrid make_polar_grid(const MetricField& g, double r0, double R_max, int N_r, int N_theta);

struct WaveField {
  std::vector<double> u, ut;  // u = 0 on the rows i = 0 and i = N_r
  double t = 0.0;
};

WaveField zero_field(const PolarGrid& grid);

/// Flux form (1/sqrt g)[d_r(sqrt g u_r) + d_theta(g^{-1/2} u_theta)]; zero on the
/// boundary rows.
void laplace_beltrami_apply(const PolarGrid& grid, const std::vector<double>& u,
                            std::vector<double>& out);

/// sum sqrt(gamma) u v dr dtheta over the interior rows.
double weighted_inner(const PolarGrid& grid, const std::vector<double>& u,
                      const std::vector<double>& v);

/// 0.4 min(dr, min sqrt(gamma) dtheta).
double max_stable_dt(const PolarGrid& grid);

/// One leapfrog step (kick-drift-kick). Throws CFLViolation above max_stable_dt.
void step_wave(WaveField& f, const PolarGrid& grid, double dt);

struct EnergyParts {
  double total = 0.0;
  double local = 0.0;     // r <= a
  double weighted = 0.0;  // int r^{-s1} (u_t^2 + |grad u|^2) dx_g
};
/// Kinetic part at nodes, gradient parts on the half-node fluxes, so that
/// total = 1/2 |u_t|^2 - 1/2 <L u, u>.
EnergyParts energies(const WaveField& f, const PolarGrid& grid, double a, double s1);

/// Observation radius of the finite-speed check: max |u| on r >= R + t.
double max_outside(const WaveField& f, const PolarGrid& grid, double radius);

struct GeneralConfig {
  double r0 = 1.0;
  double R0_support = 4.0;
  double T = 50.0;
  int N_r = 1024, N_theta = 128;
  double R_max = 0.0;  // 0: R0_support + T + 2
  double a = 0.0;      // local-energy radius; 0: 2 R0_support
  double s1 = 2.0;     // weight exponent of the space-time accumulator
  double cfl = 1.0;    // fraction of max_stable_dt
  double sample_dt = 0.1;
  int bump_power = 3;
  bool angular = true;  // data bump(r) (1 + cos(theta) / 2); false: radial

  void validate() const;
  double support_lo() const { return r0 + 0.25 * (R0_support - r0); }
  double support_hi() const { return R0_support - 0.25 * (R0_support - r0); }
  double radius_a() const { return a > 0.0 ? a : 2.0 * R0_support; }
  double outer() const { return R_max > 0.0 ? R_max : R0_support + T + 2.0; }
};

WaveField initial_field(const PolarGrid& grid, const GeneralConfig& cfg);

/// One row of the energy CSV.
struct EnergyRecord {
  double t = 0.0;
  double E_total = 0.0;
  double E_local = 0.0;
  double S = 0.0;           // int_0^t int r^{-s1}(u_t^2 + |grad u|^2) dx_g dt
  double decay_stat = 0.0;  // t E_local / E(0)
};

struct GeneralRun {
  PolarGrid grid;
  double dt = 0.0;
  std::vector<EnergyRecord> records;
  double max_energy_drift = 0.0;  // over every step
  double max_precursor = 0.0;     // max |u| on r >= R0_support + t over every step
  bool S_monotone = true;
  WaveField final_field;
};

using FieldObserver = std::function<void(const WaveField&, long step, bool last)>;

/// Runs the configured data on metric g. The observer sees every step,
/// starting with step 0; `last` marks the final one.
GeneralRun run_general(const MetricField& g, const GeneralConfig& cfg,
                       const FieldObserver& observer = {});

void write_energy_csv(std::ostream& out, const std::vector<EnergyRecord>& rows);

// Experiments -------------------------------------------------------------

struct UniformDecayReport {
  double m1 = 0.0;
  double a = 0.0;
  double window_lo = 20.0, window_hi = 100.0;
  std::vector<double> t, stat, running_max;
  double mid_max = 0.0;   // running max at the window midpoint
  double last_max = 0.0;  // max over the last quarter of the running max
  bool pass = false;
  GeneralRun run;

  std::string report() const;
};

/// radial_power(m1) in the plane, exterior of r0.
/// Throws HypothesisViolation when m1 <= 1/2.
UniformDecayReport uniform_decay_experiment(double m1, const GeneralConfig& cfg,
                                            double window_lo = 20.0);

struct DecayHypotheses {
  double s1 = 2.0, s2 = 1.0, m1 = 2.0, m2 = 3.0, r0 = 1.0;
};
/// Empty when every inequality holds, otherwise the first failing one.
std::string decay_hypothesis_violation(const DecayHypotheses& p, int n = 2);

struct SpacetimeReport {
  std::vector<double> t, S_over_E0;
  double total = 0.0;           // S(T) / E(0)
  double last_quarter_increase = 0.0;  // (S(T) - S(3T/4)) / S(T)
  bool pass = false;
  bool hypotheses_checked = true;
  GeneralRun run;

  std::string report() const;
};

/// radial_exp family with the given parameters, r_c = r0. Throws
/// HypothesisViolation naming the failed inequality.
SpacetimeReport spacetime_bound_experiment(const DecayHypotheses& p, GeneralConfig cfg);
/// Same statistics for an arbitrary metric, no hypothesis gate.
SpacetimeReport spacetime_statistics(const MetricField& g, const GeneralConfig& cfg);

// Multiplier identity -----------------------------------------------------

/// H = h(r) d/dr.
struct RadialMultiplier {
  std::function<double(double)> h, dh;
  static RadialMultiplier r_dr();
};

/// Terms of the multiplier identity on Omega(a) = {r0 < r < a} x (0, T):
///   boundary_flux + boundary_energy
///     = X(T) - X(0) + DH + div_kinetic + div_gradient
/// with X(t) = int u_t H(u) dx_g. Time integrals use the trapezoid rule over
/// the snapshot times.
struct MorawetzTerms {
  double boundary_flux = 0.0;    // int int (du/dnu) H(u) dGamma dt
  double boundary_energy = 0.0;  // 1/2 int int (u_t^2 - |grad u|^2) <H, nu> dGamma dt
  double X_T = 0.0, X_0 = 0.0;
  double DH = 0.0;               // int int DH(grad u, grad u) dx_g dt
  double div_kinetic = 0.0;      // 1/2 int int u_t^2 div H dx_g dt
  double div_gradient = 0.0;     // -1/2 int int |grad u|^2 div H dx_g dt
  double a = 0.0;

  double lhs() const { return boundary_flux + boundary_energy; }
  double rhs() const { return X_T - X_0 + DH + div_kinetic + div_gradient; }
  double residual() const { return lhs() - rhs(); }
};

/// `a` is rounded to the nearest grid radius.
MorawetzTerms morawetz_residual(const std::vector<WaveField>& history, const PolarGrid& grid,
                                const MetricField& g, double a,
                                const RadialMultiplier& H = RadialMultiplier::r_dr());

struct MorawetzStudy {
  std::vector<int> N_r, N_theta;
  std::vector<MorawetzTerms> terms;
  std::vector<double> ratios;  // residual[k] / residual[k + 1]
};
/// Runs cfg at `levels` successive doublings of (N_r, N_theta), storing a
/// snapshot every `every` steps.
MorawetzStudy morawetz_refinement(const MetricField& g, GeneralConfig cfg, double a, int levels,
                                  int every = 10);

// Snapshots ---------------------------------------------------------------

/// Text header (N_r, N_theta, r0, R_max, t) followed by one CSV row of u per radius.
void write_snapshot(std::ostream& out, const PolarGrid& grid, const WaveField& f);
struct Snapshot {
  int N_r = 0, N_theta = 0;
  double r0 = 0.0, R_max = 0.0, t = 0.0;
  std::vector<double> u;
};
/// Throws ConfigError on a malformed stream.
Snapshot read_snapshot(std::istream& in);

}  // namespace escape
