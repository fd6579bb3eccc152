#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "escape/metric.hpp"

namespace escape {

struct GeodesicState {
  double t = 0.0;
  Vec x;
  Vec v;
};

struct IntegrateOptions {
  double dt = 1e-3;
  bool renormalize = false;  // rescale v to unit g-speed after every step
  bool reflect = false;      // exterior metrics: reflect at r_c instead of stopping
  int record_every = 1;
};

/// Samples of a geodesic on a uniform time grid (every record_every steps,
/// plus the final state).
struct GeodesicTrace {
  int dim = 0;
  double dt = 0.0;
  int record_every = 1;
  std::string method = "rk4";
  std::vector<double> t, r, h, drift;
  std::vector<Vec> x, v;
  bool hit_inner_boundary = false;
  double t_hit = std::numeric_limits<double>::quiet_NaN();
  int reflections = 0;
  double max_drift = 0.0;  // over every step, not only the recorded ones
  GeodesicState final_state;

  std::size_t size() const { return t.size(); }
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// (dx/dt, dv/dt) = (v, -Gamma(x)(v, v)).
std::pair<Vec, Vec> geodesic_rhs(const MetricField& g, const GeodesicState& s);

/// h = <dr, v>_g; 0 at the origin.
double radial_velocity(const MetricField& g, const Vec& x, const Vec& v);

/// Scales `direction` to unit g-speed at x0.
GeodesicState initial_state(const MetricField& g, const Vec& x0, const Vec& direction);

GeodesicTrace integrate_geodesic(const MetricField& g, const Vec& x0, const Vec& direction,
                                 double T, const IntegrateOptions& opt = {});
/// Continues from an arbitrary state (no renormalization of v).
GeodesicTrace integrate_from(const MetricField& g, const GeodesicState& start, double T,
                             const IntegrateOptions& opt = {});

/// Negates the g-radial part of v at |x| = r_c. Since G dr = dr there, this
/// is v - 2 h xhat.
GeodesicState reflect_at_inner_boundary(const MetricField& g, const GeodesicState& s);

// Theorem checks. Margins are >= 0 when the bound holds.

struct VelocityBoundResult {
  double margin = kNaN;  // min over t > c_emp of |gamma(t)| - (rho0 t - max{|x0|, c0})
  double c_emp = kNaN;
  double c0 = kNaN;
  double rho0 = kNaN;
};
/// Throws InapplicableTheorem when r alpha + 1 >= rho0 fails on the sample
/// grid or the metric is exterior.
VelocityBoundResult check_theorem_velocity_bound(const GeodesicTrace& tr, const MetricField& g,
                                                 double rho0);

struct IntegralBoundResult {
  double margin = kNaN;  // min over t > t0 of |gamma(t)| - RHS(t)
  double t0 = kNaN;      // first time after which h >= 0 persistently
  double h_monotonicity = kNaN;  // max drop of h after t0
  double asymptotic_speed = kNaN;
};
/// Throws InapplicableTheorem when no crossing time is found before T/2.
IntegralBoundResult check_theorem_integral_bound(const GeodesicTrace& tr, const MetricField& g);

/// Times where |gamma| first reaches R + 1/2 and R + 3/2 (R = max{|x0|, r_c}),
/// and the last time in between where |gamma| = R + 1. NaN when not reached.
struct CrossingTimes {
  double t1 = kNaN, t2 = kNaN, t0 = kNaN;
};
CrossingTimes lemma_crossing_times(const GeodesicTrace& tr, double r_c);

/// Running-minimum envelope f(y) = inf_{r_c <= |x| <= y} (alpha + 1/|x|),
/// sampled on y_k = r_c + k dy; f(y < r_c) = f(r_c).
struct Envelope {
  double r_c = 1.0, dy = 1.0;
  std::vector<double> f;
  double operator()(double y) const;
};
Envelope alpha_envelope(const MetricField& g, double y_max, double dy, int angular = 8);

enum class Dichotomy { escapes, hits_boundary, undecided };
const char* dichotomy_name(Dichotomy d);
struct DichotomyResult {
  Dichotomy kind = Dichotomy::undecided;
  double t0 = kNaN;
  double escape_radius = kNaN;
};
DichotomyResult exterior_dichotomy(const GeodesicTrace& tr, const MetricField& g);

double escape_radius(const Vec& x0, double r_c);

enum class Verdict { escaped, trapped, hit_inner_boundary };
const char* verdict_name(Verdict v);

struct EscapeReport {
  Vec x0, direction;
  Verdict verdict = Verdict::trapped;
  double final_r = kNaN;
  double asymptotic_speed = kNaN;  // |gamma(T)| / T
  double max_drift = kNaN;
  double velocity_margin = kNaN;
  double integral_margin = kNaN;
  double h_monotonicity = kNaN;
  double t0 = kNaN, t1 = kNaN, t2 = kNaN;
  double t_hit = kNaN;
  std::string notes;
};

struct BatchOptions {
  double T = 200.0;
  IntegrateOptions integrate{};
  int directions = 16;
  /// Non-empty: shoot exactly these from every x0 instead of `directions`.
  std::vector<Vec> fixed_directions;
  std::uint64_t seed = 0;
  double rho0 = 0.0;  // > 0 enables the velocity bound check
  bool integral_bound = false;
  /// Called once per finished trace (for CSV output); may be empty.
  std::function<void(std::size_t, const GeodesicTrace&)> on_trace;
};

struct BatchSummary {
  std::vector<EscapeReport> reports;
  int escaped = 0, trapped = 0, hit = 0;
  double min_asymptotic_speed = kNaN;
  double min_velocity_margin = kNaN;
  double min_integral_margin = kNaN;
  double max_h_monotonicity = kNaN;
  double max_drift = kNaN;
};

/// Shoots `directions` unit-speed geodesics from every x0. Directions are
/// equally spaced angles for n = 2 and seeded samples otherwise.
BatchSummary batch_shoot(const MetricField& g, const std::vector<Vec>& x0_set,
                         const BatchOptions& opt);

}  // namespace escape
