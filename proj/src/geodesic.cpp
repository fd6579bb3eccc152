#include "escape/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "escape/errors.hpp"

namespace escape {

namespace {

constexpr double kBoundarySlack = 1e-8;
constexpr int kBisection = 64;

// Integrates one trace; owns the junction and boundary bookkeeping.
class Stepper {
 public:
  Stepper(const MetricField& g, const IntegrateOptions& opt)
      : g_(g), opt_(opt), r_j_(g.junction_radius()), r_c_(g.r_c()), exterior_(g.exterior()) {}

  // side: -1 lets the metric choose, 0 exterior formula, 1 interior blend
  int side_of(double r) const {
    if (r_j_ <= 0.0) return -1;
    return r < r_j_ ? 1 : 0;
  }

  Vec accel(const Vec& x, const Vec& v, int side) const {
    if (side < 0) return g_.acceleration_raw(x, v);
    return g_.acceleration_on(x, v, side == 1);
  }

  void rk4(const Vec& x, const Vec& v, double h, int side, Vec* xo, Vec* vo) const {
    const Vec a1 = accel(x, v, side);
    const Vec x2 = x + 0.5 * h * v, v2 = v + 0.5 * h * a1;
    const Vec a2 = accel(x2, v2, side);
    const Vec x3 = x + 0.5 * h * v2, v3 = v + 0.5 * h * a2;
    const Vec a3 = accel(x3, v3, side);
    const Vec x4 = x + h * v3, v4 = v + h * a3;
    const Vec a4 = accel(x4, v4, side);
    *xo = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4);
    *vo = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }

  // Advances (x, v) by dt. Returns false when the trajectory stopped at
  // the inner boundary; *t_event then holds the elapsed part of dt.
  bool advance(Vec* x, Vec* v, double dt, double* t_event, int* reflections) const {
    double remaining = dt;
    for (int guard = 0; guard < 32 && remaining > 0.0; ++guard) {
      const int side = side_of(x->norm());
      Vec x1, v1;
      rk4(*x, *v, remaining, side, &x1, &v1);

      if (side >= 0 && side_of(x1.norm()) != side) {
        // land on the far side of the junction, then continue there
        double lo = 0.0, hi = remaining;
        for (int it = 0; it < kBisection && hi - lo > 1e-15 * dt; ++it) {
          const double mid = 0.5 * (lo + hi);
          Vec xm, vm;
          rk4(*x, *v, mid, side, &xm, &vm);
          (side_of(xm.norm()) == side ? lo : hi) = mid;
        }
        rk4(*x, *v, hi, side, &x1, &v1);
        *x = x1;
        *v = v1;
        remaining -= hi;
        continue;
      }

      if (exterior_ && x1.norm() < r_c_ - kBoundarySlack) {
        double tau = 0.0;
        if (x->norm() >= r_c_) {
          double lo = 0.0, hi = remaining;
          for (int it = 0; it < kBisection && hi - lo > 1e-14; ++it) {
            const double mid = 0.5 * (lo + hi);
            Vec xm, vm;
            rk4(*x, *v, mid, side, &xm, &vm);
            (xm.norm() >= r_c_ ? lo : hi) = mid;
          }
          tau = lo;
          rk4(*x, *v, tau, side, &x1, &v1);
          *x = x1;
          *v = v1;
        }
        if (!opt_.reflect) {
          *t_event = dt - remaining + tau;
          return false;
        }
        GeodesicState s{0.0, *x, *v};
        *v = reflect_at_inner_boundary(g_, s).v;
        ++*reflections;
        remaining -= tau;
        continue;
      }

      *x = x1;
      *v = v1;
      remaining = 0.0;
    }
    return true;
  }

 private:
  const MetricField& g_;
  IntegrateOptions opt_;
  double r_j_, r_c_;
  bool exterior_;
};

double speed2(const MetricField& g, const Vec& x, const Vec& v) { return v.dot(g.G_raw(x) * v); }

void record(GeodesicTrace& tr, const MetricField& g, double t, const Vec& x, const Vec& v) {
  tr.t.push_back(t);
  tr.x.push_back(x);
  tr.v.push_back(v);
  tr.r.push_back(x.norm());
  tr.h.push_back(radial_velocity(g, x, v));
  tr.drift.push_back(std::abs(speed2(g, x, v) - 1.0));
}

std::vector<Vec> shot_directions(int dim, int count, std::uint64_t seed) {
  if (dim == 2) return sphere_directions(2, count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vec> out;
  while (static_cast<int>(out.size()) < count) {
    Vec d(dim);
    for (int i = 0; i < dim; ++i) d(i) = normal(rng);
    if (d.norm() > 1e-12) out.push_back(d.normalized());
  }
  return out;
}

}  // namespace

std::pair<Vec, Vec> geodesic_rhs(const MetricField& g, const GeodesicState& s) {
  return {s.v, g.acceleration_raw(s.x, s.v)};
}

double radial_velocity(const MetricField& g, const Vec& x, const Vec& v) {
  const double r = x.norm();
  if (r == 0.0) return 0.0;
  return (x / r).dot(g.G_raw(x) * v);
}

GeodesicState initial_state(const MetricField& g, const Vec& x0, const Vec& direction) {
  if (x0.size() != g.dim() || direction.size() != g.dim()) {
    throw DomainError("initial point or direction has the wrong dimension");
  }
  if (g.exterior() && x0.norm() < g.r_c() * (1.0 - 1e-12)) {
    throw DomainError("initial point lies inside r_c of an exterior metric");
  }
  const double s2 = speed2(g, x0, direction);
  if (!(s2 > 0.0)) throw DomainError("initial direction has zero length");
  return {0.0, x0, direction / std::sqrt(s2)};
}

GeodesicTrace integrate_geodesic(const MetricField& g, const Vec& x0, const Vec& direction,
                                 double T, const IntegrateOptions& opt) {
  return integrate_from(g, initial_state(g, x0, direction), T, opt);
}

GeodesicTrace integrate_from(const MetricField& g, const GeodesicState& start, double T,
                             const IntegrateOptions& opt) {
  if (!(opt.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(T >= 0.0)) throw std::invalid_argument("T must be nonnegative");
  const int stride = std::max(1, opt.record_every);
  GeodesicTrace tr;
  tr.dim = g.dim();
  tr.dt = opt.dt;
  tr.record_every = stride;

  Stepper stepper(g, opt);
  Vec x = start.x, v = start.v;
  record(tr, g, start.t, x, v);
  tr.max_drift = tr.drift.back();

  const long steps = std::lround(T / opt.dt);
  for (long k = 1; k <= steps; ++k) {
    double t_event = 0.0;
    const bool alive = stepper.advance(&x, &v, opt.dt, &t_event, &tr.reflections);
    if (!alive) {
      tr.hit_inner_boundary = true;
      tr.t_hit = start.t + (k - 1) * opt.dt + t_event;
      record(tr, g, tr.t_hit, x, v);
      tr.max_drift = std::max(tr.max_drift, tr.drift.back());
      break;
    }
    if (opt.renormalize) v /= std::sqrt(speed2(g, x, v));
    const double drift = std::abs(speed2(g, x, v) - 1.0);
    tr.max_drift = std::max(tr.max_drift, drift);
    if (k % stride == 0 || k == steps) record(tr, g, start.t + k * opt.dt, x, v);
  }
  tr.final_state = {tr.t.back(), tr.x.back(), tr.v.back()};
  return tr;
}

GeodesicState reflect_at_inner_boundary(const MetricField& g, const GeodesicState& s) {
  const Vec xhat = s.x / s.x.norm();
  const double h = radial_velocity(g, s.x, s.v);
  GeodesicState out = s;
  out.v = s.v - 2.0 * h * xhat;
  return out;
}

// ---------------------------------------------------------------- theorems

double Envelope::operator()(double y) const {
  if (f.empty()) return 0.0;
  if (y <= r_c) return f.front();
  const double s = (y - r_c) / dy;
  const std::size_t k = static_cast<std::size_t>(s);
  if (k + 1 >= f.size()) return f.back();
  const double w = s - static_cast<double>(k);
  return (1.0 - w) * f[k] + w * f[k + 1];
}

Envelope alpha_envelope(const MetricField& g, double y_max, double dy, int angular) {
  Envelope env;
  env.r_c = g.r_c();
  env.dy = dy;
  const auto dirs = sphere_directions(g.dim(), angular, 5);
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(std::max(0.0, y_max - env.r_c) / dy)) + 2;
  env.f.reserve(count);
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) {
    const double y = env.r_c + dy * static_cast<double>(k);
    for (const Vec& d : dirs) running = std::min(running, g.alpha(y, d) + 1.0 / y);
    env.f.push_back(running);
  }
  return env;
}

VelocityBoundResult check_theorem_velocity_bound(const GeodesicTrace& tr, const MetricField& g,
                                                 double rho0) {
  if (g.exterior()) throw InapplicableTheorem("velocity bound needs a full-space escape metric");
  if (!(rho0 > 0.0)) throw InapplicableTheorem("rho0 must be positive");
  const double r_hi = std::max(10.0 * g.r_c(), *std::max_element(tr.r.begin(), tr.r.end()));
  const auto dirs = sphere_directions(g.dim(), 16, 9);
  for (int i = 0; i < 64; ++i) {
    const double r = g.r_c() + (r_hi - g.r_c()) * i / 63.0;
    for (const Vec& d : dirs) {
      if (r * g.alpha(r, d) + 1.0 < rho0 - 1e-12) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "r alpha + 1 = %.6g < rho0 = %.6g at r = %.6g",
                      r * g.alpha(r, d) + 1.0, rho0, r);
        throw InapplicableTheorem(buf);
      }
    }
  }
  VelocityBoundResult out;
  out.rho0 = rho0;
  out.c0 = g.c0();
  const double R = std::max(tr.r.front(), out.c0);
  out.c_emp = (R + out.c0) / rho0;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.t[i] <= out.c_emp) continue;
    margin = std::min(margin, tr.r[i] - (rho0 * tr.t[i] - R));
  }
  out.margin = margin;
  return out;
}

IntegralBoundResult check_theorem_integral_bound(const GeodesicTrace& tr, const MetricField& g) {
  const std::size_t n = tr.size();
  if (n < 2) throw InapplicableTheorem("trace too short");
  const double T = tr.t.back() - tr.t.front();
  std::size_t i0 = 0;
  for (std::size_t i = n; i-- > 0;) {
    if (tr.h[i] < -1e-12) {
      i0 = i + 1;
      break;
    }
  }
  if (i0 >= n || tr.t[i0] - tr.t.front() > 0.5 * T) {
    throw InapplicableTheorem("no persistent h >= 0 regime before T/2");
  }
  IntegralBoundResult out;
  out.t0 = tr.t[i0];
  out.asymptotic_speed = tr.r.back() / T;

  double runmax = tr.h[i0];
  double drop = 0.0;
  for (std::size_t i = i0; i < n; ++i) {
    runmax = std::max(runmax, tr.h[i]);
    drop = std::max(drop, runmax - tr.h[i]);
  }
  out.h_monotonicity = drop;

  const double x0 = tr.r.front();
  const double step = tr.t[1] - tr.t[0];
  const Envelope env = alpha_envelope(g, x0 + T + 1.0, std::max(step, 1e-3));
  // F(t) = int_0^t f(|x0| + z) dz, then RHS(t) = |gamma(t0)| + int_{t0}^t tanh F.
  std::vector<double> F(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double a = tr.t[i - 1] - tr.t.front(), b = tr.t[i] - tr.t.front();
    F[i] = F[i - 1] + 0.5 * (b - a) * (env(x0 + a) + env(x0 + b));
  }
  double rhs = tr.r[i0];
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = i0 + 1; i < n; ++i) {
    rhs += 0.5 * (tr.t[i] - tr.t[i - 1]) * (std::tanh(F[i - 1]) + std::tanh(F[i]));
    margin = std::min(margin, tr.r[i] - rhs);
  }
  out.margin = margin;
  return out;
}

CrossingTimes lemma_crossing_times(const GeodesicTrace& tr, double r_c) {
  CrossingTimes c;
  if (tr.size() == 0) return c;
  const double R = std::max(tr.r.front(), r_c);
  auto first_reach = [&](double level, std::size_t* idx) {
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (tr.r[i] >= level) {
        *idx = i;
        if (i == 0) return tr.t[0];
        const double w = (level - tr.r[i - 1]) / (tr.r[i] - tr.r[i - 1]);
        return tr.t[i - 1] + w * (tr.t[i] - tr.t[i - 1]);
      }
    }
    *idx = tr.size();
    return kNaN;
  };
  std::size_t i1 = 0, i2 = 0;
  c.t1 = first_reach(R + 0.5, &i1);
  c.t2 = first_reach(R + 1.5, &i2);
  if (std::isnan(c.t1) || std::isnan(c.t2)) return c;
  for (std::size_t i = i2; i > i1 && i > 0; --i) {
    const double a = tr.r[i - 1] - (R + 1.0), b = tr.r[i] - (R + 1.0);
    if ((a < 0.0) != (b < 0.0) || b == 0.0) {
      const double w = (a == b) ? 1.0 : a / (a - b);
      c.t0 = tr.t[i - 1] + w * (tr.t[i] - tr.t[i - 1]);
      break;
    }
  }
  return c;
}

double escape_radius(const Vec& x0, double r_c) { return 10.0 * std::max(x0.norm(), r_c); }

const char* dichotomy_name(Dichotomy d) {
  switch (d) {
    case Dichotomy::escapes: return "escapes";
    case Dichotomy::hits_boundary: return "hits_boundary";
    case Dichotomy::undecided: return "undecided";
  }
  return "?";
}

DichotomyResult exterior_dichotomy(const GeodesicTrace& tr, const MetricField& g) {
  DichotomyResult out;
  out.escape_radius = escape_radius(tr.x.front(), g.r_c());
  if (tr.hit_inner_boundary) {
    out.kind = Dichotomy::hits_boundary;
    out.t0 = tr.t_hit;
  } else if (tr.r.back() > out.escape_radius) {
    out.kind = Dichotomy::escapes;
  }
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::escaped: return "escaped";
    case Verdict::trapped: return "trapped";
    case Verdict::hit_inner_boundary: return "hit_inner_boundary";
  }
  return "?";
}

BatchSummary batch_shoot(const MetricField& g, const std::vector<Vec>& x0_set,
                         const BatchOptions& opt) {
  BatchSummary sum;
  auto fold_min = [](double acc, double v) {
    if (std::isnan(v)) return acc;
    return std::isnan(acc) ? v : std::min(acc, v);
  };
  auto fold_max = [](double acc, double v) {
    if (std::isnan(v)) return acc;
    return std::isnan(acc) ? v : std::max(acc, v);
  };
  std::size_t index = 0;
  for (std::size_t p = 0; p < x0_set.size(); ++p) {
    const auto dirs = opt.fixed_directions.empty()
                          ? shot_directions(g.dim(), opt.directions, opt.seed + p)
                          : opt.fixed_directions;
    for (const Vec& d : dirs) {
      const GeodesicTrace tr = integrate_geodesic(g, x0_set[p], d, opt.T, opt.integrate);
      EscapeReport rep;
      rep.x0 = x0_set[p];
      rep.direction = tr.v.front();
      rep.final_r = tr.r.back();
      rep.asymptotic_speed = tr.r.back() / std::max(tr.t.back(), 1e-300);
      rep.max_drift = tr.max_drift;
      rep.t_hit = tr.t_hit;
      if (tr.hit_inner_boundary) {
        rep.verdict = Verdict::hit_inner_boundary;
      } else if (tr.r.back() > escape_radius(x0_set[p], g.r_c())) {
        rep.verdict = Verdict::escaped;
      } else {
        rep.verdict = Verdict::trapped;
      }
      const CrossingTimes ct = lemma_crossing_times(tr, g.r_c());
      rep.t1 = ct.t1;
      rep.t2 = ct.t2;
      rep.t0 = ct.t0;
      if (opt.rho0 > 0.0) {
        try {
          rep.velocity_margin = check_theorem_velocity_bound(tr, g, opt.rho0).margin;
        } catch (const InapplicableTheorem& e) {
          rep.notes += std::string("velocity bound inapplicable: ") + e.what() + "; ";
        }
      }
      if (opt.integral_bound) {
        try {
          const auto ib = check_theorem_integral_bound(tr, g);
          rep.integral_margin = ib.margin;
          rep.h_monotonicity = ib.h_monotonicity;
          rep.t0 = ib.t0;
        } catch (const InapplicableTheorem& e) {
          rep.notes += std::string("integral bound inapplicable: ") + e.what() + "; ";
        }
      }
      if (opt.on_trace) opt.on_trace(index, tr);
      ++index;

      switch (rep.verdict) {
        case Verdict::escaped: ++sum.escaped; break;
        case Verdict::trapped: ++sum.trapped; break;
        case Verdict::hit_inner_boundary: ++sum.hit; break;
      }
      sum.min_asymptotic_speed = fold_min(sum.min_asymptotic_speed, rep.asymptotic_speed);
      sum.min_velocity_margin = fold_min(sum.min_velocity_margin, rep.velocity_margin);
      sum.min_integral_margin = fold_min(sum.min_integral_margin, rep.integral_margin);
      sum.max_h_monotonicity = fold_max(sum.max_h_monotonicity, rep.h_monotonicity);
      sum.max_drift = fold_max(sum.max_drift, rep.max_drift);
      sum.reports.push_back(std::move(rep));
    }
  }
  return sum;
}

}  // namespace escape
