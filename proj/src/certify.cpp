#include "escape/certify.hpp"

#include <algorithm>
#include <cmath>

namespace escape {

CertificationReport certify_escape(const MetricField& g, SampleSpec spec) {
  const double r_c = g.r_c();
  if (spec.r_hi <= 0.0) spec.r_hi = 10.0 * r_c;
  if (spec.r_lo <= 0.0) spec.r_lo = g.exterior() ? r_c : r_c / 16.0;
  if (g.exterior()) spec.r_lo = std::max(spec.r_lo, r_c);

  CertificationReport rep;
  rep.spec = spec;
  double lowest = std::numeric_limits<double>::infinity();
  auto consider = [&](double value, const Vec& x, const char* kind) {
    if (value < lowest) {
      lowest = value;
      rep.worst_point = x;
      rep.worst_kind = kind;
    }
  };
  const auto dirs = sphere_directions(g.dim(), spec.angular, spec.seed);

  const double r_out = std::max(spec.r_lo, r_c);
  for (int i = 0; i < spec.radial; ++i) {
    const double r =
        spec.radial == 1 ? r_out : r_out + (spec.r_hi - r_out) * i / (spec.radial - 1.0);
    for (int a = 0; a < static_cast<int>(dirs.size()); ++a) {
      const Vec x = r * dirs[a];
      const Mat G = evaluate_G(g, x);
      const Mat dG = evaluate_dG_dr(g, x);
      const Mat F = tangent_frame(x);
      const Mat T = F.transpose() * G * F;
      const Mat B = 0.5 * (F.transpose() * dG * F);
      const double lam = min_generalized_eigenvalue(0.5 * (B + B.transpose()), T);
      const double alpha = g.alpha(r, dirs[a]);

      CertPoint p;
      p.r = r;
      p.theta_index = a;
      p.x = x;
      p.margin_escape = lam - alpha;
      p.admissibility = r * alpha + 1.0;
      rep.max_radial_residual =
          std::max(rep.max_radial_residual, (G * dirs[a] - dirs[a]).norm());
      rep.worst_escape = std::min(rep.worst_escape, p.margin_escape);
      rep.worst_admissibility = std::min(rep.worst_admissibility, p.admissibility);
      consider(p.margin_escape, x, "escape");
      consider(p.admissibility - spec.tol, x, "admissibility");
      rep.points.push_back(std::move(p));
    }
  }

  if (!g.exterior() && spec.r_lo < r_c && spec.interior_radial > 0) {
    const double two_rho = 2.0 * g.rho_c();
    for (int i = 0; i < spec.interior_radial; ++i) {
      const double r = spec.r_lo + (r_c - spec.r_lo) * i / spec.interior_radial;
      for (int a = 0; a < static_cast<int>(dirs.size()); ++a) {
        const Vec x = r * dirs[a];
        const Mat G = evaluate_G(g, x);
        const double lam = min_generalized_eigenvalue(hessian_r2(g, x), G);
        CertPoint p;
        p.r = r;
        p.theta_index = a;
        p.x = x;
        p.margin_interior = lam - two_rho;
        rep.worst_interior = std::min(rep.worst_interior, p.margin_interior);
        consider(p.margin_interior, x, "interior");
        rep.points.push_back(std::move(p));
      }
    }
    if (!(g.rho_c() > 0.0)) rep.notes.push_back("interior convexity constant is not positive");
  }

  if (g.junction_radius() > 0.0) {
    rep.notes.push_back("metric is only continuous across r = r_c");
  }

  const double tol = spec.tol;
  bool ok = rep.worst_escape >= -tol;
  ok = ok && (!std::isfinite(rep.worst_interior) || rep.worst_interior >= -tol);
  ok = ok && rep.worst_admissibility > tol;
  if (!g.exterior()) ok = ok && g.rho_c() > 0.0;
  rep.pass = ok;
  return rep;
}

}  // namespace escape
