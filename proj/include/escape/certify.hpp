#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "escape/metric.hpp"

namespace escape {

struct SampleSpec {
  double r_lo = 0.0;  // 0: start at r_c / 16 for full-space metrics, r_c otherwise
  double r_hi = 0.0;  // 0: 10 r_c
  int radial = 64;
  int angular = 32;
  int interior_radial = 16;
  std::uint64_t seed = 0;
  double tol = 1e-8;
};

struct CertPoint {
  double r = 0.0;
  int theta_index = 0;
  Vec x;
  // NaN where the inequality does not apply.
  double margin_escape = std::numeric_limits<double>::quiet_NaN();
  double margin_interior = std::numeric_limits<double>::quiet_NaN();
  double admissibility = std::numeric_limits<double>::quiet_NaN();  // r alpha + 1
};

struct CertificationReport {
  SampleSpec spec;
  std::vector<CertPoint> points;
  double worst_escape = std::numeric_limits<double>::infinity();
  double worst_interior = std::numeric_limits<double>::infinity();
  double worst_admissibility = std::numeric_limits<double>::infinity();
  double max_radial_residual = 0.0;  // |G xhat - xhat| over exterior samples
  Vec worst_point;
  std::string worst_kind;
  bool pass = false;
  std::vector<std::string> notes;
};

/// Samples the escape inequality on |x| >= r_c through the tangential pencil
/// (F^T dG/dr F / 2, F^T G F), and D^2 r^2 >= 2 rho_c G inside r_c.
/// Passing also needs r alpha + 1 > tol everywhere outside.
CertificationReport certify_escape(const MetricField& g, SampleSpec spec = {});

}  // namespace escape
