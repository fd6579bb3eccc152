#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "escape/linalg.hpp"

namespace escape {

enum class Family {
  euclidean,
  radial_power,
  radial_exp,
  cylinder,
  prop21_general,
  prop22_exterior,
  tabulated,
};

/// full: metric on all of R^n. exterior: only |x| >= r_c is meaningful.
enum class Domain { full, exterior };

const char* family_name(Family f);
Family parse_family(const std::string& name);

/// Functions of (r, xhat); xhat is the Euclidean unit vector of x.
using ScalarField = std::function<double(double r, const Vec& xhat)>;
/// n x n symmetric matrix functions of (r, xhat). Only the part acting on
/// the tangent space of the sphere is used.
using MatrixField = std::function<Mat(double r, const Vec& xhat)>;
using Profile = std::function<double(double r)>;

namespace detail {
class Block;
}

/// G(x) = W + P M(r, xhat) P with W = xhat xhat^T and P = I - W, so that
/// G xhat = xhat holds for |x| >= r_c. Immutable; copies share state.
///
/// Inside r_c the isotropic full-space families use the blend
/// phi_in(r) = 1 + (phi(r_c) - 1)(r/r_c)^2, which is smooth at the origin and
/// equal to the identity whenever phi(r_c) = 1.
class MetricField {
 public:
  int dim() const;
  double r_c() const;
  Family family() const;
  Domain domain() const;
  bool exterior() const { return domain() == Domain::exterior; }
  const std::map<std::string, double>& params() const;
  double param(const std::string& key) const;

  /// Tangential block is phi(r) times the identity.
  bool isotropic() const;
  /// Derivatives come from central differences rather than formulas.
  bool finite_difference() const;
  /// Radius where the metric is only C^0 (0 when smooth everywhere).
  double junction_radius() const;

  double alpha(double r, const Vec& xhat) const;
  double alpha(const Vec& x) const;
  MetricField with_alpha(ScalarField alpha) const;

  /// Interior convexity constant and c0 = sup_{|x| <= r_c} r |Dr|_g.
  /// Zero for exterior families.
  double rho_c() const;
  double c0() const;

  // Unchecked evaluation. No domain or definiteness checks; exterior
  // families are extended by their formulas below r_c. Used by
  // integrators and difference stencils.
  Mat G_raw(const Vec& x) const;
  Mat dG_dr_raw(const Vec& x) const;
  /// dG/dx_l for l = 0..n-1.
  std::vector<Mat> dG_dx_raw(const Vec& x) const;
  /// -Gamma(x)(v, v).
  Vec acceleration_raw(const Vec& x, const Vec& v) const;
  /// Same quantities on a fixed side of r_c: the interior blend
  /// (inner = true) or the exterior formula, each continued across r_c.
  /// Lets an integrator step up to the junction without mixing branches.
  std::vector<Mat> dG_dx_on(const Vec& x, bool inner) const;
  Vec acceleration_on(const Vec& x, const Vec& v, bool inner) const;
  /// Isotropic families only: tangential factor phi and its r-derivative.
  void phi_raw(double r, double* phi, double* dphi) const;

  struct Impl;
  explicit MetricField(std::shared_ptr<const Impl> impl);

 private:
  std::shared_ptr<const Impl> impl_;
};

// Built-in families. r_c defaults to 1.
MetricField make_euclidean(int dim);
/// phi = (r/r_c)^{2(m1-1)}, declared alpha = (m1-1)/r.
MetricField make_radial_power(int dim, double m1, double r_c = 1.0, Domain d = Domain::full);
/// phi = (r_c/r)^2 exp((2 m2/(n-1)) int_{r_c}^r y^{-s2} dy),
/// declared alpha = m1 r^{-s1} - 1/r.
MetricField make_radial_exp(int dim, double m1, double m2, double s1, double s2,
                            double r_c = 1.0, Domain d = Domain::exterior);
/// phi = (R0/r)^2, declared alpha = -1/r.
MetricField make_cylinder(int dim, double R0 = 2.0, double r_c = 1.0, Domain d = Domain::full);
/// phi sampled at r_start + k*dr, cubic B-spline in between. Beyond the
/// table phi continues with constant logarithmic slope. Declared alpha is
/// phi'/(2 phi).
MetricField make_tabulated(int dim, double r_start, double dr, std::vector<double> phi,
                           double r_c, Domain d = Domain::full);

/// G = W + e^{A}(B + int_{r_c}^r 2 e^{-A(y)} Q_T(y) dy) restricted to the
/// tangent space, A(r) = int_{r_c}^r 2 alpha, with B = P_T for the full-space
/// construction and B = P_T P_b P_T for the exterior one. G = I inside r_c.
/// Throws ParameterError when r alpha + 1 < 0 somewhere on a sample grid.
MetricField build_escape_metric(ScalarField alpha, MatrixField Q, double r_c, int dim);
MetricField build_exterior_escape_metric(ScalarField alpha, MatrixField Q, MatrixField P_boundary,
                                         double r_c, int dim);
/// Isotropic versions: alpha(r), Q = q(r) P_T, P_b = p_boundary * I.
MetricField build_escape_metric_radial(Profile alpha, Profile q, double r_c, int dim);
MetricField build_exterior_escape_metric_radial(Profile alpha, Profile q, double p_boundary,
                                                double r_c, int dim);

// Checked operations.
Mat evaluate_G(const MetricField& g, const Vec& x);
Mat evaluate_dG_dr(const MetricField& g, const Vec& x);
/// gamma[k](i, j) = Gamma^k_{ij}.
std::vector<Mat> christoffel(const MetricField& g, const Vec& x);
/// Gamma(x)(v, w)^k = sum_ij Gamma^k_ij v^i w^j.
Vec contract(const std::vector<Mat>& gamma, const Vec& v, const Vec& w);

struct FormulaCheck {
  double closed_form = 0.0;
  double from_christoffel = 0.0;
  /// Natural size of the quantity (|X|_g^2 / r, or (n-1)/r). Floors the
  /// denominator so that identically vanishing values compare sensibly.
  double scale = 0.0;
  double relative_gap() const;
};

/// D^2 r(X, X) for X tangent to the sphere through x.
FormulaCheck hessian_r(const MetricField& g, const Vec& x, const Vec& X);
/// Laplace-Beltrami of r; the second value sums hessian_r over a
/// g-orthonormal tangential frame.
FormulaCheck laplacian_r(const MetricField& g, const Vec& x);

/// D^2(r^2) as a matrix, from Christoffels: 2I - 2 Gamma^k x_k.
Mat hessian_r2(const MetricField& g, const Vec& x);

}  // namespace escape
