#include <cmath>
#include <vector>

#include "doctest.h"
#include "escape/certify.hpp"
#include "escape/errors.hpp"
#include "escape/metric.hpp"
#include "escape/quadrature.hpp"

using namespace escape;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

Vec polar(double r, double th) { return vec2(r * std::cos(th), r * std::sin(th)); }

// Independent oracle: Christoffels from central differences of evaluate_G.
std::vector<Mat> fd_christoffel(const MetricField& g, const Vec& x, double h = 1e-5) {
  const int n = g.dim();
  std::vector<Mat> d(n);
  for (int l = 0; l < n; ++l) {
    Vec xp = x, xm = x;
    xp(l) += h;
    xm(l) -= h;
    d[l] = (g.G_raw(xp) - g.G_raw(xm)) / (2 * h);
  }
  const Mat Ginv = g.G_raw(x).inverse();
  std::vector<Mat> gamma(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int l = 0; l < n; ++l) s += Ginv(k, l) * (d[i](l, j) + d[j](l, i) - d[l](i, j));
        gamma[k](i, j) = 0.5 * s;
      }
  return gamma;
}

double max_gap(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return m;
}

std::vector<MetricField> builtin_families() {
  std::vector<double> tab;
  for (int k = 0; k < 200; ++k) {
    const double r = 0.5 + 0.05 * k;
    tab.push_back(1.0 + 0.3 * std::log(r) * std::log(r) + 0.1 * (r - 1.0) * (r - 1.0));
  }
  return {
      make_euclidean(2),
      make_radial_power(2, 2.0),
      make_radial_power(3, 1.5),
      make_radial_exp(2, 2.0, 3.0, 2.0, 1.0),
      make_radial_exp(3, 1.0, 3.0, 1.5, 0.5),
      make_cylinder(2),
      make_cylinder(2, 2.0, 2.0, Domain::exterior),
      build_escape_metric_radial([](double r) { return 0.5 / r; },
                                 [](double r) { return 0.2 / (r * r); }, 1.0, 2),
      build_exterior_escape_metric_radial([](double r) { return 2.0 / (r * r) - 1.0 / r; },
                                          [](double) { return 0.0; }, 1.5, 1.0, 2),
      make_tabulated(2, 0.5, 0.05, tab, 1.0),
  };
}

}  // namespace

TEST_CASE("quadrature helpers") {
  const double s = quad::adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 2.0);
  CHECK(std::abs(s - (std::exp(2.0) - 1.0)) < 1e-9);
  const double gl = quad::gauss_legendre10([](double x) { return std::pow(x, 19); }, 0.0, 1.0);
  CHECK(std::abs(gl - 0.05) < 1e-14);
}

TEST_CASE("evaluate_G examples") {
  CHECK((evaluate_G(make_euclidean(3), vec3(0.3, -2, 5)) - Mat::Identity(3, 3)).norm() == 0.0);

  const Mat G = evaluate_G(make_radial_power(2, 2.0), vec2(2, 0));
  CHECK(G(0, 0) == doctest::Approx(1.0));
  CHECK(G(1, 1) == doctest::Approx(4.0));
  CHECK(std::abs(G(0, 1)) < 1e-15);

  const Mat C = evaluate_G(make_cylinder(2), vec2(2, 0));
  CHECK((C - Mat::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("evaluate_dG_dr examples") {
  const Mat d = evaluate_dG_dr(make_radial_power(2, 2.0), vec2(2, 0));
  CHECK(d(1, 1) == doctest::Approx(4.0));
  CHECK(std::abs(d(0, 0)) < 1e-15);
  CHECK(evaluate_dG_dr(make_euclidean(2), vec2(1, 3)).norm() == 0.0);
  const Mat c = evaluate_dG_dr(make_cylinder(2), vec2(2, 0));
  CHECK(c(1, 1) == doctest::Approx(-1.0));

  // cylinder: dG/dr = -(2/R0)(I - W) G at every r >= r_c
  const auto cyl = make_cylinder(2);
  for (double r : {1.0, 1.7, 2.0, 5.0}) {
    const Vec x = polar(r, 0.4);
    const Vec xh = x / r;
    const Mat P = Mat::Identity(2, 2) - xh * xh.transpose();
    const Mat expect = -(2.0 / r) * P * evaluate_G(cyl, x);
    CHECK((evaluate_dG_dr(cyl, x) - expect).norm() < 1e-13);
  }
}

TEST_CASE("closed-form derivatives match finite differences") {
  for (const auto& g : builtin_families()) {
    CAPTURE(family_name(g.family()));
    const int n = g.dim();
    for (double s : {1.05, 1.3, 2.5, 6.0}) {
      const double r = s * g.r_c();
      Vec d = Vec::Ones(n).normalized();
      d(0) += 0.3;
      d.normalize();
      const Vec x = r * d;
      const double h = 1e-5 * std::max(1.0, r);
      const Mat fd = (g.G_raw((r + h) * d) - g.G_raw((r - h) * d)) / (2 * h);
      const Mat an = evaluate_dG_dr(g, x);
      CHECK((fd - an).norm() <= 1e-6 * std::max(1.0, an.norm()));
    }
  }
}

TEST_CASE("domain errors") {
  const auto ext = make_cylinder(2, 2.0, 2.0, Domain::exterior);
  CHECK_THROWS_AS(evaluate_G(ext, vec2(1.5, 0)), DomainError);
  CHECK_NOTHROW(evaluate_G(ext, vec2(2.0, 0)));
  CHECK_THROWS_AS(evaluate_dG_dr(make_radial_power(2, 2.0), vec2(0.5, 0)), DomainError);
  CHECK_THROWS_AS(hessian_r(make_euclidean(2), vec2(2, 0), vec2(1, 0)), NotTangent);
  CHECK_THROWS_AS(make_radial_power(1, 2.0), ParameterError);
  CHECK_THROWS_AS(make_radial_power(9, 2.0), ParameterError);
  CHECK_THROWS_AS(parse_family("sphere"), ParameterError);
}

TEST_CASE("tabulated metric with a non-positive sample is rejected") {
  std::vector<double> tab(10, 1.0);
  tab[4] = -0.1;
  CHECK_THROWS_AS(make_tabulated(2, 0.5, 0.1, tab, 1.0), NonPositiveDefinite);
}

TEST_CASE("symmetry and radial normalization for every family") {
  for (const auto& g : builtin_families()) {
    CAPTURE(family_name(g.family()));
    const int n = g.dim();
    const auto dirs = sphere_directions(n, 16, 3);
    for (int i = 0; i < 20; ++i) {
      const double r = g.r_c() * (1.0 + 0.4 * i);
      for (const Vec& d : dirs) {
        const Vec x = r * d;
        const Mat G = evaluate_G(g, x);
        CHECK(asymmetry(G) <= 1e-12);
        CHECK(asymmetry(evaluate_dG_dr(g, x)) <= 1e-12);
        CHECK((G * d - d).norm() <= 1e-10);
      }
    }
  }
}

TEST_CASE("Christoffel symbols agree with a finite-difference oracle") {
  for (const auto& g : builtin_families()) {
    CAPTURE(family_name(g.family()));
    const int n = g.dim();
    for (double s : {1.2, 2.0, 3.5}) {
      const double r = s * g.r_c();
      Vec d = Vec::LinSpaced(n, 1.0, 2.0).normalized();
      const Vec x = r * d;
      const auto an = christoffel(g, x);
      const auto fd = fd_christoffel(g, x);
      CHECK(max_gap(an, fd) < 1e-6);
      for (int k = 0; k < n; ++k) CHECK(asymmetry(an[k]) < 1e-10);
    }
  }
  const auto e = christoffel(make_euclidean(3), vec3(1, 2, 3));
  for (const auto& m : e) CHECK(m.norm() == 0.0);
}

TEST_CASE("interior Christoffels of the blended cylinder") {
  const auto g = make_cylinder(2);
  for (double r : {0.0, 0.3, 0.8}) {
    const Vec x = polar(r, 1.1);
    const auto an = christoffel(g, x);
    if (r == 0.0) {
      for (const auto& m : an) CHECK(m.norm() == 0.0);
    } else {
      CHECK(max_gap(an, fd_christoffel(g, x)) < 1e-7);
    }
  }
}

TEST_CASE("geodesic acceleration equals -Gamma(v, v)") {
  for (const auto& g : builtin_families()) {
    CAPTURE(family_name(g.family()));
    const int n = g.dim();
    const Vec x = 1.7 * g.r_c() * Vec::LinSpaced(n, 0.5, 1.0).normalized();
    const Vec v = Vec::LinSpaced(n, -1.0, 0.7);
    const Vec a = g.acceleration_raw(x, v);
    const Vec b = -contract(christoffel(g, x), v, v);
    CHECK((a - b).norm() < 1e-7 * std::max(1.0, b.norm()));
  }
  // radial lines are geodesics once G dr = dr
  const auto p = make_radial_power(2, 2.0);
  const Vec x = polar(3.0, 0.7);
  CHECK(p.acceleration_raw(x, x / 3.0).norm() < 1e-14);
  // cylinder: tangential motion on r = R0 has centripetal acceleration only
  const auto c = make_cylinder(2);
  const Vec acc = c.acceleration_raw(vec2(2, 0), vec2(0, 1));
  CHECK(acc(0) == doctest::Approx(-0.5));
  CHECK(std::abs(acc(1)) < 1e-15);
}

TEST_CASE("hessian_r examples") {
  const Vec x = vec2(2, 0);
  const Vec X = vec2(0, 1);
  auto e = hessian_r(make_euclidean(2), x, X);
  CHECK(e.closed_form == doctest::Approx(0.5));
  CHECK(e.from_christoffel == doctest::Approx(0.5));

  for (double r : {1.0, 2.0, 4.5}) {
    auto c = hessian_r(make_cylinder(2), polar(r, 0.3), polar(1.0, 0.3 + M_PI / 2));
    CHECK(std::abs(c.closed_form) < 1e-13);
    CHECK(std::abs(c.from_christoffel) < 1e-12);
  }

  // |X|_g = 1 at r = 2 for phi = r^2: X = (0, 1/2)
  auto p = hessian_r(make_radial_power(2, 2.0), x, vec2(0, 0.5));
  CHECK(p.closed_form == doctest::Approx(1.0));
  CHECK(p.from_christoffel == doctest::Approx(1.0));
}

TEST_CASE("laplacian_r examples") {
  auto e = laplacian_r(make_euclidean(3), vec3(2, 0, 0));
  CHECK(e.closed_form == doctest::Approx(1.0));
  CHECK(e.from_christoffel == doctest::Approx(1.0));
  auto p = laplacian_r(make_radial_power(2, 2.0), vec2(2, 0));
  CHECK(p.closed_form == doctest::Approx(1.0));
  CHECK(p.from_christoffel == doctest::Approx(1.0));
  // det G = r^{2 m2 - 2(n-1)} gives m2 / r: radial_exp with s2 = 1 in n = 3
  const auto b = make_radial_exp(3, 1.0, 4.0, 1.5, 1.0);
  auto l = laplacian_r(b, vec3(0, 2.5, 0));
  CHECK(l.closed_form == doctest::Approx(4.0 / 2.5));
  CHECK(l.relative_gap() < 1e-6);
}

TEST_CASE("formula cross-checks on a 20 x 16 grid") {
  for (const auto& g : builtin_families()) {
    CAPTURE(family_name(g.family()));
    if (g.dim() != 2) continue;
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
      const double r = g.r_c() * (1.0 + 0.25 * i);
      for (int j = 0; j < 16; ++j) {
        const double th = 2 * M_PI * j / 16;
        const Vec x = polar(r, th);
        worst = std::max(worst, hessian_r(g, x, polar(1.0, th + M_PI / 2)).relative_gap());
        worst = std::max(worst, laplacian_r(g, x).relative_gap());
      }
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("constructed metric reproduces the power family") {
  for (double m1 : {2.0, 1.5, 3.0}) {
    const auto g = build_escape_metric_radial([m1](double r) { return (m1 - 1) / r; },
                                              nullptr, 1.0, 2);
    for (double r : {1.0, 1.37, 2.0, 5.5, 9.99}) {
      double f = 0, fp = 0;
      g.phi_raw(r, &f, &fp);
      const double exact = std::pow(r, 2 * (m1 - 1));
      CHECK(std::abs(f - exact) <= 1e-8 * exact);
      CHECK(std::abs(fp - 2 * (m1 - 1) * exact / r) <= 1e-8 * exact);
    }
  }
  // zero data gives the flat metric
  const auto flat = build_escape_metric_radial([](double) { return 0.0; }, nullptr, 1.0, 3);
  CHECK((evaluate_G(flat, vec3(3, 1, 2)) - Mat::Identity(3, 3)).norm() < 1e-15);
}

TEST_CASE("Prop 2.1 with a direction-dependent construction") {
  const int n = 2;
  ScalarField alpha = [](double r, const Vec& u) { return (0.5 + 0.2 * u(0) * u(0)) / r; };
  MatrixField Q = [](double r, const Vec& u) {
    return Mat(Mat::Identity(2, 2) * (0.1 + 0.05 * u(1)) / (r * r));
  };
  const auto g = build_escape_metric(alpha, Q, 1.0, n);
  // against a direct nested quadrature oracle on one ray
  const double th = 0.6;
  const Vec u = polar(1.0, th);
  const double r = 2.3;
  auto A = [&](double y) {
    return quad::adaptive_simpson([&](double s) { return 2 * alpha(s, u); }, 1.0, y, 1e-12);
  };
  const double q = 0.1 + 0.05 * u(1);
  const double J = quad::adaptive_simpson(
      [&](double y) { return 2 * std::exp(-A(y)) * q / (y * y); }, 1.0, r, 1e-12);
  const double expect = std::exp(A(r)) * (1 + J);
  const Vec t = polar(1.0, th + M_PI / 2);
  CHECK(t.dot(evaluate_G(g, r * u) * t) == doctest::Approx(expect).epsilon(1e-9));

  // round trip: margin is the smallest eigenvalue of T^{-1} F^T Q F
  SampleSpec spec;
  spec.radial = 12;
  spec.angular = 8;
  spec.r_hi = 4.0;
  const auto rep = certify_escape(g, spec);
  CHECK(rep.pass);
  for (const auto& p : rep.points) {
    if (std::isnan(p.margin_escape)) continue;
    const Vec d = p.x / p.r;
    const Vec tt = polar(1.0, std::atan2(d(1), d(0)) + M_PI / 2);
    const double qq = (0.1 + 0.05 * d(1)) / (p.r * p.r);
    const double T = tt.dot(evaluate_G(g, p.x) * tt);
    CHECK(p.margin_escape == doctest::Approx(qq / T).epsilon(1e-6));
  }
}

TEST_CASE("Prop 2.2 examples") {
  // P = I agrees with the full-space construction outside r_c
  auto a = [](double r) { return 0.8 / r; };
  auto q = [](double r) { return 0.3 / std::pow(r, 3); };
  const auto full = build_escape_metric_radial(a, q, 1.0, 2);
  const auto ext = build_exterior_escape_metric_radial(a, q, 1.0, 1.0, 2);
  for (double r : {1.0, 2.0, 7.0}) {
    CHECK((evaluate_G(full, polar(r, 1)) - evaluate_G(ext, polar(r, 1))).norm() < 1e-13);
  }

  // Example 1.4 data with s2 = 1, m2 = 3, n = 2 gives phi = r^4
  const double m1 = 2, s1 = 2, m2 = 3;
  auto alpha = [=](double r) { return m1 * std::pow(r, -s1) - 1 / r; };
  auto qb = [=](double r) { return std::pow(r, 4) * (m2 / r - m1 * std::pow(r, -s1)); };
  const auto b = build_exterior_escape_metric_radial(alpha, qb, 1.0, 1.0, 2);
  for (double r : {1.0, 1.5, 3.0, 8.0}) {
    double f = 0, fp = 0;
    b.phi_raw(r, &f, &fp);
    CHECK(std::abs(f - std::pow(r, 4)) <= 1e-8 * std::pow(r, 4));
  }
  CHECK(certify_escape(b).pass);

  // cylinder by construction: alpha = -1/r, r_c = R0
  const auto cyl = build_exterior_escape_metric_radial([](double r) { return -1 / r; }, nullptr,
                                                       1.0, 2.0, 2);
  for (double r : {2.0, 3.0, 6.0}) {
    double f = 0, fp = 0;
    cyl.phi_raw(r, &f, &fp);
    CHECK(f == doctest::Approx(4.0 / (r * r)).epsilon(1e-10));
  }
}

TEST_CASE("builder rejects alpha below -1/r") {
  CHECK_THROWS_AS(build_escape_metric_radial([](double r) { return -1.5 / r; }, nullptr, 1.0, 2),
                  ParameterError);
  CHECK_NOTHROW(build_escape_metric_radial([](double r) { return -0.9 / r; }, nullptr, 1.0, 2));
}

TEST_CASE("certify_escape examples") {
  auto e = certify_escape(make_euclidean(2));
  CHECK(e.pass);
  CHECK(std::abs(e.worst_escape) < 1e-15);

  auto p = certify_escape(make_radial_power(2, 2.0));
  CHECK(p.pass);
  CHECK(std::abs(p.worst_escape) < 1e-12);

  const auto strict = make_radial_power(2, 2.0).with_alpha(
      [](double r, const Vec&) { return 1.5 / r; });
  auto s = certify_escape(strict);
  CHECK_FALSE(s.pass);
  for (const auto& pt : s.points) {
    if (!std::isnan(pt.margin_escape)) CHECK(pt.margin_escape == doctest::Approx(-0.5 / pt.r));
  }

  // cylinder with its own alpha has margin 0 but fails strict admissibility
  auto c = certify_escape(make_cylinder(2));
  CHECK(std::abs(c.worst_escape) < 1e-12);
  CHECK(std::abs(c.worst_admissibility) < 1e-12);
  CHECK_FALSE(c.pass);
  auto c0 = certify_escape(make_cylinder(2).with_alpha([](double, const Vec&) { return 0.0; }));
  CHECK_FALSE(c0.pass);
  CHECK(c0.worst_escape < -0.09);
}

TEST_CASE("Prop 2.1 round trip passes certification") {
  const auto g = build_escape_metric_radial([](double r) { return -0.9 / r; },
                                            [](double r) { return 0.1 / (r * r); }, 1.0, 3);
  auto rep = certify_escape(g, SampleSpec{0, 0, 24, 16});
  CHECK(rep.pass);
  CHECK(rep.worst_escape >= -1e-8);
  CHECK(g.rho_c() == 1.0);
  CHECK(g.c0() == 1.0);
}

TEST_CASE("blend interior keeps D^2 r^2 positive for the cylinder") {
  const auto g = make_cylinder(2);
  CHECK(g.rho_c() > 0.0);
  CHECK(g.c0() == doctest::Approx(1.0));
  auto rep = certify_escape(g);
  CHECK(rep.worst_interior >= -1e-8);
}

TEST_CASE("sphere directions") {
  for (int n : {2, 3, 5}) {
    const auto d = sphere_directions(n, 16, 1);
    CHECK(d.size() == 16);
    for (const auto& v : d) CHECK(v.norm() == doctest::Approx(1.0));
  }
  const auto c = sphere_directions(2, 16);
  CHECK(c[4](1) == doctest::Approx(1.0));
}

TEST_CASE("tangent frames are orthonormal") {
  for (const auto& d : sphere_directions(5, 10, 4)) {
    const Vec x = 2.5 * d;
    const Mat F = tangent_frame(x);
    CHECK((F.transpose() * F - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((F.transpose() * x).cwiseAbs().maxCoeff() < 1e-12);
  }
}
