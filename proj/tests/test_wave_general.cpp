#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "escape/errors.hpp"
#include "escape/wave_general.hpp"
#include "escape/wave_radial.hpp"

using namespace escape;

namespace {

std::vector<double> random_interior(const PolarGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> u(g.size(), 0.0);
  for (int i = 1; i < g.N_r; ++i)
    for (int j = 0; j < g.N_theta; ++j) u[g.idx(i, j)] = d(rng);
  return u;
}

// max |L u - exact| over the interior for a sampled function
template <class F, class E>
double operator_error(const PolarGrid& g, const F& f, const E& exact) {
  std::vector<double> u(g.size()), out;
  for (int i = 0; i <= g.N_r; ++i)
    for (int j = 0; j < g.N_theta; ++j) u[g.idx(i, j)] = f(g.r(i), g.theta(j));
  laplace_beltrami_apply(g, u, out);
  double err = 0.0;
  for (int i = 1; i < g.N_r; ++i)
    for (int j = 0; j < g.N_theta; ++j)
      err = std::max(err, std::abs(out[g.idx(i, j)] - exact(g.r(i), g.theta(j))));
  return err;
}

GeneralConfig small_config() {
  GeneralConfig c;
  c.T = 6.0;
  c.N_r = 96;
  c.N_theta = 32;
  return c;
}

}  // namespace

TEST_CASE("polar grid construction") {
  const auto g = make_radial_power(2, 2.0, 1.0, Domain::exterior);
  const auto grid = make_polar_grid(g, 1.0, 5.0, 40, 16);
  CHECK(grid.theta_independent);
  CHECK(grid.size() == 41u * 16u);
  for (int i : {0, 7, 40}) {
    const double r = grid.r(i);
    CHECK(grid.sqrt_gamma[grid.idx(i, 3)] == doctest::Approx(r * r).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_polar_grid(make_euclidean(3), 1.0, 5.0, 40, 16), ParameterError);
  CHECK_THROWS_AS(make_polar_grid(g, 0.5, 5.0, 40, 16), DomainError);
  CHECK_THROWS_AS(make_polar_grid(g, 1.0, 5.0, 2, 16), ConfigError);
  CHECK_THROWS_AS(make_polar_grid(g, 1.0, 0.5, 40, 16), ConfigError);
}

TEST_CASE("discrete Laplace-Beltrami is self-adjoint and kills constants") {
  for (const auto& g : {make_radial_power(2, 2.0, 1.0, Domain::exterior), make_cylinder(2)}) {
    const auto grid = make_polar_grid(g, 1.5, 9.0, 48, 24);
    const auto u = random_interior(grid, 1), v = random_interior(grid, 2);
    std::vector<double> Lu, Lv;
    laplace_beltrami_apply(grid, u, Lu);
    laplace_beltrami_apply(grid, v, Lv);
    const double a = weighted_inner(grid, Lu, v), b = weighted_inner(grid, u, Lv);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
    // negative definite
    CHECK(weighted_inner(grid, Lu, u) < 0.0);

    std::vector<double> c(grid.size(), 3.0), Lc;
    laplace_beltrami_apply(grid, c, Lc);
    for (double x : Lc) CHECK(std::abs(x) <= 1e-10);
  }
}

TEST_CASE("Euclidean operator converges at second order") {
  const auto g = make_euclidean(2);
  auto err = [&](int n) {
    const auto grid = make_polar_grid(g, 1.0, 3.0, n, 4 * n);
    // harmonic function and r^2 (Laplacian 4)
    const double e1 = operator_error(
        grid, [](double r, double th) { return r * std::cos(th) + 1.0 / r * std::sin(th); },
        [](double, double) { return 0.0; });
    const double e2 =
        operator_error(grid, [](double r, double) { return r * r; }, [](double, double) { return 4.0; });
    return std::max(e1, e2);
  };
  const double coarse = err(64), fine = err(128);
  CHECK(fine < 1e-3);
  CHECK(coarse / fine >= 3.5);
}

TEST_CASE("radial functions see the Laplacian of r") {
  // for u = f(r), Delta u = f'' + (Delta r) f'
  const auto g = make_radial_power(2, 2.5, 1.0, Domain::exterior);
  auto err = [&](int n) {
    const auto grid = make_polar_grid(g, 1.0, 3.0, n, 8);
    return operator_error(
        grid, [](double r, double) { return std::sin(r); },
        [&](double r, double th) {
          Vec x(2);
          x << r * std::cos(th), r * std::sin(th);
          return -std::sin(r) + laplacian_r(g, x).closed_form * std::cos(r);
        });
  };
  const double coarse = err(64), fine = err(128);
  CHECK(coarse / fine >= 3.5);
  CHECK(coarse / fine <= 4.5);
}

TEST_CASE("step_wave: CFL, zero data and the boundary rows") {
  const auto g = make_radial_power(2, 2.0, 1.0, Domain::exterior);
  const auto grid = make_polar_grid(g, 1.0, 10.0, 64, 16);
  auto f = zero_field(grid);
  const double dt = max_stable_dt(grid);
  CHECK_THROWS_AS(step_wave(f, grid, 1.01 * dt), CFLViolation);
  CHECK_THROWS_AS(step_wave(f, grid, 0.0), CFLViolation);
  for (int k = 0; k < 20; ++k) step_wave(f, grid, dt);
  for (double v : f.u) CHECK(v == 0.0);
  CHECK(f.t == doctest::Approx(20 * dt));

  GeneralConfig c;
  c.N_r = 64;
  c.N_theta = 16;
  c.R_max = 10.0;
  c.T = 6.0;
  auto h = initial_field(grid, c);
  for (int k = 0; k < 50; ++k) {
    step_wave(h, grid, dt);
    for (int j = 0; j < grid.N_theta; ++j) {
      CHECK(h.u[grid.idx(0, j)] == 0.0);
      CHECK(h.u[grid.idx(grid.N_r, j)] == 0.0);
    }
  }
}

TEST_CASE("energy is conserved and finite speed holds") {
  const auto g = make_radial_power(2, 2.0, 1.0, Domain::exterior);
  auto c = small_config();
  c.N_r = 512;
  c.N_theta = 64;
  const auto run = run_general(g, c);
  CHECK(run.max_energy_drift <= 1e-3);
  CHECK(run.max_precursor <= 1e-10);
  CHECK(run.S_monotone);
  CHECK(run.records.front().t == 0.0);
  CHECK(run.records.back().t == doctest::Approx(c.T));
  CHECK(run.records.front().E_local == doctest::Approx(run.records.front().E_total));
  for (std::size_t k = 1; k < run.records.size(); ++k) {
    CHECK(run.records[k].S >= run.records[k - 1].S);
  }
}

TEST_CASE("isotropic metrics commute with grid rotations") {
  const auto g = make_radial_power(2, 1.5, 1.0, Domain::exterior);
  auto c = small_config();
  c.T = 3.0;
  const auto grid = make_polar_grid(g, c.r0, c.outer(), c.N_r, c.N_theta);
  const int shift = 5;
  auto f = initial_field(grid, c);
  auto h = zero_field(grid);
  for (int i = 0; i <= grid.N_r; ++i)
    for (int j = 0; j < grid.N_theta; ++j)
      h.u[grid.idx(i, (j + shift) % grid.N_theta)] = f.u[grid.idx(i, j)];
  const double dt = 0.5 * max_stable_dt(grid);
  for (int k = 0; k < 100; ++k) {
    step_wave(f, grid, dt);
    step_wave(h, grid, dt);
  }
  double diff = 0.0;
  for (int i = 0; i <= grid.N_r; ++i)
    for (int j = 0; j < grid.N_theta; ++j)
      diff = std::max(diff, std::abs(h.u[grid.idx(i, (j + shift) % grid.N_theta)] -
                                     f.u[grid.idx(i, j)]));
  CHECK(diff <= 1e-10);
}

TEST_CASE("Euclidean radial data agree with the m = 1 radial solver") {
  auto diff_at = [](int N) {
    GeneralConfig c;
    c.T = 5.0;
    c.N_r = N;
    c.N_theta = 8;
    c.R_max = 12.0;
    c.angular = false;
    c.cfl = 1.0;
    const auto run = run_general(make_euclidean(2), c);

    RadialConfig rc;
    rc.m = 1.0;
    rc.T = c.T;
    rc.N = N;
    rc.R_max = c.R_max;
    rc.cfl = 0.2;
    const auto rr = run_radial(rc);
    double d = 0.0;
    for (int i = 0; i <= N; ++i) {
      d = std::max(d, std::abs(run.final_field.u[run.grid.idx(i, 3)] - rr.final_state.u[i]));
    }
    return d;
  };
  const double coarse = diff_at(256), fine = diff_at(512);
  CHECK(fine <= 1e-3);
  CHECK(coarse / fine >= 3.0);
}

TEST_CASE("integration by parts of u u_r against the volume form") {
  // int u u_r dx_g = -1/2 int u^2 (Delta r) dx_g, and Delta r = m1 / r here
  const double m1 = 2.0;
  const auto g = make_radial_power(2, m1, 1.0, Domain::exterior);
  auto residual = [&](int n) {
    const auto grid = make_polar_grid(g, 1.0, 5.0, n, 16);
    double lhs = 0.0, rhs = 0.0;
    for (int i = 1; i < grid.N_r; ++i) {
      const double r = grid.r(i);
      for (int j = 0; j < grid.N_theta; ++j) {
        const double th = grid.theta(j);
        auto u = [&](double s) { return radial_bump(s, 1.5, 4.0) * (1.0 + 0.5 * std::cos(th)); };
        const double ur = (u(r + grid.dr) - u(r - grid.dr)) / (2.0 * grid.dr);
        const double w = grid.sqrt_gamma[grid.idx(i, j)] * grid.dr * grid.dtheta;
        lhs += u(r) * ur * w;
        rhs += m1 / (2.0 * r) * u(r) * u(r) * w;
      }
    }
    return std::abs(lhs + rhs) / rhs;
  };
  const double coarse = residual(128), fine = residual(256);
  CAPTURE(coarse);
  CHECK(fine <= 1e-3);
  CHECK(coarse / fine >= 3.5);
}

TEST_CASE("hypothesis gates") {
  CHECK_THROWS_AS(uniform_decay_experiment(0.4, small_config()), HypothesisViolation);
  CHECK_THROWS_AS(uniform_decay_experiment(0.5, small_config()), HypothesisViolation);

  CHECK(decay_hypothesis_violation(DecayHypotheses{}).empty());
  DecayHypotheses p;
  p.m2 = 1.5;
  const auto msg = decay_hypothesis_violation(p);
  CHECK(msg.find("(s2 + 1) r0^(s2 - 1) < m2") != std::string::npos);
  CHECK_THROWS_AS(spacetime_bound_experiment(p, small_config()), HypothesisViolation);

  p = DecayHypotheses{};
  p.s1 = 1.0;
  CHECK(decay_hypothesis_violation(p).find("s1 > 1") == 0);
  p = DecayHypotheses{};
  p.s2 = 1.5;
  CHECK(decay_hypothesis_violation(p).find("0 < s2 <= 1") == 0);
  p = DecayHypotheses{};
  p.m1 = 10.0;
  CHECK(decay_hypothesis_violation(p).find("m2 >= (n - 1) m1") == 0);
}

TEST_CASE("uniform decay report on a short window") {
  auto c = small_config();
  c.T = 12.0;
  const auto rep = uniform_decay_experiment(2.0, c, 4.0);
  CHECK(rep.a == doctest::Approx(8.0));
  CHECK(rep.t.front() >= 4.0);
  CHECK(rep.mid_max > 0.0);
  for (std::size_t k = 1; k < rep.running_max.size(); ++k)
    CHECK(rep.running_max[k] >= rep.running_max[k - 1]);
  CHECK(rep.report().find("experiment: uniform_decay") == 0);
}

TEST_CASE("spacetime statistics") {
  auto c = small_config();
  const auto rep = spacetime_bound_experiment(DecayHypotheses{}, c);
  CHECK(rep.hypotheses_checked);
  CHECK(rep.total > 0.0);
  CHECK(rep.last_quarter_increase >= 0.0);
  CHECK(rep.last_quarter_increase <= 1.0);
  CHECK(rep.S_over_E0.back() == doctest::Approx(rep.total));
}

TEST_CASE("multiplier identity: zero field and a 1D evaluation") {
  const double m1 = 2.0;
  const auto g = make_radial_power(2, m1, 1.0, Domain::exterior);
  auto c = small_config();
  c.T = 4.0;
  c.angular = false;

  {
    const auto grid = make_polar_grid(g, c.r0, c.outer(), c.N_r, c.N_theta);
    std::vector<WaveField> hist(3, zero_field(grid));
    for (int k = 0; k < 3; ++k) hist[k].t = k;
    const auto z = morawetz_residual(hist, grid, g, 5.0);
    CHECK(z.lhs() == 0.0);
    CHECK(z.rhs() == 0.0);
  }

  std::vector<WaveField> hist;
  const auto run = run_general(g, c, [&](const WaveField& f, long k, bool last) {
    if (k % 10 == 0 || last) hist.push_back(f);
  });
  const auto& grid = run.grid;
  const auto terms = morawetz_residual(hist, grid, g, 5.0);
  CHECK(terms.a == doctest::Approx(5.0).epsilon(0.02));

  // theta-constant data: every term is 2 pi times a radial integral with
  // sqrt(gamma) = r^m1, h = r, div H = 1 + m1
  const int ia = static_cast<int>(std::lround((terms.a - grid.r0) / grid.dr));
  const double two_pi = 2.0 * M_PI;
  std::vector<double> t, flux, ben, dh, kin, grad;
  double X0 = 0.0, XT = 0.0;
  for (std::size_t s = 0; s < hist.size(); ++s) {
    std::vector<double> u(grid.N_r + 1), ut(grid.N_r + 1);
    for (int i = 0; i <= grid.N_r; ++i) {
      u[i] = hist[s].u[grid.idx(i, 0)];
      ut[i] = hist[s].ut[grid.idx(i, 0)];
    }
    auto ur = [&](int i) {
      return i == 0 ? (-3 * u[0] + 4 * u[1] - u[2]) / (2 * grid.dr)
                    : (u[i + 1] - u[i - 1]) / (2 * grid.dr);
    };
    double x = 0, d = 0, k2 = 0, g2 = 0;
    for (int i = 0; i <= ia; ++i) {
      const double r = grid.r(i);
      const double w = (i == 0 || i == ia ? 0.5 : 1.0) * std::pow(r, m1) * grid.dr * two_pi;
      x += ut[i] * r * ur(i) * w;
      d += ur(i) * ur(i) * w;
      k2 += 0.5 * ut[i] * ut[i] * (1 + m1) * w;
      g2 += -0.5 * ur(i) * ur(i) * (1 + m1) * w;
    }
    const double r0 = grid.r(0), ra = grid.r(ia);
    const double L0 = std::pow(r0, m1) * two_pi, La = std::pow(ra, m1) * two_pi;
    flux.push_back(-ur(0) * r0 * ur(0) * L0 + ur(ia) * ra * ur(ia) * La);
    ben.push_back(-0.5 * (ut[0] * ut[0] - ur(0) * ur(0)) * r0 * L0 +
                  0.5 * (ut[ia] * ut[ia] - ur(ia) * ur(ia)) * ra * La);
    dh.push_back(d);
    kin.push_back(k2);
    grad.push_back(g2);
    t.push_back(hist[s].t);
    if (s == 0) X0 = x;
    XT = x;
  }
  auto trap = [&](const std::vector<double>& y) {
    double acc = 0;
    for (std::size_t k = 1; k < t.size(); ++k) acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
    return acc;
  };
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)); };
  CHECK(close(terms.boundary_flux, trap(flux)));
  CHECK(close(terms.boundary_energy, trap(ben)));
  CHECK(close(terms.DH, trap(dh)));
  CHECK(close(terms.div_kinetic, trap(kin)));
  CHECK(close(terms.div_gradient, trap(grad)));
  CHECK(close(terms.X_0, X0));
  CHECK(close(terms.X_T, XT));
}

TEST_CASE("multiplier identity residual shrinks under refinement") {
  const auto g = make_radial_power(2, 2.0, 1.0, Domain::exterior);
  GeneralConfig c;
  c.T = 4.0;
  c.N_r = 64;
  c.N_theta = 16;
  const auto study = morawetz_refinement(g, c, 5.0, 3);
  REQUIRE(study.ratios.size() == 2);
  CAPTURE(study.terms[0].residual());
  CAPTURE(study.terms[2].residual());
  CHECK(study.ratios[1] >= 1.8);
  CHECK(std::abs(study.terms[2].residual()) < 2e-2 * std::abs(study.terms[2].DH));
}

TEST_CASE("snapshot round trip") {
  const auto g = make_euclidean(2);
  const auto grid = make_polar_grid(g, 1.0, 4.0, 12, 8);
  auto c = small_config();
  auto f = initial_field(grid, c);
  f.t = 0.125;
  std::stringstream ss;
  write_snapshot(ss, grid, f);
  const auto s = read_snapshot(ss);
  CHECK(s.N_r == 12);
  CHECK(s.N_theta == 8);
  CHECK(s.t == 0.125);
  CHECK(s.R_max == 4.0);
  REQUIRE(s.u.size() == f.u.size());
  for (std::size_t k = 0; k < s.u.size(); ++k) CHECK(s.u[k] == f.u[k]);

  std::stringstream bad("# polar snapshot\nN_r 2\n");
  CHECK_THROWS_AS(read_snapshot(bad), ConfigError);
  std::stringstream none("hello\n");
  CHECK_THROWS_AS(read_snapshot(none), ConfigError);
}

TEST_CASE("general config validation") {
  GeneralConfig c;
  CHECK_NOTHROW(c.validate());
  c.R_max = 20.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneralConfig{};
  c.cfl = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneralConfig{};
  c.a = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneralConfig{};
  c.N_theta = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
