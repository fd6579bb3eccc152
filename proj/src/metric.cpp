#include "escape/metric.hpp"

#include <array>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "escape/errors.hpp"
#include "escape/quadrature.hpp"

namespace escape {

namespace {

constexpr double kDomainSlack = 1e-12;
constexpr double kAngularStep = 1e-5;

double fd_step(double r) { return 1e-5 * std::max(1.0, r); }

Mat identity(int n) { return Mat::Identity(n, n); }

// E(p) = p xhat^T + xhat p^T
Mat sym_outer(const Vec& p, const Vec& xhat) {
  return p * xhat.transpose() + xhat * p.transpose();
}

}  // namespace

namespace detail {

class Block {
 public:
  virtual ~Block() = default;
  virtual bool isotropic() const = 0;
  virtual bool finite_difference() const { return false; }
  virtual bool angular_dependent() const { return false; }

  virtual void phi(double /*r*/, double* /*f*/, double* /*fp*/) const {
    throw std::logic_error("phi requested from a non-isotropic block");
  }

  // Full n x n M and dM/dr; only P M P enters G.
  virtual void tangential(double r, const Vec& xhat, Mat* M, Mat* Mr) const {
    double f = 0.0, fp = 0.0;
    phi(r, &f, &fp);
    const int n = static_cast<int>(xhat.size());
    *M = f * identity(n);
    *Mr = fp * identity(n);
  }
};

namespace {

class ConstantBlock final : public Block {
 public:
  bool isotropic() const override { return true; }
  void phi(double, double* f, double* fp) const override {
    *f = 1.0;
    *fp = 0.0;
  }
};

class PowerBlock final : public Block {
 public:
  PowerBlock(double m1, double r_c) : e_(2.0 * (m1 - 1.0)), r_c_(r_c) {}
  bool isotropic() const override { return true; }
  void phi(double r, double* f, double* fp) const override {
    *f = std::pow(r / r_c_, e_);
    *fp = e_ * *f / r;
  }

 private:
  double e_, r_c_;
};

class ExpBlock final : public Block {
 public:
  ExpBlock(int n, double m2, double s2, double r_c) : c_(2.0 * m2 / (n - 1)), s2_(s2), r_c_(r_c) {}
  bool isotropic() const override { return true; }
  void phi(double r, double* f, double* fp) const override {
    const double I = (s2_ == 1.0)
                         ? std::log(r / r_c_)
                         : (std::pow(r, 1.0 - s2_) - std::pow(r_c_, 1.0 - s2_)) / (1.0 - s2_);
    *f = (r_c_ / r) * (r_c_ / r) * std::exp(c_ * I);
    *fp = *f * (-2.0 / r + c_ * std::pow(r, -s2_));
  }

 private:
  double c_, s2_, r_c_;
};

class CylinderBlock final : public Block {
 public:
  explicit CylinderBlock(double R0) : R0_(R0) {}
  bool isotropic() const override { return true; }
  void phi(double r, double* f, double* fp) const override {
    *f = (R0_ / r) * (R0_ / r);
    *fp = -2.0 * *f / r;
  }

 private:
  double R0_;
};

class TabulatedBlock final : public Block {
 public:
  TabulatedBlock(double r_start, double dr, const std::vector<double>& values)
      : spline_(values.begin(), values.end(), r_start, dr),
        lo_(r_start),
        hi_(r_start + dr * (values.size() - 1)) {
    f_lo_ = spline_(lo_);
    f_hi_ = spline_(hi_);
    p_lo_ = lo_ * spline_.prime(lo_) / f_lo_;
    p_hi_ = hi_ * spline_.prime(hi_) / f_hi_;
  }
  bool isotropic() const override { return true; }
  bool finite_difference() const override { return true; }
  void phi(double r, double* f, double* fp) const override {
    *f = value(r);
    const double h = fd_step(r);
    *fp = (value(r + h) - value(r - h)) / (2.0 * h);
  }

 private:
  double value(double r) const {
    if (r > hi_) return f_hi_ * std::pow(r / hi_, p_hi_);
    if (r < lo_) return f_lo_ * std::pow(r / lo_, p_lo_);
    return spline_(r);
  }

  boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
  double lo_, hi_;
  double f_lo_ = 1.0, f_hi_ = 1.0, p_lo_ = 0.0, p_hi_ = 0.0;
};

// Running integrals along one ray starting at r_c:
//   A(r) = int 2 alpha,   J(r) = int 2 e^{-A(y)} q(y) dy.
// Nodes every h; inside a cell both are completed with 10-point
// Gauss-Legendre so the result is smooth in r.
template <class T>
class RayIntegrals {
 public:
  RayIntegrals(std::function<double(double)> alpha, std::function<T(double)> q, T zero,
               double r_c, double h, bool adaptive_nodes)
      : alpha_(std::move(alpha)),
        q_(std::move(q)),
        zero_(zero),
        r_c_(r_c),
        h_(h),
        adaptive_(adaptive_nodes) {
    A_.push_back(0.0);
    J_.push_back(zero_);
  }

  void eval(double r, double* A, T* J) {
    std::size_t k = 0;
    if (r > r_c_) k = static_cast<std::size_t>(std::floor((r - r_c_) / h_));
    while (A_.size() <= k) extend();
    const double rk = r_c_ + h_ * static_cast<double>(k);
    *A = A_[k] + in_cell_A(k, rk, r);
    if (q_) {
      *J = J_[k] + in_cell_J(k, rk, r);
    } else {
      *J = zero_;
    }
  }

 private:
  double in_cell_A(std::size_t k, double rk, double y) const {
    (void)k;
    if (y == rk) return 0.0;
    return quad::gauss_legendre10([&](double s) { return 2.0 * alpha_(s); }, rk, y);
  }

  T in_cell_J(std::size_t k, double rk, double r) const {
    if (r == rk) return zero_;
    auto integrand = [&](double y) -> T {
      const double A = A_[k] + in_cell_A(k, rk, y);
      return T((2.0 * std::exp(-A)) * q_(y));
    };
    return quad::gauss_legendre10(integrand, rk, r);
  }

  void extend() {
    const std::size_t k = A_.size() - 1;
    const double a = r_c_ + h_ * static_cast<double>(k);
    const double b = a + h_;
    double dA = 0.0;
    T dJ = zero_;
    if (adaptive_) {
      dA = quad::adaptive_simpson([&](double s) { return 2.0 * alpha_(s); }, a, b, 1e-10);
      if (q_) {
        auto integrand = [&](double y) -> T {
          const double A = A_[k] + in_cell_A(k, a, y);
          return T((2.0 * std::exp(-A)) * q_(y));
        };
        dJ = quad::adaptive_simpson(integrand, a, b, 1e-10);
      }
    } else {
      dA = in_cell_A(k, a, b);
      if (q_) dJ = in_cell_J(k, a, b);
    }
    A_.push_back(A_[k] + dA);
    J_.push_back(T(J_[k] + dJ));
  }

  std::function<double(double)> alpha_;
  std::function<T(double)> q_;
  T zero_;
  double r_c_, h_;
  bool adaptive_;
  std::vector<double> A_;
  std::vector<T> J_;
};

class RadialConstructionBlock final : public Block {
 public:
  RadialConstructionBlock(Profile alpha, Profile q, double p_boundary, double r_c)
      : alpha_(alpha), q_(q), p_(p_boundary), table_(alpha, q, 0.0, r_c, r_c / 8.0, true) {}
  bool isotropic() const override { return true; }
  void phi(double r, double* f, double* fp) const override {
    double A = 0.0, J = 0.0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      table_.eval(r, &A, &J);
    }
    *f = std::exp(A) * (p_ + J);
    *fp = 2.0 * alpha_(r) * *f + (q_ ? 2.0 * q_(r) : 0.0);
  }

 private:
  Profile alpha_, q_;
  double p_;
  mutable std::mutex mu_;
  mutable RayIntegrals<double> table_;
};

class MatrixConstructionBlock final : public Block {
 public:
  MatrixConstructionBlock(ScalarField alpha, MatrixField q, MatrixField p_boundary, double r_c,
                          int n)
      : alpha_(std::move(alpha)), q_(std::move(q)), p_(std::move(p_boundary)), r_c_(r_c), n_(n) {}
  bool isotropic() const override { return false; }
  bool angular_dependent() const override { return true; }

  void tangential(double r, const Vec& xhat, Mat* M, Mat* Mr) const override {
    const Mat P = identity(n_) - xhat * xhat.transpose();
    double A = 0.0;
    Mat J = Mat::Zero(n_, n_);
    {
      std::lock_guard<std::mutex> lock(mu_);
      ray(xhat, P).eval(r, &A, &J);
    }
    const Mat B = p_ ? Mat(P * p_(r_c_, xhat) * P) : P;
    *M = std::exp(A) * (B + J);
    *Mr = 2.0 * alpha_(r, xhat) * *M;
    if (q_) *Mr += 2.0 * P * q_(r, xhat) * P;
  }

 private:
  using Key = std::array<double, kMaxDim>;

  RayIntegrals<Mat>& ray(const Vec& xhat, const Mat& P) const {
    Key key{};
    for (int i = 0; i < n_; ++i) key[i] = xhat(i);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 4096) cache_.clear();
    const Vec dir = xhat;
    std::function<Mat(double)> qfun;
    if (q_) {
      qfun = [q = q_, dir, P](double y) -> Mat { return P * q(y, dir) * P; };
    }
    auto afun = [a = alpha_, dir](double y) { return a(y, dir); };
    return cache_
        .emplace(key, RayIntegrals<Mat>(afun, qfun, Mat::Zero(n_, n_), r_c_, r_c_ / 8.0, false))
        .first->second;
  }

  ScalarField alpha_;
  MatrixField q_, p_;
  double r_c_;
  int n_;
  mutable std::mutex mu_;
  mutable std::map<Key, RayIntegrals<Mat>> cache_;
};

}  // namespace
}  // namespace detail

struct MetricField::Impl {
  int n = 2;
  double r_c = 1.0;
  Family family = Family::euclidean;
  Domain domain = Domain::full;
  std::map<std::string, double> params;
  ScalarField alpha;
  std::shared_ptr<const detail::Block> block;
  double phi_c = 1.0;  // isotropic phi(r_c), drives the interior blend
  double junction = 0.0;
  double rho_c = 0.0;
  double c0 = 0.0;

  bool interior(double r) const { return domain == Domain::full && r < r_c * (1.0 - kDomainSlack); }

  void iso(double r, double* f, double* fp) const { iso_on(r, interior(r), f, fp); }

  void iso_on(double r, bool inner, double* f, double* fp) const {
    if (inner) {
      const double c = (phi_c - 1.0) / (r_c * r_c);
      *f = 1.0 + c * r * r;
      *fp = 2.0 * c * r;
      return;
    }
    block->phi(r, f, fp);
  }

  // M, dM/dr on the branch selected by `inner`.
  void tangential(double r, const Vec& xhat, bool inner, Mat* M, Mat* Mr) const {
    if (block->isotropic()) {
      double f = 0.0, fp = 0.0;
      iso_on(r, inner, &f, &fp);
      *M = f * identity(n);
      *Mr = fp * identity(n);
      return;
    }
    if (inner) {
      *M = identity(n);
      *Mr = Mat::Zero(n, n);
      return;
    }
    block->tangential(r, xhat, M, Mr);
  }

  Mat G_branch(const Vec& x, bool inner) const {
    const double r = x.norm();
    if (r == 0.0) return identity(n);
    const Vec xhat = x / r;
    const Mat W = xhat * xhat.transpose();
    if (block->isotropic()) {
      double f = 0.0, fp = 0.0;
      iso_on(r, inner, &f, &fp);
      return f * identity(n) + (1.0 - f) * W;
    }
    const Mat P = identity(n) - W;
    Mat M, Mr;
    tangential(r, xhat, inner, &M, &Mr);
    return W + P * M * P;
  }
};

MetricField::MetricField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

int MetricField::dim() const { return impl_->n; }
double MetricField::r_c() const { return impl_->r_c; }
Family MetricField::family() const { return impl_->family; }
Domain MetricField::domain() const { return impl_->domain; }
const std::map<std::string, double>& MetricField::params() const { return impl_->params; }
double MetricField::param(const std::string& key) const {
  auto it = impl_->params.find(key);
  if (it == impl_->params.end()) throw ParameterError("metric has no parameter '" + key + "'");
  return it->second;
}
bool MetricField::isotropic() const { return impl_->block->isotropic(); }
bool MetricField::finite_difference() const { return impl_->block->finite_difference(); }
double MetricField::junction_radius() const { return impl_->junction; }
double MetricField::rho_c() const { return impl_->rho_c; }
double MetricField::c0() const { return impl_->c0; }

double MetricField::alpha(double r, const Vec& xhat) const { return impl_->alpha(r, xhat); }
double MetricField::alpha(const Vec& x) const {
  const double r = x.norm();
  return impl_->alpha(r, x / r);
}

MetricField MetricField::with_alpha(ScalarField alpha) const {
  auto copy = std::make_shared<Impl>(*impl_);
  copy->alpha = std::move(alpha);
  return MetricField(copy);
}

void MetricField::phi_raw(double r, double* phi, double* dphi) const {
  if (!isotropic()) throw std::logic_error("phi_raw on a non-isotropic metric");
  impl_->iso(r, phi, dphi);
}

Mat MetricField::G_raw(const Vec& x) const {
  return impl_->G_branch(x, impl_->interior(x.norm()));
}

Mat MetricField::dG_dr_raw(const Vec& x) const {
  const int n = impl_->n;
  const double r = x.norm();
  if (r == 0.0) return Mat::Zero(n, n);
  const Vec xhat = x / r;
  const Mat P = identity(n) - xhat * xhat.transpose();
  Mat M, Mr;
  impl_->tangential(r, xhat, impl_->interior(r), &M, &Mr);
  return P * Mr * P;
}

std::vector<Mat> MetricField::dG_dx_raw(const Vec& x) const {
  return dG_dx_on(x, impl_->interior(x.norm()));
}

std::vector<Mat> MetricField::dG_dx_on(const Vec& x, bool inner) const {
  const int n = impl_->n;
  const double r = x.norm();
  std::vector<Mat> d(n, Mat::Zero(n, n));
  if (r == 0.0) return d;
  if (impl_->domain == Domain::exterior) inner = false;

  if (finite_difference() && !inner) {
    const double h = fd_step(r);
    for (int l = 0; l < n; ++l) {
      Vec xp = x, xm = x;
      xp(l) += h;
      xm(l) -= h;
      d[l] = (impl_->G_branch(xp, inner) - impl_->G_branch(xm, inner)) / (2.0 * h);
    }
    return d;
  }

  const Vec xhat = x / r;
  const Mat P = identity(n) - xhat * xhat.transpose();
  if (isotropic()) {
    double f = 0.0, fp = 0.0;
    impl_->iso_on(r, inner, &f, &fp);
    for (int l = 0; l < n; ++l) {
      Vec p = -xhat(l) * xhat;
      p(l) += 1.0;
      d[l] = (xhat(l) * fp) * P + ((1.0 - f) / r) * sym_outer(p, xhat);
    }
    return d;
  }
  Mat M, Mr;
  impl_->tangential(r, xhat, inner, &M, &Mr);
  const Mat PMrP = P * Mr * P;
  const bool angular = !inner && impl_->block->angular_dependent();
  for (int l = 0; l < n; ++l) {
    Vec p = -xhat(l) * xhat;
    p(l) += 1.0;
    const Mat E = sym_outer(p, xhat);
    Mat D = E - E * M * P - P * M * E;
    if (angular) {
      const double len = p.norm();
      if (len > 1e-14) {
        const Vec u = p / len;
        const Vec xp = (xhat + kAngularStep * u).normalized();
        const Vec xm = (xhat - kAngularStep * u).normalized();
        Mat Mp, Mm, tmp;
        impl_->tangential(r, xp, false, &Mp, &tmp);
        impl_->tangential(r, xm, false, &Mm, &tmp);
        // normalization shrinks the step to atan(eps)
        const double arc = 2.0 * std::atan(kAngularStep);
        D += P * ((Mp - Mm) * (len / arc)) * P;
      }
    }
    d[l] = xhat(l) * PMrP + D / r;
  }
  return d;
}

Vec MetricField::acceleration_raw(const Vec& x, const Vec& v) const {
  return acceleration_on(x, v, impl_->interior(x.norm()));
}

Vec MetricField::acceleration_on(const Vec& x, const Vec& v, bool inner) const {
  const int n = impl_->n;
  const double r = x.norm();
  if (r == 0.0) return Vec::Zero(n);
  if (impl_->domain == Domain::exterior) inner = false;
  if (isotropic()) {
    double f = 0.0, fp = 0.0;
    impl_->iso_on(r, inner, &f, &fp);
    const Vec xhat = x / r;
    const double s = xhat.dot(v);
    const Vec vT = v - s * xhat;
    const double vt2 = vT.squaredNorm();
    return xhat * (vt2 * (0.5 * fp - (1.0 - f) / r)) - (fp * s / f) * vT;
  }
  const std::vector<Mat> d = dG_dx_on(x, inner);
  Vec w = Vec::Zero(n);
  Vec b(n);
  for (int l = 0; l < n; ++l) {
    w += v(l) * (d[l] * v);
    b(l) = v.dot(d[l] * v);
  }
  w -= 0.5 * b;
  return -impl_->G_branch(x, inner).ldlt().solve(w);
}

// ---------------------------------------------------------------- families

const char* family_name(Family f) {
  switch (f) {
    case Family::euclidean: return "euclidean";
    case Family::radial_power: return "radial_power";
    case Family::radial_exp: return "radial_exp";
    case Family::cylinder: return "cylinder";
    case Family::prop21_general: return "prop21_general";
    case Family::prop22_exterior: return "prop22_exterior";
    case Family::tabulated: return "tabulated";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::euclidean, Family::radial_power, Family::radial_exp, Family::cylinder,
                   Family::prop21_general, Family::prop22_exterior, Family::tabulated}) {
    if (name == family_name(f)) return f;
  }
  throw ParameterError("unknown metric family '" + name + "'");
}

namespace {

void check_common(int dim, double r_c) {
  if (dim < 2 || dim > kMaxDim) {
    throw ParameterError("dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
  }
  if (!(r_c > 0.0) || !std::isfinite(r_c)) throw ParameterError("r_c must be positive");
}

// rho_c and c0 from interior samples; exact values when G = I inside.
void finish(MetricField::Impl& impl) {
  if (impl.domain == Domain::exterior) {
    impl.rho_c = 0.0;
    impl.c0 = 0.0;
    impl.junction = 0.0;
    return;
  }
  const bool identity_inside =
      !impl.block->isotropic() || std::abs(impl.phi_c - 1.0) <= 1e-14;
  const bool flat = impl.family == Family::euclidean;
  impl.junction = flat ? 0.0 : impl.r_c;
  if (identity_inside) {
    impl.rho_c = 1.0;
    impl.c0 = impl.r_c;
    return;
  }
  // Blend interior: sample D^2 r^2 against G.
  auto shared = std::make_shared<MetricField::Impl>(impl);
  MetricField g(shared);
  double lam = std::numeric_limits<double>::infinity();
  double c0 = 0.0;
  const auto dirs = sphere_directions(impl.n, 16, 7);
  for (int k = 0; k <= 8; ++k) {
    const double r = impl.r_c * (k + 0.5) / 9.0;
    for (const Vec& d : dirs) {
      const Vec x = r * d;
      const Mat G = g.G_raw(x);
      lam = std::min(lam, min_generalized_eigenvalue(hessian_r2(g, x), G));
      c0 = std::max(c0, r * std::sqrt(d.dot(G.ldlt().solve(d))));
    }
  }
  for (const Vec& d : dirs) {
    const Mat G = g.G_raw(impl.r_c * d);
    c0 = std::max(c0, impl.r_c * std::sqrt(d.dot(G.ldlt().solve(d))));
  }
  impl.rho_c = 0.5 * lam;
  impl.c0 = c0;
}

MetricField assemble(std::shared_ptr<MetricField::Impl> impl) {
  if (impl->block->isotropic()) {
    double f = 1.0, fp = 0.0;
    impl->block->phi(impl->r_c, &f, &fp);
    impl->phi_c = f;
  }
  finish(*impl);
  return MetricField(impl);
}

void check_alpha(const ScalarField& alpha, double r_c, int dim) {
  const auto dirs = sphere_directions(dim, 32, 11);
  for (int k = 0; k < 64; ++k) {
    const double r = r_c * (1.0 + 9.0 * k / 63.0);
    for (const Vec& d : dirs) {
      const double a = alpha(r, d);
      if (!std::isfinite(a) || r * a + 1.0 < -1e-12) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "alpha violates alpha > -1/r at r = %.6g (r*alpha + 1 = %.3e)",
                      r, r * a + 1.0);
        throw ParameterError(buf);
      }
    }
  }
}

std::shared_ptr<MetricField::Impl> base(int dim, double r_c, Family f, Domain d) {
  check_common(dim, r_c);
  auto impl = std::make_shared<MetricField::Impl>();
  impl->n = dim;
  impl->r_c = r_c;
  impl->family = f;
  impl->domain = d;
  return impl;
}

}  // namespace

MetricField make_euclidean(int dim) {
  auto impl = base(dim, 1.0, Family::euclidean, Domain::full);
  impl->alpha = [](double, const Vec&) { return 0.0; };
  impl->block = std::make_shared<detail::ConstantBlock>();
  return assemble(impl);
}

MetricField make_radial_power(int dim, double m1, double r_c, Domain d) {
  if (!std::isfinite(m1)) throw ParameterError("m1 must be finite");
  auto impl = base(dim, r_c, Family::radial_power, d);
  impl->params = {{"m1", m1}};
  impl->alpha = [m1](double r, const Vec&) { return (m1 - 1.0) / r; };
  impl->block = std::make_shared<detail::PowerBlock>(m1, r_c);
  return assemble(impl);
}

MetricField make_radial_exp(int dim, double m1, double m2, double s1, double s2, double r_c,
                            Domain d) {
  for (double v : {m1, m2, s1, s2}) {
    if (!std::isfinite(v)) throw ParameterError("radial_exp parameters must be finite");
  }
  auto impl = base(dim, r_c, Family::radial_exp, d);
  impl->params = {{"m1", m1}, {"m2", m2}, {"s1", s1}, {"s2", s2}};
  impl->alpha = [m1, s1](double r, const Vec&) { return m1 * std::pow(r, -s1) - 1.0 / r; };
  impl->block = std::make_shared<detail::ExpBlock>(dim, m2, s2, r_c);
  return assemble(impl);
}

MetricField make_cylinder(int dim, double R0, double r_c, Domain d) {
  if (!(R0 > 0.0)) throw ParameterError("R0 must be positive");
  auto impl = base(dim, r_c, Family::cylinder, d);
  impl->params = {{"R0", R0}};
  impl->alpha = [](double r, const Vec&) { return -1.0 / r; };
  impl->block = std::make_shared<detail::CylinderBlock>(R0);
  return assemble(impl);
}

MetricField make_tabulated(int dim, double r_start, double dr, std::vector<double> phi, double r_c,
                           Domain d) {
  if (phi.size() < 5) throw ParameterError("tabulated metric needs at least 5 samples");
  if (!(dr > 0.0) || !(r_start > 0.0)) throw ParameterError("tabulated grid must be positive");
  if (r_start > r_c) throw ParameterError("tabulated grid must start at or below r_c");
  for (double v : phi) {
    if (!(v > 0.0)) throw NonPositiveDefinite("tabulated tangential factor must be positive");
  }
  auto impl = base(dim, r_c, Family::tabulated, d);
  impl->params = {{"r_start", r_start}, {"dr", dr}, {"count", static_cast<double>(phi.size())}};
  auto block = std::make_shared<detail::TabulatedBlock>(r_start, dr, phi);
  impl->block = block;
  impl->alpha = [block](double r, const Vec&) {
    double f = 0.0, fp = 0.0;
    block->phi(r, &f, &fp);
    return 0.5 * fp / f;
  };
  return assemble(impl);
}

MetricField build_escape_metric(ScalarField alpha, MatrixField Q, double r_c, int dim) {
  check_common(dim, r_c);
  check_alpha(alpha, r_c, dim);
  auto impl = base(dim, r_c, Family::prop21_general, Domain::full);
  impl->alpha = alpha;
  impl->block = std::make_shared<detail::MatrixConstructionBlock>(alpha, Q, nullptr, r_c, dim);
  return assemble(impl);
}

MetricField build_exterior_escape_metric(ScalarField alpha, MatrixField Q, MatrixField P_boundary,
                                         double r_c, int dim) {
  check_common(dim, r_c);
  check_alpha(alpha, r_c, dim);
  auto impl = base(dim, r_c, Family::prop22_exterior, Domain::exterior);
  impl->alpha = alpha;
  impl->block =
      std::make_shared<detail::MatrixConstructionBlock>(alpha, Q, std::move(P_boundary), r_c, dim);
  return assemble(impl);
}

MetricField build_escape_metric_radial(Profile alpha, Profile q, double r_c, int dim) {
  check_common(dim, r_c);
  ScalarField a = [alpha](double r, const Vec&) { return alpha(r); };
  check_alpha(a, r_c, dim);
  auto impl = base(dim, r_c, Family::prop21_general, Domain::full);
  impl->alpha = a;
  impl->block = std::make_shared<detail::RadialConstructionBlock>(alpha, q, 1.0, r_c);
  return assemble(impl);
}

MetricField build_exterior_escape_metric_radial(Profile alpha, Profile q, double p_boundary,
                                                double r_c, int dim) {
  check_common(dim, r_c);
  if (!(p_boundary > 0.0)) throw ParameterError("boundary factor must be positive");
  ScalarField a = [alpha](double r, const Vec&) { return alpha(r); };
  check_alpha(a, r_c, dim);
  auto impl = base(dim, r_c, Family::prop22_exterior, Domain::exterior);
  impl->params = {{"p_boundary", p_boundary}};
  impl->alpha = a;
  impl->block = std::make_shared<detail::RadialConstructionBlock>(alpha, q, p_boundary, r_c);
  return assemble(impl);
}

// ------------------------------------------------------------ checked ops

namespace {

void require_dim(const MetricField& g, const Vec& x) {
  if (x.size() != g.dim()) throw DomainError("point has the wrong dimension");
}

void require_domain(const MetricField& g, const Vec& x) {
  require_dim(g, x);
  if (g.exterior() && x.norm() < g.r_c() * (1.0 - kDomainSlack)) {
    throw DomainError("point lies inside r_c of an exterior metric");
  }
}

void require_outer(const MetricField& g, const Vec& x) {
  require_dim(g, x);
  if (x.norm() < g.r_c() * (1.0 - kDomainSlack)) {
    throw DomainError("quantity is only defined for |x| >= r_c");
  }
}

Mat checked_G(const MetricField& g, const Vec& x) {
  Mat G = g.G_raw(x);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success || !G.allFinite()) {
    throw NonPositiveDefinite("G is not positive definite at |x| = " + std::to_string(x.norm()));
  }
  return G;
}

std::vector<Mat> gamma_from(const Mat& G, const std::vector<Mat>& d) {
  const int n = static_cast<int>(G.rows());
  const Mat Ginv = G.inverse();
  std::vector<Mat> C(n, Mat::Zero(n, n));
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        C[l](i, j) = 0.5 * (d[i](l, j) + d[j](l, i) - d[l](i, j));
      }
    }
  }
  std::vector<Mat> gamma(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) gamma[k] += Ginv(k, l) * C[l];
  }
  return gamma;
}

}  // namespace

Mat evaluate_G(const MetricField& g, const Vec& x) {
  require_domain(g, x);
  return checked_G(g, x);
}

Mat evaluate_dG_dr(const MetricField& g, const Vec& x) {
  require_outer(g, x);
  if (g.finite_difference()) {
    const double r = x.norm();
    const double h = fd_step(r);
    const Vec xhat = x / r;
    return (g.G_raw((r + h) * xhat) - g.G_raw((r - h) * xhat)) / (2.0 * h);
  }
  return g.dG_dr_raw(x);
}

std::vector<Mat> christoffel(const MetricField& g, const Vec& x) {
  require_domain(g, x);
  return gamma_from(checked_G(g, x), g.dG_dx_raw(x));
}

Vec contract(const std::vector<Mat>& gamma, const Vec& v, const Vec& w) {
  Vec out(static_cast<int>(gamma.size()));
  for (std::size_t k = 0; k < gamma.size(); ++k) out(static_cast<int>(k)) = v.dot(gamma[k] * w);
  return out;
}

double FormulaCheck::relative_gap() const {
  if (closed_form == from_christoffel) return 0.0;
  const double denom = std::max({std::abs(closed_form), std::abs(from_christoffel), scale});
  return std::abs(closed_form - from_christoffel) / denom;
}

namespace {

double hessian_from_gamma(const std::vector<Mat>& gamma, const Vec& xhat, double r, const Vec& X) {
  // X^i X^j ((delta_ij - xhat_i xhat_j)/r - Gamma^k_ij xhat_k)
  const double flat = (X.squaredNorm() - std::pow(xhat.dot(X), 2)) / r;
  double curved = 0.0;
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    curved += xhat(static_cast<int>(k)) * X.dot(gamma[k] * X);
  }
  return flat - curved;
}

}  // namespace

FormulaCheck hessian_r(const MetricField& g, const Vec& x, const Vec& X) {
  require_outer(g, x);
  require_domain(g, x);
  const double r = x.norm();
  const Vec xhat = x / r;
  if (X.size() != g.dim()) throw NotTangent("vector has the wrong dimension");
  if (std::abs(xhat.dot(X)) > 1e-9 * std::max(1.0, X.norm())) {
    throw NotTangent("vector is not tangent to the sphere through x");
  }
  const Mat G = checked_G(g, x);
  const Mat dG = evaluate_dG_dr(g, x);
  FormulaCheck out;
  out.closed_form = 0.5 * X.dot(dG * X) + X.dot(G * X) / r;
  out.scale = X.dot(G * X) / r;
  out.from_christoffel = hessian_from_gamma(christoffel(g, x), xhat, r, X);
  return out;
}

FormulaCheck laplacian_r(const MetricField& g, const Vec& x) {
  require_outer(g, x);
  require_domain(g, x);
  const int n = g.dim();
  const double r = x.norm();
  const Vec xhat = x / r;
  const Mat G = checked_G(g, x);
  const Mat dG = evaluate_dG_dr(g, x);
  const Mat F = tangent_frame(x);
  const Mat T = F.transpose() * G * F;
  const Mat B = F.transpose() * dG * F;
  FormulaCheck out;
  out.closed_form = (n - 1) / r + 0.5 * T.ldlt().solve(B).trace();
  out.scale = (n - 1) / r;

  // g-orthonormal tangential frame: F T^{-1/2}
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  const Mat E = F * es.eigenvectors() *
                es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const auto gamma = christoffel(g, x);
  double sum = 0.0;
  for (int a = 0; a < n - 1; ++a) sum += hessian_from_gamma(gamma, xhat, r, E.col(a));
  out.from_christoffel = sum;
  return out;
}

Mat hessian_r2(const MetricField& g, const Vec& x) {
  const int n = g.dim();
  const auto gamma = christoffel(g, x);
  Mat H = 2.0 * identity(n);
  for (int k = 0; k < n; ++k) H -= 2.0 * x(k) * gamma[k];
  return 0.5 * (H + H.transpose());
}

}  // namespace escape
