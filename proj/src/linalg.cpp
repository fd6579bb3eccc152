#include "escape/linalg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace escape {

Mat tangent_frame(const Vec& x) {
  const int n = static_cast<int>(x.size());
  const double r = x.norm();
  if (r == 0.0) throw std::invalid_argument("tangent_frame: x = 0");
  const Vec xhat = x / r;

  // Gram-Schmidt against xhat over the coordinate axes, skipping the axis
  // most aligned with xhat so the projections never degenerate.
  int skip = 0;
  xhat.cwiseAbs().maxCoeff(&skip);

  Mat F(n, n - 1);
  int col = 0;
  for (int axis = 0; axis < n && col < n - 1; ++axis) {
    if (axis == skip) continue;
    Vec e = Vec::Zero(n);
    e(axis) = 1.0;
    e -= xhat.dot(e) * xhat;
    for (int k = 0; k < col; ++k) e -= F.col(k).dot(e) * F.col(k);
    // second pass keeps orthogonality at the 1e-15 level
    e -= xhat.dot(e) * xhat;
    for (int k = 0; k < col; ++k) e -= F.col(k).dot(e) * F.col(k);
    F.col(col++) = e / e.norm();
  }
  return F;
}

Mat radial_projector(const Vec& x) {
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) throw std::invalid_argument("radial_projector: x = 0");
  return (x * x.transpose()) / r2;
}

double min_generalized_eigenvalue(const Mat& B, const Mat& T) {
  if (B.rows() == 1) return B(0, 0) / T(0, 0);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(B, T, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("generalized eigenproblem failed (T not positive definite?)");
  }
  return solver.eigenvalues().minCoeff();
}

std::vector<Vec> sphere_directions(int dim, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(count);
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * M_PI * k / count;
      Vec d(2);
      d << std::cos(a), std::sin(a);
      out.push_back(d);
    }
  } else if (dim == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / count;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * k;
      Vec d(3);
      d << rho * std::cos(a), rho * std::sin(a), z;
      out.push_back(d);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    while (static_cast<int>(out.size()) < count) {
      Vec d(dim);
      for (int i = 0; i < dim; ++i) d(i) = normal(rng);
      const double len = d.norm();
      if (len < 1e-12) continue;
      out.push_back(d / len);
    }
  }
  return out;
}

double asymmetry(const Mat& M) {
  return (M - M.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace escape
