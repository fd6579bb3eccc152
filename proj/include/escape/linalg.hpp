#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace escape {

// Upper bound on the ambient dimension. Vectors and matrices are
// stack-allocated up to this size so the geodesic hot loop never touches
// the heap.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Euclidean-orthonormal basis of the tangent space of the sphere through x,
/// returned as the columns of an n x (n-1) matrix.
Mat tangent_frame(const Vec& x);

/// W(x) = x x^T / |x|^2.
Mat radial_projector(const Vec& x);

/// Smallest eigenvalue of the symmetric pencil (B, T), T positive definite.
double min_generalized_eigenvalue(const Mat& B, const Mat& T);

/// Unit directions on S^{n-1}: equally spaced angles starting at 0 for
/// n = 2, a Fibonacci lattice for n = 3, seeded Gaussian samples otherwise.
std::vector<Vec> sphere_directions(int dim, int count, std::uint64_t seed = 0);

/// Largest |M - M^T| entry.
double asymmetry(const Mat& M);

}  // namespace escape
