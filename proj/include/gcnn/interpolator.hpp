#ifndef GCNN_INTERPOLATOR_HPP
#define GCNN_INTERPOLATOR_HPP

#include <Eigen/Dense>

#include <cstddef>

namespace gcnn {

enum class KnotDomain { Rank, Value };

/// Natural cubic spline cardinal basis mapping M tracked weights onto N
/// spectral bins: k = phi * k_hat. Rows of phi sum to one.
struct Interpolator {
    Eigen::MatrixXd phi;    // N x M
    Eigen::VectorXd knots;  // M ascending positions

    std::size_t bins() const noexcept { return static_cast<std::size_t>(phi.rows()); }
    std::size_t tracked() const noexcept { return static_cast<std::size_t>(phi.cols()); }
};

/// Cardinal natural cubic spline basis: column j is the spline through the
/// unit data e_j on `knots`, evaluated at `queries`. Knots must be strictly
/// ascending.
Eigen::MatrixXd natural_spline_basis(const Eigen::VectorXd& knots, const Eigen::VectorXd& queries);

/// Knots uniformly spaced over the spectral rank 1..n; m == n gives identity.
Interpolator build_interpolator(std::size_t m, std::size_t n);

/// Knot placement over an explicit query axis (eigenvalue values when
/// `KnotDomain::Value` is selected). Queries must be ascending.
Interpolator build_interpolator(std::size_t m, const Eigen::VectorXd& queries);

} // namespace gcnn

#endif // GCNN_INTERPOLATOR_HPP
