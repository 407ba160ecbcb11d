#ifndef GCNN_SPECTRAL_HPP
#define GCNN_SPECTRAL_HPP

#include "gcnn/graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace gcnn {

/// Orthonormal Laplacian eigenbasis with ascending eigenvalues.
///
/// Sign convention: the largest-magnitude entry of every eigenvector is
/// positive (ties resolved towards the lowest vertex index).
struct SpectralBasis {
    Eigen::MatrixXd vectors;   // U, columns are eigenvectors
    Eigen::VectorXd values;    // lambda, ascending
    std::uint64_t source_hash = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// Full symmetric eigendecomposition. Throws NumericalFailure when the
/// solver does not converge or an eigenpair residual exceeds 1e-8 (relative).
SpectralBasis eigendecompose(const LaplacianMatrix& laplacian);
SpectralBasis eigendecompose(const Eigen::MatrixXd& symmetric, std::uint64_t source_hash = 0);

// Graph Fourier transform f~ = U^T f and its inverse f = U f~. The matrix
// overloads transform every column at once.
Eigen::VectorXd gft(const SpectralBasis& basis, const Eigen::VectorXd& signal);
Eigen::VectorXd igft(const SpectralBasis& basis, const Eigen::VectorXd& coefficients);
Eigen::MatrixXd gft(const SpectralBasis& basis, const Eigen::MatrixXd& signals);
Eigen::MatrixXd igft(const SpectralBasis& basis, const Eigen::MatrixXd& coefficients);

/// Bases keyed by Laplacian content hash. Thread safe.
class BasisCache {
public:
    std::shared_ptr<const SpectralBasis> get(const LaplacianMatrix& laplacian);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<const SpectralBasis>> entries_;
};

// Binary debug dump: u64 N, N eigenvalues, then U column-major; little-endian f64.
void save_basis(const std::string& path, const SpectralBasis& basis);
SpectralBasis load_basis(const std::string& path);

} // namespace gcnn

#endif // GCNN_SPECTRAL_HPP
