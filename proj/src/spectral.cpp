#include "gcnn/spectral.hpp"

#include "gcnn/binary_io.hpp"
#include "gcnn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gcnn {
namespace {

constexpr double kResidualTolerance = 1e-8;

void fix_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        auto column = vectors.col(c);
        const double peak = column.cwiseAbs().maxCoeff();
        Eigen::Index pivot = 0;
        while (std::abs(column(pivot)) < peak * (1.0 - 1e-9)) ++pivot;
        if (column(pivot) < 0.0) column = -column;
    }
}

void check_length(const SpectralBasis& basis, Eigen::Index rows, const char* op) {
    if (rows != static_cast<Eigen::Index>(basis.size())) {
        throw std::invalid_argument(std::string(op) + ": signal length " + std::to_string(rows) +
                                    " does not match basis size " + std::to_string(basis.size()));
    }
}

} // namespace

SpectralBasis eigendecompose(const Eigen::MatrixXd& symmetric, std::uint64_t source_hash) {
    if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0) {
        throw std::invalid_argument("eigendecompose: matrix must be square and non-empty");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw NumericalFailure("eigendecompose: symmetric eigensolver did not converge",
                               std::numeric_limits<double>::infinity());
    }
    SpectralBasis basis{solver.eigenvectors(), solver.eigenvalues(), source_hash};
    fix_signs(basis.vectors);

    const double scale = std::max(1.0, basis.values.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd residual = symmetric * basis.vectors - basis.vectors * basis.values.asDiagonal();
    const double worst = residual.colwise().norm().maxCoeff() / scale;
    if (!(worst <= kResidualTolerance)) {
        throw NumericalFailure("eigendecompose: eigenpair residual " + std::to_string(worst) +
                                   " exceeds tolerance",
                               worst);
    }
    return basis;
}

SpectralBasis eigendecompose(const LaplacianMatrix& laplacian) {
    return eigendecompose(laplacian.entries(), laplacian.content_hash());
}

Eigen::VectorXd gft(const SpectralBasis& basis, const Eigen::VectorXd& signal) {
    check_length(basis, signal.rows(), "gft");
    return basis.vectors.transpose() * signal;
}

Eigen::VectorXd igft(const SpectralBasis& basis, const Eigen::VectorXd& coefficients) {
    check_length(basis, coefficients.rows(), "igft");
    return basis.vectors * coefficients;
}

Eigen::MatrixXd gft(const SpectralBasis& basis, const Eigen::MatrixXd& signals) {
    check_length(basis, signals.rows(), "gft");
    Eigen::MatrixXd out(signals.rows(), signals.cols());
    out.noalias() = basis.vectors.transpose() * signals;
    return out;
}

Eigen::MatrixXd igft(const SpectralBasis& basis, const Eigen::MatrixXd& coefficients) {
    check_length(basis, coefficients.rows(), "igft");
    Eigen::MatrixXd out(coefficients.rows(), coefficients.cols());
    out.noalias() = basis.vectors * coefficients;
    return out;
}

std::shared_ptr<const SpectralBasis> BasisCache::get(const LaplacianMatrix& laplacian) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(laplacian.content_hash()); it != entries_.end()) return it->second;
    }
    auto basis = std::make_shared<const SpectralBasis>(eigendecompose(laplacian));
    std::lock_guard lock(mutex_);
    return entries_.emplace(laplacian.content_hash(), std::move(basis)).first->second;
}

std::size_t BasisCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void save_basis(const std::string& path, const SpectralBasis& basis) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    const auto n = static_cast<std::uint64_t>(basis.size());
    io::write_le(os, n);
    io::write_doubles(os, basis.values.data(), n);
    io::write_doubles(os, basis.vectors.data(), n * n);
    if (!os) throw FormatError("failed writing " + path);
}

SpectralBasis load_basis(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    const auto n = io::read_le<std::uint64_t>(is, path);
    if (n == 0 || n > (1u << 16)) throw FormatError(path + ": implausible basis size " + std::to_string(n));
    SpectralBasis basis;
    const auto dim = static_cast<Eigen::Index>(n);
    basis.values.resize(dim);
    basis.vectors.resize(dim, dim);
    io::read_doubles(is, basis.values.data(), n, path);
    io::read_doubles(is, basis.vectors.data(), n * n, path);
    return basis;
}

} // namespace gcnn
