#ifndef GCNN_CONV_HPP
#define GCNN_CONV_HPP

#include "gcnn/interpolator.hpp"
#include "gcnn/spectral.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace gcnn {

/// S samples x C channels x N vertices. Stored N x (S*C), column s*C + c, so
/// one sample's channels are contiguous and a whole batch transforms with a
/// single matrix product.
struct SignalBatch {
    Eigen::MatrixXd data;
    std::size_t samples = 0;
    std::size_t channels = 0;

    SignalBatch() = default;
    SignalBatch(std::size_t samples, std::size_t channels, std::size_t vertices);
    SignalBatch(Eigen::MatrixXd data, std::size_t samples, std::size_t channels);

    std::size_t vertices() const noexcept { return static_cast<std::size_t>(data.rows()); }
    auto signal(std::size_t s, std::size_t c) { return data.col(static_cast<Eigen::Index>(s * channels + c)); }
    auto signal(std::size_t s, std::size_t c) const {
        return data.col(static_cast<Eigen::Index>(s * channels + c));
    }
    bool all_finite() const { return data.allFinite(); }
};

/// I x O bank of length-L vectors (L = N spectral bins, or M tracked
/// weights). Stored L x (I*O), column i*O + o.
struct FilterBank {
    Eigen::MatrixXd values;
    std::size_t inputs = 0;
    std::size_t outputs = 0;

    FilterBank() = default;
    FilterBank(std::size_t inputs, std::size_t outputs, std::size_t length);
    FilterBank(Eigen::MatrixXd values, std::size_t inputs, std::size_t outputs);

    std::size_t length() const noexcept { return static_cast<std::size_t>(values.rows()); }
    auto filter(std::size_t i, std::size_t o) { return values.col(static_cast<Eigen::Index>(i * outputs + o)); }
    auto filter(std::size_t i, std::size_t o) const {
        return values.col(static_cast<Eigen::Index>(i * outputs + o));
    }
};

/// k[i][o] = phi * k_hat[i][o]
FilterBank interpolate_filters(const Interpolator& interp, const FilterBank& tracked);
/// dk_hat[i][o] = phi^T * dk[i][o]
FilterBank project_filter_grads(const Interpolator& interp, const FilterBank& filter_grads);

// Spectral-domain kernels. `coeffs` and the results are laid out like
// SignalBatch::data; they are the building blocks of the vertex-domain ops.

/// out[s][o] = sum_i coeffs[s][i] .* k[i][o]
Eigen::MatrixXd spectral_multiply(const Eigen::MatrixXd& coeffs, std::size_t samples, const FilterBank& k);
/// out[s][i] = sum_o coeffs[s][o] .* k[i][o]
Eigen::MatrixXd spectral_multiply_adjoint(const Eigen::MatrixXd& coeffs, std::size_t samples, const FilterBank& k);
/// dk[i][o] = sum_s grad[s][o] .* input[s][i]
FilterBank spectral_correlate(const Eigen::MatrixXd& grad, const Eigen::MatrixXd& input, std::size_t samples,
                              std::size_t inputs, std::size_t outputs);

/// y[s][o] = U sum_i (U^T f[s][i] .* k[i][o]) + bias[o]
SignalBatch conv_forward(const SpectralBasis& basis, const SignalBatch& f, const FilterBank& k,
                         const Eigen::VectorXd& bias);

/// df[s][i] = U sum_o (U^T dy[s][o] .* k[i][o])
SignalBatch conv_backward_data(const SpectralBasis& basis, const SignalBatch& dy, const FilterBank& k);

/// dk[i][o] = sum_s (U^T dy[s][o]) .* (U^T f[s][i]); stays in the spectral domain.
FilterBank conv_backward_filters(const SpectralBasis& basis, const SignalBatch& dy, const SignalBatch& f);

/// Baseline that skips the transform of dy: df[s][i] = U sum_o (dy[s][o] .* k[i][o]).
SignalBatch naive_backward_data(const SpectralBasis& basis, const SignalBatch& dy, const FilterBank& k);

/// Baseline in the vertex domain: dk[i][o] = sum_s dy[s][o] .* f[s][i].
FilterBank naive_backward_filters(const SpectralBasis& basis, const SignalBatch& dy, const SignalBatch& f);

} // namespace gcnn

#endif // GCNN_CONV_HPP
