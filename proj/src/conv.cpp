#include "gcnn/conv.hpp"

#include <stdexcept>
#include <string>

namespace gcnn {
namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void check_layout(const Eigen::MatrixXd& m, std::size_t samples, std::size_t channels, const char* op) {
    require(static_cast<std::size_t>(m.cols()) == samples * channels,
            std::string(op) + ": column count does not match samples x channels");
}

} // namespace

SignalBatch::SignalBatch(std::size_t s, std::size_t c, std::size_t n)
    : data(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s * c))),
      samples(s),
      channels(c) {}

SignalBatch::SignalBatch(Eigen::MatrixXd d, std::size_t s, std::size_t c)
    : data(std::move(d)), samples(s), channels(c) {
    require(static_cast<std::size_t>(data.cols()) == samples * channels,
            "SignalBatch: data columns must equal samples x channels");
}

FilterBank::FilterBank(std::size_t i, std::size_t o, std::size_t length)
    : values(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(i * o))),
      inputs(i),
      outputs(o) {}

FilterBank::FilterBank(Eigen::MatrixXd v, std::size_t i, std::size_t o)
    : values(std::move(v)), inputs(i), outputs(o) {
    require(static_cast<std::size_t>(values.cols()) == inputs * outputs,
            "FilterBank: value columns must equal inputs x outputs");
}

FilterBank interpolate_filters(const Interpolator& interp, const FilterBank& tracked) {
    require(tracked.length() == interp.tracked(), "interpolate_filters: tracked length " +
                                                      std::to_string(tracked.length()) + " != interpolator M " +
                                                      std::to_string(interp.tracked()));
    Eigen::MatrixXd full(interp.phi.rows(), tracked.values.cols());
    full.noalias() = interp.phi * tracked.values;
    return {std::move(full), tracked.inputs, tracked.outputs};
}

FilterBank project_filter_grads(const Interpolator& interp, const FilterBank& filter_grads) {
    require(filter_grads.length() == interp.bins(), "project_filter_grads: gradient length " +
                                                         std::to_string(filter_grads.length()) +
                                                         " != interpolator N " + std::to_string(interp.bins()));
    Eigen::MatrixXd tracked(interp.phi.cols(), filter_grads.values.cols());
    tracked.noalias() = interp.phi.transpose() * filter_grads.values;
    return {std::move(tracked), filter_grads.inputs, filter_grads.outputs};
}

Eigen::MatrixXd spectral_multiply(const Eigen::MatrixXd& coeffs, std::size_t samples, const FilterBank& k) {
    check_layout(coeffs, samples, k.inputs, "spectral_multiply");
    require(coeffs.rows() == k.values.rows(), "spectral_multiply: filter length does not match signal length");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(coeffs.rows(), static_cast<Eigen::Index>(samples * k.outputs));
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t o = 0; o < k.outputs; ++o) {
            auto dst = out.col(static_cast<Eigen::Index>(s * k.outputs + o)).array();
            for (std::size_t i = 0; i < k.inputs; ++i) {
                dst += coeffs.col(static_cast<Eigen::Index>(s * k.inputs + i)).array() * k.filter(i, o).array();
            }
        }
    }
    return out;
}

Eigen::MatrixXd spectral_multiply_adjoint(const Eigen::MatrixXd& coeffs, std::size_t samples, const FilterBank& k) {
    check_layout(coeffs, samples, k.outputs, "spectral_multiply_adjoint");
    require(coeffs.rows() == k.values.rows(),
            "spectral_multiply_adjoint: filter length does not match signal length");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(coeffs.rows(), static_cast<Eigen::Index>(samples * k.inputs));
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t i = 0; i < k.inputs; ++i) {
            auto dst = out.col(static_cast<Eigen::Index>(s * k.inputs + i)).array();
            for (std::size_t o = 0; o < k.outputs; ++o) {
                dst += coeffs.col(static_cast<Eigen::Index>(s * k.outputs + o)).array() * k.filter(i, o).array();
            }
        }
    }
    return out;
}

FilterBank spectral_correlate(const Eigen::MatrixXd& grad, const Eigen::MatrixXd& input, std::size_t samples,
                              std::size_t inputs, std::size_t outputs) {
    check_layout(grad, samples, outputs, "spectral_correlate");
    check_layout(input, samples, inputs, "spectral_correlate");
    require(grad.rows() == input.rows(), "spectral_correlate: signal lengths differ");
    FilterBank dk(inputs, outputs, static_cast<std::size_t>(grad.rows()));
    // Fixed summation order over samples keeps the reduction reproducible.
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t i = 0; i < inputs; ++i) {
            const auto x = input.col(static_cast<Eigen::Index>(s * inputs + i)).array();
            for (std::size_t o = 0; o < outputs; ++o) {
                dk.filter(i, o).array() += grad.col(static_cast<Eigen::Index>(s * outputs + o)).array() * x;
            }
        }
    }
    return dk;
}

SignalBatch conv_forward(const SpectralBasis& basis, const SignalBatch& f, const FilterBank& k,
                         const Eigen::VectorXd& bias) {
    require(f.vertices() == basis.size(), "conv_forward: signal length does not match basis");
    require(k.length() == basis.size(), "conv_forward: filter length does not match basis");
    require(f.channels == k.inputs, "conv_forward: input channels do not match filter bank");
    require(static_cast<std::size_t>(bias.size()) == k.outputs, "conv_forward: bias length != output maps");
    const Eigen::MatrixXd mixed = spectral_multiply(gft(basis, f.data), f.samples, k);
    SignalBatch y(igft(basis, mixed), f.samples, k.outputs);
    for (std::size_t s = 0; s < y.samples; ++s) {
        for (std::size_t o = 0; o < k.outputs; ++o) y.signal(s, o).array() += bias(static_cast<Eigen::Index>(o));
    }
    return y;
}

SignalBatch conv_backward_data(const SpectralBasis& basis, const SignalBatch& dy, const FilterBank& k) {
    require(dy.vertices() == basis.size(), "conv_backward_data: gradient length does not match basis");
    require(k.length() == basis.size(), "conv_backward_data: filter length does not match basis");
    require(dy.channels == k.outputs, "conv_backward_data: gradient channels do not match filter outputs");
    const Eigen::MatrixXd mixed = spectral_multiply_adjoint(gft(basis, dy.data), dy.samples, k);
    return {igft(basis, mixed), dy.samples, k.inputs};
}

FilterBank conv_backward_filters(const SpectralBasis& basis, const SignalBatch& dy, const SignalBatch& f) {
    require(dy.vertices() == basis.size() && f.vertices() == basis.size(),
            "conv_backward_filters: signal length does not match basis");
    require(dy.samples == f.samples, "conv_backward_filters: sample counts differ");
    return spectral_correlate(gft(basis, dy.data), gft(basis, f.data), f.samples, f.channels, dy.channels);
}

SignalBatch naive_backward_data(const SpectralBasis& basis, const SignalBatch& dy, const FilterBank& k) {
    require(dy.vertices() == basis.size(), "naive_backward_data: gradient length does not match basis");
    require(k.length() == basis.size(), "naive_backward_data: filter length does not match basis");
    require(dy.channels == k.outputs, "naive_backward_data: gradient channels do not match filter outputs");
    const Eigen::MatrixXd mixed = spectral_multiply_adjoint(dy.data, dy.samples, k);
    return {igft(basis, mixed), dy.samples, k.inputs};
}

FilterBank naive_backward_filters(const SpectralBasis& basis, const SignalBatch& dy, const SignalBatch& f) {
    require(dy.vertices() == basis.size() && f.vertices() == basis.size(),
            "naive_backward_filters: signal length does not match basis");
    require(dy.samples == f.samples, "naive_backward_filters: sample counts differ");
    return spectral_correlate(dy.data, f.data, f.samples, f.channels, dy.channels);
}

} // namespace gcnn
