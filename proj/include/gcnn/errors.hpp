#ifndef GCNN_ERRORS_HPP
#define GCNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gcnn {

// Shape and argument violations use std::invalid_argument directly.

/// Non-convergence, NaN/Inf in activations or gradients.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Malformed or truncated files (IDX, checkpoints, edge lists, caches).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unparseable architectures, incompatible checkpoints, bad experiment configs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A coarsening level that did not reduce the vertex count.
class CoarseningStall : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gcnn

#endif // GCNN_ERRORS_HPP
