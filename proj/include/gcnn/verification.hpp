#ifndef GCNN_VERIFICATION_HPP
#define GCNN_VERIFICATION_HPP

#include "gcnn/conv.hpp"
#include "gcnn/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace gcnn {

enum class GradTarget { Data, Filters, Tracked };
enum class GradVariant { Proposed, Naive };
enum class DiffScheme { Central, Forward };
enum class PerturbMode { Coordinate, Directional };

std::string to_string(GradTarget t);
std::string to_string(GradVariant v);
GradTarget parse_target(const std::string& s);

using LossFn = std::function<double(const Eigen::MatrixXd&)>;

/// Coordinate-wise difference quotients of `loss` at `x`. Central:
/// (L(x+h e) - L(x-h e)) / 2h; forward: (L(x+h e) - L(x)) / h.
/// Throws NumericalFailure on a non-finite loss.
Eigen::MatrixXd finite_difference_grad(const LossFn& loss, const Eigen::MatrixXd& x, double step,
                                       DiffScheme scheme = DiffScheme::Central);

/// Difference quotient of `loss` along `direction`.
double directional_difference(const LossFn& loss, const Eigen::MatrixXd& x, const Eigen::MatrixXd& direction,
                              double step, DiffScheme scheme = DiffScheme::Central);

/// 100 * ||analytic - numeric|| / max(||numeric||, 1e-12)
double percent_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric);

struct GradCheckReport {
    GradTarget target = GradTarget::Data;
    GradVariant variant = GradVariant::Proposed;
    std::size_t tracked = 0;
    std::size_t runs = 0;
    double mean_percent = 0.0;
    double std_percent = 0.0;
    double max_coordinate_error = 0.0;  // worst |analytic - numeric| entry over all runs
    std::size_t failed_runs = 0;
    std::vector<double> errors;         // per successful run

    /// Recomputes runs, mean and (population) std from `errors`.
    void recompute();
};

/// A random single-layer instance family: signals on `basis`, loss
/// 1/2 ||conv(f, phi k_hat) + b - t||^2 with standard normal f, k_hat, b, t.
struct ProtocolSetup {
    std::shared_ptr<const SpectralBasis> basis;
    std::size_t samples = 1;
    std::size_t inputs = 1;
    std::size_t outputs = 1;
    double step = 1e-4;
    DiffScheme scheme = DiffScheme::Central;
    PerturbMode mode = PerturbMode::Coordinate;
    std::size_t directions = 16;  // directional mode only
};

/// One report per M for a single variant; M = N is the uninterpolated case.
std::vector<GradCheckReport> run_protocol(const ProtocolSetup& setup, GradTarget target, GradVariant variant,
                                          const std::vector<std::size_t>& m_values, std::size_t runs,
                                          std::uint64_t seed);

/// Proposed and naive reports for every (target, M), computed on identical
/// instances: each run's finite-difference gradient is shared by both.
std::vector<GradCheckReport> compare_variants(const ProtocolSetup& setup, const std::vector<GradTarget>& targets,
                                              const std::vector<std::size_t>& m_values, std::size_t runs,
                                              std::uint64_t seed);

/// CSV: target,variant,tracked_weights,runs,failed_runs,mean_percent_error,std_percent_error,max_coordinate_error
void write_reports_csv(std::ostream& os, const std::vector<GradCheckReport>& reports);

} // namespace gcnn

#endif // GCNN_VERIFICATION_HPP
