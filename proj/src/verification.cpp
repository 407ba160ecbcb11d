#include "gcnn/verification.hpp"

#include "gcnn/errors.hpp"
#include "gcnn/interpolator.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

namespace gcnn {
namespace {

double checked(double value) {
    if (!std::isfinite(value)) throw NumericalFailure("finite difference: loss evaluated to a non-finite value");
    return value;
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

struct Instance {
    Interpolator interp;
    SignalBatch input;
    FilterBank tracked;
    Eigen::VectorXd bias;
    SignalBatch target;
};

Instance make_instance(const ProtocolSetup& setup, std::size_t m, std::uint64_t seed, std::size_t run) {
    const auto n = static_cast<Eigen::Index>(setup.basis->size());
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + run + 1);
    Instance inst;
    inst.interp = build_interpolator(m, setup.basis->size());
    inst.input = SignalBatch(normal_matrix(n, static_cast<Eigen::Index>(setup.samples * setup.inputs), rng),
                             setup.samples, setup.inputs);
    inst.tracked = FilterBank(normal_matrix(static_cast<Eigen::Index>(m),
                                            static_cast<Eigen::Index>(setup.inputs * setup.outputs), rng),
                              setup.inputs, setup.outputs);
    inst.bias = normal_matrix(static_cast<Eigen::Index>(setup.outputs), 1, rng);
    inst.target = SignalBatch(normal_matrix(n, static_cast<Eigen::Index>(setup.samples * setup.outputs), rng),
                              setup.samples, setup.outputs);
    return inst;
}

double half_squared_error(const SignalBatch& y, const SignalBatch& t) { return 0.5 * (y.data - t.data).squaredNorm(); }

// Loss as a function of the tensor under test, plus the point at which to differentiate.
std::pair<LossFn, Eigen::MatrixXd> loss_for(const ProtocolSetup& setup, const Instance& inst, GradTarget target) {
    const SpectralBasis& basis = *setup.basis;
    const FilterBank k = interpolate_filters(inst.interp, inst.tracked);
    switch (target) {
    case GradTarget::Data:
        return {[&basis, &inst, k](const Eigen::MatrixXd& f) {
                    return half_squared_error(conv_forward(basis, SignalBatch(f, inst.input.samples, inst.input.channels), k,
                                                           inst.bias),
                                              inst.target);
                },
                inst.input.data};
    case GradTarget::Filters:
        return {[&basis, &inst](const Eigen::MatrixXd& kv) {
                    return half_squared_error(
                        conv_forward(basis, inst.input, FilterBank(kv, inst.tracked.inputs, inst.tracked.outputs),
                                     inst.bias),
                        inst.target);
                },
                k.values};
    case GradTarget::Tracked:
        return {[&basis, &inst](const Eigen::MatrixXd& kh) {
                    const FilterBank full =
                        interpolate_filters(inst.interp, FilterBank(kh, inst.tracked.inputs, inst.tracked.outputs));
                    return half_squared_error(conv_forward(basis, inst.input, full, inst.bias), inst.target);
                },
                inst.tracked.values};
    }
    throw std::logic_error("unreachable");
}

Eigen::MatrixXd analytic_gradient(const ProtocolSetup& setup, const Instance& inst, GradTarget target,
                                  GradVariant variant) {
    const SpectralBasis& basis = *setup.basis;
    const FilterBank k = interpolate_filters(inst.interp, inst.tracked);
    SignalBatch dy = conv_forward(basis, inst.input, k, inst.bias);
    dy.data -= inst.target.data;
    const bool naive = variant == GradVariant::Naive;
    switch (target) {
    case GradTarget::Data:
        return (naive ? naive_backward_data(basis, dy, k) : conv_backward_data(basis, dy, k)).data;
    case GradTarget::Filters:
        return (naive ? naive_backward_filters(basis, dy, inst.input) : conv_backward_filters(basis, dy, inst.input))
            .values;
    case GradTarget::Tracked: {
        const FilterBank dk =
            naive ? naive_backward_filters(basis, dy, inst.input) : conv_backward_filters(basis, dy, inst.input);
        return project_filter_grads(inst.interp, dk).values;
    }
    }
    throw std::logic_error("unreachable");
}

// Numeric and analytic quantities in a shared representation: full gradients
// in coordinate mode, vectors of directional derivatives otherwise.
struct Comparison {
    Eigen::MatrixXd numeric;
    std::vector<Eigen::MatrixXd> directions;
};

Comparison numeric_side(const ProtocolSetup& setup, const LossFn& loss, const Eigen::MatrixXd& x,
                        std::mt19937_64& rng) {
    Comparison c;
    if (setup.mode == PerturbMode::Coordinate) {
        c.numeric = finite_difference_grad(loss, x, setup.step, setup.scheme);
        return c;
    }
    c.numeric.resize(static_cast<Eigen::Index>(setup.directions), 1);
    for (std::size_t d = 0; d < setup.directions; ++d) {
        Eigen::MatrixXd dir = normal_matrix(x.rows(), x.cols(), rng);
        dir /= dir.norm();
        c.numeric(static_cast<Eigen::Index>(d), 0) = directional_difference(loss, x, dir, setup.step, setup.scheme);
        c.directions.push_back(std::move(dir));
    }
    return c;
}

Eigen::MatrixXd analytic_side(const Comparison& c, const Eigen::MatrixXd& gradient) {
    if (c.directions.empty()) return gradient;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(c.directions.size()), 1);
    for (std::size_t d = 0; d < c.directions.size(); ++d) {
        out(static_cast<Eigen::Index>(d), 0) = (gradient.array() * c.directions[d].array()).sum();
    }
    return out;
}

GradCheckReport empty_report(GradTarget target, GradVariant variant, std::size_t m) {
    GradCheckReport r;
    r.target = target;
    r.variant = variant;
    r.tracked = m;
    return r;
}

void validate(const ProtocolSetup& setup, std::size_t runs) {
    if (!setup.basis) throw std::invalid_argument("gradient protocol: missing spectral basis");
    if (runs < 1) throw std::invalid_argument("gradient protocol: runs must be at least 1");
    if (!(setup.step > 0.0)) throw std::invalid_argument("gradient protocol: step must be positive");
    if (setup.samples < 1 || setup.inputs < 1 || setup.outputs < 1) {
        throw std::invalid_argument("gradient protocol: samples, inputs and outputs must be positive");
    }
}

} // namespace

std::string to_string(GradTarget t) {
    switch (t) {
    case GradTarget::Data: return "data";
    case GradTarget::Filters: return "filters";
    case GradTarget::Tracked: return "tracked";
    }
    return "?";
}

std::string to_string(GradVariant v) { return v == GradVariant::Proposed ? "proposed" : "naive"; }

GradTarget parse_target(const std::string& s) {
    if (s == "data") return GradTarget::Data;
    if (s == "filters") return GradTarget::Filters;
    if (s == "tracked") return GradTarget::Tracked;
    throw std::invalid_argument("unknown gradient target '" + s + "'");
}

Eigen::MatrixXd finite_difference_grad(const LossFn& loss, const Eigen::MatrixXd& x, double step, DiffScheme scheme) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_grad: step must be positive");
    Eigen::MatrixXd grad(x.rows(), x.cols());
    Eigen::MatrixXd probe = x;
    const double base = scheme == DiffScheme::Forward ? checked(loss(x)) : 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double original = probe.data()[i];
        probe.data()[i] = original + step;
        const double up = checked(loss(probe));
        if (scheme == DiffScheme::Central) {
            probe.data()[i] = original - step;
            const double down = checked(loss(probe));
            grad.data()[i] = (up - down) / (2.0 * step);
        } else {
            grad.data()[i] = (up - base) / step;
        }
        probe.data()[i] = original;
    }
    return grad;
}

double directional_difference(const LossFn& loss, const Eigen::MatrixXd& x, const Eigen::MatrixXd& direction,
                              double step, DiffScheme scheme) {
    if (direction.rows() != x.rows() || direction.cols() != x.cols()) {
        throw std::invalid_argument("directional_difference: direction shape mismatch");
    }
    const double up = checked(loss(x + step * direction));
    if (scheme == DiffScheme::Forward) return (up - checked(loss(x))) / step;
    return (up - checked(loss(x - step * direction))) / (2.0 * step);
}

double percent_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
        throw std::invalid_argument("percent_error: shape mismatch");
    }
    return 100.0 * (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

void GradCheckReport::recompute() {
    runs = errors.size();
    mean_percent = 0.0;
    std_percent = 0.0;
    if (errors.empty()) return;
    for (double e : errors) mean_percent += e;
    mean_percent /= static_cast<double>(errors.size());
    for (double e : errors) std_percent += (e - mean_percent) * (e - mean_percent);
    std_percent = std::sqrt(std_percent / static_cast<double>(errors.size()));
}

std::vector<GradCheckReport> compare_variants(const ProtocolSetup& setup, const std::vector<GradTarget>& targets,
                                              const std::vector<std::size_t>& m_values, std::size_t runs,
                                              std::uint64_t seed) {
    validate(setup, runs);
    std::vector<GradCheckReport> reports;
    for (auto target : targets) {
        for (auto m : m_values) {
            GradCheckReport proposed = empty_report(target, GradVariant::Proposed, m);
            GradCheckReport naive = empty_report(target, GradVariant::Naive, m);
            for (std::size_t run = 0; run < runs; ++run) {
                try {
                    const Instance inst = make_instance(setup, m, seed, run);
                    const auto [loss, x] = loss_for(setup, inst, target);
                    std::mt19937_64 direction_rng(seed + 7919 * (run + 1));
                    const Comparison c = numeric_side(setup, loss, x, direction_rng);
                    for (auto* report : {&proposed, &naive}) {
                        const Eigen::MatrixXd g = analytic_gradient(setup, inst, target, report->variant);
                        const Eigen::MatrixXd a = analytic_side(c, g);
                        report->errors.push_back(percent_error(a, c.numeric));
                        report->max_coordinate_error =
                            std::max(report->max_coordinate_error, (a - c.numeric).cwiseAbs().maxCoeff());
                    }
                } catch (const NumericalFailure&) {
                    ++proposed.failed_runs;
                    ++naive.failed_runs;
                }
            }
            proposed.recompute();
            naive.recompute();
            reports.push_back(std::move(proposed));
            reports.push_back(std::move(naive));
        }
    }
    return reports;
}

std::vector<GradCheckReport> run_protocol(const ProtocolSetup& setup, GradTarget target, GradVariant variant,
                                          const std::vector<std::size_t>& m_values, std::size_t runs,
                                          std::uint64_t seed) {
    validate(setup, runs);
    std::vector<GradCheckReport> reports;
    for (auto m : m_values) {
        GradCheckReport report = empty_report(target, variant, m);
        for (std::size_t run = 0; run < runs; ++run) {
            try {
                const Instance inst = make_instance(setup, m, seed, run);
                const auto [loss, x] = loss_for(setup, inst, target);
                std::mt19937_64 direction_rng(seed + 7919 * (run + 1));
                const Comparison c = numeric_side(setup, loss, x, direction_rng);
                const Eigen::MatrixXd a = analytic_side(c, analytic_gradient(setup, inst, target, variant));
                report.errors.push_back(percent_error(a, c.numeric));
                report.max_coordinate_error = std::max(report.max_coordinate_error, (a - c.numeric).cwiseAbs().maxCoeff());
            } catch (const NumericalFailure&) {
                ++report.failed_runs;
            }
        }
        report.recompute();
        reports.push_back(std::move(report));
    }
    return reports;
}

void write_reports_csv(std::ostream& os, const std::vector<GradCheckReport>& reports) {
    os << "target,variant,tracked_weights,runs,failed_runs,mean_percent_error,std_percent_error,max_coordinate_error\n";
    os << std::setprecision(10);
    for (const auto& r : reports) {
        os << to_string(r.target) << ',' << to_string(r.variant) << ',' << r.tracked << ',' << r.runs << ','
           << r.failed_runs << ',' << r.mean_percent << ',' << r.std_percent << ',' << r.max_coordinate_error << '\n';
    }
}

} // namespace gcnn
