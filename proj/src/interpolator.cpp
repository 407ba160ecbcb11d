#include "gcnn/interpolator.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace gcnn {
namespace {

// Second derivatives of the natural spline through (knots, values); Thomas
// algorithm on the interior tridiagonal system.
Eigen::VectorXd natural_second_derivatives(const Eigen::VectorXd& knots, const Eigen::VectorXd& values) {
    const Eigen::Index m = knots.size();
    Eigen::VectorXd second = Eigen::VectorXd::Zero(m);
    if (m < 3) return second;

    const Eigen::Index interior = m - 2;
    std::vector<double> diag(interior), upper(interior), rhs(interior);
    for (Eigen::Index j = 1; j + 1 < m; ++j) {
        const double left = knots(j) - knots(j - 1);
        const double right = knots(j + 1) - knots(j);
        const auto r = static_cast<std::size_t>(j - 1);
        diag[r] = 2.0 * (left + right);
        upper[r] = right;
        rhs[r] = 6.0 * ((values(j + 1) - values(j)) / right - (values(j) - values(j - 1)) / left);
    }
    // Forward sweep; the sub-diagonal entry of row r is the left spacing of knot r+1.
    for (std::size_t r = 1; r < static_cast<std::size_t>(interior); ++r) {
        const double lower = knots(static_cast<Eigen::Index>(r) + 1) - knots(static_cast<Eigen::Index>(r));
        const double factor = lower / diag[r - 1];
        diag[r] -= factor * upper[r - 1];
        rhs[r] -= factor * rhs[r - 1];
    }
    for (auto r = static_cast<std::ptrdiff_t>(interior) - 1; r >= 0; --r) {
        const auto ru = static_cast<std::size_t>(r);
        double v = rhs[ru];
        if (ru + 1 < static_cast<std::size_t>(interior)) v -= upper[ru] * second(r + 2);
        second(r + 1) = v / diag[ru];
    }
    return second;
}

double evaluate(const Eigen::VectorXd& knots, const Eigen::VectorXd& values,
                const Eigen::VectorXd& second, double x) {
    const Eigen::Index m = knots.size();
    const auto* begin = knots.data();
    auto upper = std::upper_bound(begin, begin + m, x);
    Eigen::Index j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(upper - begin) - 1, 0, m - 2);
    const double h = knots(j + 1) - knots(j);
    const double a = (knots(j + 1) - x) / h;
    const double b = (x - knots(j)) / h;
    return a * values(j) + b * values(j + 1) +
           ((a * a * a - a) * second(j) + (b * b * b - b) * second(j + 1)) * h * h / 6.0;
}

} // namespace

Eigen::MatrixXd natural_spline_basis(const Eigen::VectorXd& knots, const Eigen::VectorXd& queries) {
    const Eigen::Index m = knots.size();
    if (m < 1) throw std::invalid_argument("natural_spline_basis: need at least one knot");
    for (Eigen::Index j = 1; j < m; ++j) {
        if (!(knots(j) > knots(j - 1))) {
            throw std::invalid_argument("natural_spline_basis: knots must be strictly ascending");
        }
    }
    Eigen::MatrixXd phi(queries.size(), m);
    if (m == 1) {
        phi.setOnes();
        return phi;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::VectorXd unit = Eigen::VectorXd::Unit(m, j);
        const Eigen::VectorXd second = natural_second_derivatives(knots, unit);
        for (Eigen::Index q = 0; q < queries.size(); ++q) {
            phi(q, j) = evaluate(knots, unit, second, queries(q));
        }
    }
    return phi;
}

Interpolator build_interpolator(std::size_t m, const Eigen::VectorXd& queries) {
    const auto n = static_cast<std::size_t>(queries.size());
    if (m < 1 || m > n) {
        throw std::invalid_argument("build_interpolator: need 1 <= tracked weights (" + std::to_string(m) +
                                    ") <= spectrum size (" + std::to_string(n) + ")");
    }
    const double lo = queries(0);
    const double hi = queries(queries.size() - 1);
    Interpolator out;
    if (m == 1 || !(hi > lo)) {
        out.knots = Eigen::VectorXd::Constant(1, lo);
        out.phi = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
        if (m != 1) {
            // Degenerate axis: every tracked weight but the first is unused.
            out.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
            out.phi.col(0).setOnes();
            out.knots = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m), lo, lo + 1.0);
        }
        return out;
    }
    out.knots.resize(static_cast<Eigen::Index>(m));
    const double step = (hi - lo) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) out.knots(static_cast<Eigen::Index>(j)) = lo + static_cast<double>(j) * step;
    out.knots(static_cast<Eigen::Index>(m) - 1) = hi;
    out.phi = natural_spline_basis(out.knots, queries);
    return out;
}

Interpolator build_interpolator(std::size_t m, std::size_t n) {
    if (m < 1 || m > n) {
        throw std::invalid_argument("build_interpolator: need 1 <= tracked weights (" + std::to_string(m) +
                                    ") <= spectrum size (" + std::to_string(n) + ")");
    }
    Eigen::VectorXd ranks(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) ranks(static_cast<Eigen::Index>(i)) = static_cast<double>(i + 1);
    return build_interpolator(m, ranks);
}

} // namespace gcnn
