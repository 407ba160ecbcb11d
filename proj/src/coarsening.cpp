#include "gcnn/coarsening.hpp"

#include "gcnn/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gcnn {
namespace {

constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> visit_order(const Graph& g, std::uint64_t seed, bool randomized_ties) {
    const Eigen::VectorXd degree = g.degrees();
    std::vector<std::size_t> tiebreak(g.size());
    std::iota(tiebreak.begin(), tiebreak.end(), std::size_t{0});
    if (randomized_ties) {
        std::mt19937_64 rng(seed);
        std::shuffle(tiebreak.begin(), tiebreak.end(), rng);
    }
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = degree(static_cast<Eigen::Index>(a));
        const double db = degree(static_cast<Eigen::Index>(b));
        if (da != db) return da > db;
        return tiebreak[a] < tiebreak[b];
    });
    return order;
}

void check_batch(const SignalBatch& f, std::size_t expected, const char* op) {
    if (f.vertices() != expected) {
        throw std::invalid_argument(std::string(op) + ": signal has " + std::to_string(f.vertices()) +
                                    " vertices, expected " + std::to_string(expected));
    }
}

} // namespace

std::vector<std::size_t> CoarseningLevel::aggregate_sizes() const {
    std::vector<std::size_t> sizes(coarse_size(), 0);
    for (auto a : aggregate_of) ++sizes[a];
    return sizes;
}

std::vector<std::size_t> CoarseningHierarchy::composed_aggregate_of() const {
    std::vector<std::size_t> map(fine_size());
    std::iota(map.begin(), map.end(), std::size_t{0});
    for (const auto& level : levels) {
        for (auto& v : map) v = level.aggregate_of[v];
    }
    return map;
}

CoarseningLevel aggregate_level(const Graph& g, double beta, std::uint64_t seed, bool randomized_ties) {
    const std::size_t n = g.size();
    if (n < 2) throw std::invalid_argument("amg_coarsen: graph needs at least 2 vertices");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("amg_coarsen: beta must lie in (0, 1)");

    const Eigen::MatrixXd& w = g.adjacency();
    std::vector<std::size_t> aggregate_of(n, kUnassigned);
    std::vector<std::size_t> seeds;
    for (auto i : visit_order(g, seed, randomized_ties)) {
        if (aggregate_of[i] != kUnassigned) continue;
        const auto id = seeds.size();
        seeds.push_back(i);
        aggregate_of[i] = id;
        const double strongest = w.row(static_cast<Eigen::Index>(i)).maxCoeff();
        if (strongest <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (aggregate_of[j] == kUnassigned && wij > 0.0 && wij >= beta * strongest) aggregate_of[j] = id;
        }
    }
    const std::size_t coarse = seeds.size();
    if (coarse >= n) {
        throw CoarseningStall("amg_coarsen: level with " + std::to_string(n) + " vertices did not reduce");
    }

    std::vector<std::size_t> sizes(coarse, 0);
    for (auto a : aggregate_of) ++sizes[a];

    std::vector<Eigen::Triplet<double>> r_entries, p_entries;
    r_entries.reserve(n);
    p_entries.reserve(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto a = aggregate_of[v];
        r_entries.emplace_back(static_cast<int>(a), static_cast<int>(v), 1.0 / static_cast<double>(sizes[a]));
        p_entries.emplace_back(static_cast<int>(v), static_cast<int>(a), 1.0);
    }
    CoarseningLevel level{Graph(Eigen::MatrixXd::Zero(1, 1)), SparseMatrix(static_cast<Eigen::Index>(coarse), static_cast<Eigen::Index>(n)),
                          SparseMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(coarse)),
                          std::move(aggregate_of), std::move(seeds)};
    level.restriction.setFromTriplets(r_entries.begin(), r_entries.end());
    level.projection.setFromTriplets(p_entries.begin(), p_entries.end());

    Eigen::MatrixXd coarse_w = level.restriction * w * level.restriction.transpose();
    coarse_w.diagonal().setZero();
    // Symmetrize exactly; the triple product can differ in the last bit.
    coarse_w = 0.5 * (coarse_w + coarse_w.transpose()).eval();
    std::vector<std::size_t> labels(coarse);
    for (std::size_t a = 0; a < coarse; ++a) labels[a] = g.vertex_labels()[level.aggregate_seed[a]];
    level.coarse_graph = Graph(std::move(coarse_w), std::move(labels));
    return level;
}

CoarseningHierarchy amg_coarsen(const Graph& g, const CoarseningOptions& options) {
    if (options.levels < 1) throw std::invalid_argument("amg_coarsen: levels must be positive");
    if (g.size() < 2) throw std::invalid_argument("amg_coarsen: graph needs at least 2 vertices");
    CoarseningHierarchy h;
    const Graph* current = &g;
    for (int l = 0; l < options.levels; ++l) {
        h.levels.push_back(aggregate_level(*current, options.beta, options.seed + static_cast<std::uint64_t>(l),
                                           options.randomized_ties));
        current = &h.levels.back().coarse_graph;
    }
    h.restriction = h.levels.front().restriction;
    h.projection = h.levels.front().projection;
    for (std::size_t l = 1; l < h.levels.size(); ++l) {
        h.restriction = (h.levels[l].restriction * h.restriction).pruned();
        h.projection = (h.projection * h.levels[l].projection).pruned();
    }
    return h;
}

CoarseningHierarchy amg_coarsen(const Graph& g, double beta, int levels, std::uint64_t seed) {
    return amg_coarsen(g, CoarseningOptions{beta, levels, seed, false});
}

SignalBatch pool_forward(const CoarseningHierarchy& h, const SignalBatch& f) {
    check_batch(f, h.fine_size(), "pool_forward");
    Eigen::MatrixXd out = h.restriction * f.data;
    return {std::move(out), f.samples, f.channels};
}

SignalBatch pool_backward(const CoarseningHierarchy& h, const SignalBatch& dcoarse) {
    check_batch(dcoarse, h.coarse_size(), "pool_backward");
    Eigen::MatrixXd out = h.restriction.transpose() * dcoarse.data;
    return {std::move(out), dcoarse.samples, dcoarse.channels};
}

SignalBatch unpool(const CoarseningHierarchy& h, const SignalBatch& coarse) {
    check_batch(coarse, h.coarse_size(), "unpool");
    Eigen::MatrixXd out = h.projection * coarse.data;
    return {std::move(out), coarse.samples, coarse.channels};
}

PolaritySplit polarity_split(const SpectralBasis& basis) {
    const auto n = basis.size();
    if (n < 2) throw std::invalid_argument("polarity_split: basis needs at least 2 vertices");
    const auto top = basis.vectors.col(static_cast<Eigen::Index>(n) - 1);
    PolaritySplit split;
    for (std::size_t i = 0; i < n; ++i) {
        // Entries at round-off level count as zero, hence kept.
        if (top(static_cast<Eigen::Index>(i)) >= -1e-12) {
            split.kept.push_back(i);
        } else {
            split.complement.push_back(i);
        }
    }
    return split;
}

} // namespace gcnn
