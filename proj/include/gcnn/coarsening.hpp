#ifndef GCNN_COARSENING_HPP
#define GCNN_COARSENING_HPP

#include "gcnn/conv.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

namespace gcnn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One aggregation step.
///
/// R (coarse x fine) averages each aggregate, so its rows sum to one.
/// P (fine x coarse) broadcasts an aggregate value back to its members, so
/// R * P = I. The exact adjoint of pooling is R^T, which is P with its
/// columns rescaled to sum to one; pool_backward uses it.
struct CoarseningLevel {
    Graph coarse_graph;
    SparseMatrix restriction;
    SparseMatrix projection;
    std::vector<std::size_t> aggregate_of;    // fine vertex -> aggregate id
    std::vector<std::size_t> aggregate_seed;  // aggregate id -> fine seed vertex

    std::size_t fine_size() const noexcept { return aggregate_of.size(); }
    std::size_t coarse_size() const noexcept { return aggregate_seed.size(); }
    std::vector<std::size_t> aggregate_sizes() const;
};

struct CoarseningHierarchy {
    std::vector<CoarseningLevel> levels;
    SparseMatrix restriction;  // R_last * ... * R_first
    SparseMatrix projection;   // P_first * ... * P_last

    std::size_t fine_size() const noexcept { return static_cast<std::size_t>(restriction.cols()); }
    std::size_t coarse_size() const noexcept { return static_cast<std::size_t>(restriction.rows()); }
    const Graph& coarse_graph() const { return levels.back().coarse_graph; }
    /// Composite fine vertex -> final aggregate id.
    std::vector<std::size_t> composed_aggregate_of() const;
};

struct CoarseningOptions {
    double beta = 0.05;
    int levels = 2;
    std::uint64_t seed = 0;
    bool randomized_ties = false;  // break equal-degree ties by a seeded shuffle instead of index
};

/// Greedy strength-of-connection aggregation.
///
/// Vertices are visited by descending weighted degree (index breaks ties).
/// An unassigned vertex i seeds a new aggregate and absorbs every unassigned
/// neighbour j with w_ij >= beta * max_k w_ik. Coarse weights are R W R^T
/// with the diagonal dropped.
CoarseningLevel aggregate_level(const Graph& g, double beta, std::uint64_t seed = 0, bool randomized_ties = false);
CoarseningHierarchy amg_coarsen(const Graph& g, const CoarseningOptions& options);
CoarseningHierarchy amg_coarsen(const Graph& g, double beta, int levels, std::uint64_t seed = 0);

/// f_hat = R f per sample and channel.
SignalBatch pool_forward(const CoarseningHierarchy& h, const SignalBatch& f);
/// Gradient of pool_forward: R^T d.
SignalBatch pool_backward(const CoarseningHierarchy& h, const SignalBatch& dcoarse);
/// Broadcast coarse values back to the fine graph: P c.
SignalBatch unpool(const CoarseningHierarchy& h, const SignalBatch& coarse);

struct PolaritySplit {
    std::vector<std::size_t> kept;        // u_N[i] >= 0
    std::vector<std::size_t> complement;  // u_N[i] < 0
};

/// Splits vertices by the sign of the eigenvector of the largest eigenvalue.
PolaritySplit polarity_split(const SpectralBasis& basis);

} // namespace gcnn

#endif // GCNN_COARSENING_HPP
