#ifndef GCNN_GRAPH_HPP
#define GCNN_GRAPH_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gcnn {

enum class WeightMode { Binary, Euclidean };

/// Weighted undirected graph with dense symmetric adjacency.
///
/// The adjacency is validated on construction: square, symmetric, zero
/// diagonal and non-negative. Subsampled graphs carry the original vertex id
/// of every vertex in `vertex_labels()`; otherwise the labels are 0..N-1.
class Graph {
public:
    explicit Graph(Eigen::MatrixXd adjacency, std::vector<std::size_t> vertex_labels = {});

    std::size_t size() const noexcept { return static_cast<std::size_t>(adjacency_.rows()); }
    const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
    double weight(std::size_t i, std::size_t j) const { return adjacency_(i, j); }
    const std::vector<std::size_t>& vertex_labels() const noexcept { return labels_; }

    Eigen::VectorXd degrees() const { return adjacency_.rowwise().sum(); }
    std::vector<std::size_t> neighbors(std::size_t v) const;

    /// Unordered pairs with non-zero weight.
    std::size_t edge_count() const;
    std::size_t component_count() const;

    /// Hop distance from `source` to every vertex; unreachable vertices get SIZE_MAX.
    std::vector<std::size_t> hop_distances(std::size_t source) const;

private:
    Eigen::MatrixXd adjacency_;
    std::vector<std::size_t> labels_;
};

/// Unnormalized Laplacian L = D - W.
class LaplacianMatrix {
public:
    explicit LaplacianMatrix(const Graph& g);

    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }

    /// FNV-1a over the raw entries; keys the spectral basis cache.
    std::uint64_t content_hash() const noexcept { return hash_; }

private:
    Eigen::MatrixXd entries_;
    std::uint64_t hash_;
};

/// 4-neighbour (Von Neumann) grid; vertex id = row * cols + col.
/// Both weight modes give unit weights on a unit-spaced grid.
Graph build_grid_graph(int rows, int cols, WeightMode mode = WeightMode::Binary);

struct SubsampledGraph {
    Graph graph;
    std::vector<std::size_t> kept_indices;  ///< new vertex id -> old vertex id, ascending
    std::vector<std::size_t> excluded;      ///< removed old vertex ids, ascending
};

/// Removes `exclude_count` vertices drawn uniformly without replacement.
SubsampledGraph subsample_graph(const Graph& g, std::size_t exclude_count, std::uint64_t seed);

/// Induced subgraph on `kept` (ascending old ids).
Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& kept);

LaplacianMatrix laplacian(const Graph& g);

// Edge-list text format: N on the first line, then "i j w" per unordered edge.
void write_edge_list(std::ostream& os, const Graph& g);
Graph read_edge_list(std::istream& is);
void save_edge_list(const std::string& path, const Graph& g);
Graph load_edge_list(const std::string& path);

std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

} // namespace gcnn

#endif // GCNN_GRAPH_HPP
