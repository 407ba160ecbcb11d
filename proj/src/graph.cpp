#include "gcnn/graph.hpp"

#include "gcnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gcnn {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

Graph::Graph(Eigen::MatrixXd adjacency, std::vector<std::size_t> vertex_labels)
    : adjacency_(std::move(adjacency)), labels_(std::move(vertex_labels)) {
    const auto n = adjacency_.rows();
    if (n < 1 || adjacency_.cols() != n) {
        throw std::invalid_argument("Graph: adjacency must be a non-empty square matrix");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (adjacency_(i, i) != 0.0) {
            throw std::invalid_argument("Graph: self loop at vertex " + std::to_string(i));
        }
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = adjacency_(i, j);
            if (!std::isfinite(w) || w < 0.0) {
                throw std::invalid_argument("Graph: negative or non-finite weight");
            }
            if (w != adjacency_(j, i)) {
                throw std::invalid_argument("Graph: adjacency is not symmetric");
            }
        }
    }
    if (labels_.empty()) {
        labels_.resize(static_cast<std::size_t>(n));
        std::iota(labels_.begin(), labels_.end(), std::size_t{0});
    } else if (labels_.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("Graph: vertex label count does not match vertex count");
    }
}

std::vector<std::size_t> Graph::neighbors(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < size(); ++j) {
        if (adjacency_(v, j) > 0.0) out.push_back(j);
    }
    return out;
}

std::size_t Graph::edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = i + 1; j < size(); ++j) {
            if (adjacency_(i, j) > 0.0) ++count;
        }
    }
    return count;
}

std::vector<std::size_t> Graph::hop_distances(std::size_t source) const {
    constexpr auto unreachable = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(size(), unreachable);
    std::queue<std::size_t> frontier;
    dist.at(source) = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        const auto v = frontier.front();
        frontier.pop();
        for (auto u : neighbors(v)) {
            if (dist[u] == unreachable) {
                dist[u] = dist[v] + 1;
                frontier.push(u);
            }
        }
    }
    return dist;
}

std::size_t Graph::component_count() const {
    std::vector<bool> seen(size(), false);
    std::size_t components = 0;
    for (std::size_t s = 0; s < size(); ++s) {
        if (seen[s]) continue;
        ++components;
        const auto dist = hop_distances(s);
        for (std::size_t v = 0; v < size(); ++v) {
            if (dist[v] != std::numeric_limits<std::size_t>::max()) seen[v] = true;
        }
    }
    return components;
}

LaplacianMatrix::LaplacianMatrix(const Graph& g) {
    const Eigen::MatrixXd& w = g.adjacency();
    entries_ = -w;
    entries_.diagonal() = w.rowwise().sum();
    hash_ = fnv1a(entries_.data(), sizeof(double) * static_cast<std::size_t>(entries_.size()));
}

LaplacianMatrix laplacian(const Graph& g) { return LaplacianMatrix(g); }

Graph build_grid_graph(int rows, int cols, WeightMode mode) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("build_grid_graph: dimensions must be positive");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    // Neighbours are one unit apart, so the Euclidean weight equals the binary one.
    const double unit = mode == WeightMode::Euclidean ? std::hypot(1.0, 0.0) : 1.0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Eigen::Index v = static_cast<Eigen::Index>(r) * cols + c;
            if (c + 1 < cols) w(v, v + 1) = w(v + 1, v) = unit;
            if (r + 1 < rows) w(v, v + cols) = w(v + cols, v) = unit;
        }
    }
    return Graph(std::move(w));
}

Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& kept) {
    const auto m = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd w(m, m);
    std::vector<std::size_t> labels(kept.size());
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto oa = kept[static_cast<std::size_t>(a)];
        if (oa >= g.size()) throw std::invalid_argument("induced_subgraph: index out of range");
        labels[static_cast<std::size_t>(a)] = g.vertex_labels()[oa];
        for (Eigen::Index b = 0; b < m; ++b) {
            w(a, b) = g.weight(oa, kept[static_cast<std::size_t>(b)]);
        }
    }
    return Graph(std::move(w), std::move(labels));
}

SubsampledGraph subsample_graph(const Graph& g, std::size_t exclude_count, std::uint64_t seed) {
    if (exclude_count >= g.size()) {
        throw std::invalid_argument("subsample_graph: exclude_count must be smaller than the vertex count");
    }
    // Partial Fisher-Yates over vertex ids.
    std::vector<std::size_t> ids(g.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < exclude_count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    std::vector<std::size_t> excluded(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(exclude_count));
    std::vector<std::size_t> kept(ids.begin() + static_cast<std::ptrdiff_t>(exclude_count), ids.end());
    std::sort(excluded.begin(), excluded.end());
    std::sort(kept.begin(), kept.end());
    Graph sub = induced_subgraph(g, kept);
    return {std::move(sub), std::move(kept), std::move(excluded)};
}

void write_edge_list(std::ostream& os, const Graph& g) {
    os << g.size() << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            if (g.weight(i, j) > 0.0) os << i << ' ' << j << ' ' << g.weight(i, j) << '\n';
        }
    }
}

Graph read_edge_list(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("edge list: missing vertex count on line 1");
    std::istringstream header(line);
    long long n = 0;
    if (!(header >> n) || n < 1) throw FormatError("edge list: invalid vertex count on line 1");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        long long i = 0, j = 0;
        double weight = 0.0;
        if (!(row >> i >> j >> weight)) {
            throw FormatError("edge list: malformed edge on line " + std::to_string(lineno));
        }
        if (i < 0 || j < 0 || i >= n || j >= n || i == j || weight < 0.0 || !std::isfinite(weight)) {
            throw FormatError("edge list: invalid edge on line " + std::to_string(lineno));
        }
        w(i, j) = w(j, i) = weight;
    }
    return Graph(std::move(w));
}

void save_edge_list(const std::string& path, const Graph& g) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_edge_list(os, g);
}

Graph load_edge_list(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return read_edge_list(is);
}

} // namespace gcnn
