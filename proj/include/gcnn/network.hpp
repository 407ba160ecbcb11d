#ifndef GCNN_NETWORK_HPP
#define GCNN_NETWORK_HPP

#include "gcnn/coarsening.hpp"
#include "gcnn/conv.hpp"
#include "gcnn/dataset.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/interpolator.hpp"
#include "gcnn/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gcnn {

struct NetworkConfig {
    std::string architecture = "C20 P C50 P R F";
    std::size_t tracked_weights = 60;
    double beta = 0.05;
    int pool_levels = 2;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 100;
    std::size_t epochs = 500;
    std::uint64_t seed = 0;
    std::size_t classes = 10;
    bool relu_after_conv = false;
    KnotDomain knot_domain = KnotDomain::Rank;
};

enum class LayerKind { Conv, Pool, Relu, Dense };

struct LayerSpec {
    LayerKind kind;
    std::size_t width = 0;  // conv output maps or dense outputs
};

/// Parses strings such as "C20 P C50 P R F" (spaces optional). "C<k>" is a
/// spectral convolution with k maps, "P" an AMG pooling, "R" a ReLU, "F<k>"
/// a fully connected layer with k outputs; the final token must be a bare
/// "F", the classifier. Throws ConfigError.
std::vector<LayerSpec> parse_architecture(const std::string& text, bool relu_after_conv = false);

/// A named tensor. `value` is column-major over the reversed logical shape,
/// so its memory order is row-major over `shape`.
struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    Eigen::MatrixXd value;
};

/// Per-layer values retained by the forward pass for backward.
struct LayerCache {
    SignalBatch input;
    Eigen::MatrixXd spectral_input;  // conv: U^T x
    FilterBank filters;              // conv: interpolated k
};

struct ForwardResult {
    double loss = 0.0;              // mean softmax cross-entropy; NaN when no labels were given
    Eigen::MatrixXd probabilities;  // classes x S
    Eigen::MatrixXd logits;         // classes x S
    std::vector<SignalBatch> activations;  // output of every layer
    std::vector<LayerCache> caches;
    /// folded[l]: conv layer l was evaluated together with the pooling l + 1,
    /// so activations[l] is left empty.
    std::vector<bool> folded;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> parameters;  // aligned with Network::parameters()
    SignalBatch input;                        // filled when requested
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual std::string describe() const = 0;
    virtual std::size_t output_channels() const = 0;
    virtual std::size_t output_vertices() const = 0;
    virtual SignalBatch forward(const SignalBatch& in, const std::vector<Parameter>& params, LayerCache& cache) const = 0;
    virtual SignalBatch backward(const SignalBatch& grad_out, const LayerCache& cache,
                                 const std::vector<Parameter>& params, std::vector<Eigen::MatrixXd>& grads,
                                 bool need_input_grad) const = 0;
};

/// Graph at one depth of the network together with its spectral basis.
struct GraphLevel {
    std::shared_ptr<const Graph> graph;
    std::shared_ptr<const SpectralBasis> basis;
};

class Network {
public:
    /// Builds the layer chain, coarsening hierarchies and eigenbases, and
    /// initialises parameters: tracked weights ~ N(0, 1/I) for I input maps,
    /// dense weights ~ N(0, 1/fan_in), biases zero. Conv layers track min(M, N) weights at
    /// their level. Throws ConfigError.
    static Network build(const NetworkConfig& cfg, const Graph& input_graph, std::uint64_t seed);

    /// Conv layers followed by a pooling are evaluated in one step unless
    /// `keep_activations` asks for every intermediate output.
    ForwardResult forward(const SignalBatch& batch, std::span<const std::uint8_t> labels = {},
                          bool keep_activations = false) const;
    Gradients backward(const ForwardResult& result, std::span<const std::uint8_t> labels,
                       bool need_input_grad = false) const;

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;
    /// Replaces all parameters; names and shapes must match. Throws ConfigError.
    void load_parameters(const std::vector<Parameter>& params);

    const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }
    const std::vector<GraphLevel>& levels() const noexcept { return levels_; }
    const std::vector<std::shared_ptr<const CoarseningHierarchy>>& hierarchies() const noexcept {
        return hierarchies_;
    }
    /// Graph level index each layer reads from (meaningless after a dense layer).
    const std::vector<std::size_t>& layer_levels() const noexcept { return layer_levels_; }
    const NetworkConfig& config() const noexcept { return cfg_; }
    std::size_t input_vertices() const { return levels_.front().graph->size(); }

    struct LayerFilters {
        std::size_t layer;
        FilterBank filters;          // interpolated k, N x (I*O)
        Eigen::VectorXd eigenvalues;  // spectrum of the layer's graph
    };
    /// Interpolated spectral multipliers of every conv layer.
    std::vector<LayerFilters> interpolated_filters() const;

private:
    NetworkConfig cfg_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> layer_levels_;
    std::vector<GraphLevel> levels_;
    std::vector<std::shared_ptr<const CoarseningHierarchy>> hierarchies_;
    std::vector<Parameter> params_;
};

/// Softmax over each column.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);
/// Mean cross-entropy over columns.
double cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const std::uint8_t> labels);

/// velocity = momentum * velocity - lr * grad; param += velocity.
class SgdMomentum {
public:
    SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
    /// Throws NumericalFailure naming the parameter on non-finite gradients.
    void step(std::vector<Parameter>& params, const std::vector<Eigen::MatrixXd>& grads);
    const std::vector<Eigen::MatrixXd>& velocities() const noexcept { return velocity_; }

private:
    double lr_;
    double momentum_;
    std::vector<Eigen::MatrixXd> velocity_;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    std::vector<Parameter> best_parameters;
    std::size_t best_epoch = 0;
    double best_accuracy = -1.0;
    std::optional<std::string> failure;  // numerical failure that ended the run early
};

struct TrainOptions {
    std::size_t epochs = 1;
    std::size_t batch_size = 100;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::function<void(const EpochMetrics&)> on_epoch;
};

/// Seeded mini-batch SGD; evaluates the test set after every epoch and keeps
/// the best parameters.
TrainResult train(Network& net, const Dataset& train_set, const Dataset& test_set, const TrainOptions& options);

/// Fraction of correctly classified samples.
double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t batch_size = 500);
std::vector<std::size_t> predict(const Network& net, const SignalBatch& batch);

// Checkpoint container: "GCNN", u32 version, then per parameter: u32 name
// length, UTF-8 name, u32 rank, rank x u64 dims, f64 payload. Little-endian.
void save_checkpoint(const std::string& path, const std::vector<Parameter>& params);
std::vector<Parameter> load_checkpoint(const std::string& path);

/// Eigen thread count for the dense products (1 forces serial execution).
void set_threads(int threads);

} // namespace gcnn

#endif // GCNN_NETWORK_HPP
