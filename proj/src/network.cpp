#include "gcnn/network.hpp"

#include "gcnn/errors.hpp"

#include <Eigen/Core>

#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gcnn {
namespace {

Parameter make_parameter(std::string name, std::vector<std::size_t> shape) {
    std::size_t total = 1;
    for (auto d : shape) total *= d;
    // Storage is column-major over the reversed shape: the last dimension is the row index.
    const std::size_t rows = shape.empty() ? 1 : shape.back();
    const std::size_t cols = rows == 0 ? 0 : total / rows;
    return {std::move(name), std::move(shape),
            Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))};
}

void fill_normal(Eigen::MatrixXd& m, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

class ConvLayer final : public Layer {
public:
    ConvLayer(GraphLevel level, Interpolator interp, std::size_t in, std::size_t out, std::size_t tracked_index,
              std::size_t bias_index)
        : level_(std::move(level)),
          interp_(std::move(interp)),
          in_(in),
          out_(out),
          tracked_(tracked_index),
          bias_(bias_index) {}

    LayerKind kind() const override { return LayerKind::Conv; }
    std::string describe() const override {
        return "conv(" + std::to_string(in_) + "->" + std::to_string(out_) + ", N=" +
               std::to_string(level_.basis->size()) + ", M=" + std::to_string(interp_.tracked()) + ")";
    }
    std::size_t output_channels() const override { return out_; }
    std::size_t output_vertices() const override { return level_.basis->size(); }
    const Interpolator& interpolator() const { return interp_; }
    const SpectralBasis& basis() const { return *level_.basis; }
    FilterBank tracked_weights(const std::vector<Parameter>& params) const {
        return {params[tracked_].value, in_, out_};
    }

    SignalBatch forward(const SignalBatch& in, const std::vector<Parameter>& params, LayerCache& cache) const override {
        return forward_through(level_.basis->vectors, in, params, cache);
    }

    SignalBatch backward(const SignalBatch& grad_out, const LayerCache& cache, const std::vector<Parameter>&,
                         std::vector<Eigen::MatrixXd>& grads, bool need_input_grad) const override {
        return backward_through(level_.basis->vectors, grad_out, cache, grads, need_input_grad);
    }

    // Folds a directly following pooling into the inverse transform (R U).
    void attach_pooling(const CoarseningHierarchy& h) { pooled_synthesis_ = h.restriction * level_.basis->vectors; }
    bool has_pooling() const noexcept { return pooled_synthesis_.size() > 0; }

    SignalBatch forward_pooled(const SignalBatch& in, const std::vector<Parameter>& params, LayerCache& cache) const {
        return forward_through(pooled_synthesis_, in, params, cache);
    }
    SignalBatch backward_pooled(const SignalBatch& grad_out, const LayerCache& cache,
                                std::vector<Eigen::MatrixXd>& grads, bool need_input_grad) const {
        return backward_through(pooled_synthesis_, grad_out, cache, grads, need_input_grad);
    }

private:
    // `synthesis` is U, or R U for the folded pooling (unit row sums keep the bias).
    SignalBatch forward_through(const Eigen::MatrixXd& synthesis, const SignalBatch& in,
                                const std::vector<Parameter>& params, LayerCache& cache) const {
        if (in.channels != in_ || in.vertices() != level_.basis->size()) {
            throw std::invalid_argument("conv layer: input shape does not match layer");
        }
        cache.spectral_input = gft(*level_.basis, in.data);
        cache.filters = interpolate_filters(interp_, FilterBank(params[tracked_].value, in_, out_));
        SignalBatch y(synthesis * spectral_multiply(cache.spectral_input, in.samples, cache.filters), in.samples, out_);
        const auto& bias = params[bias_].value;
        for (std::size_t s = 0; s < in.samples; ++s) {
            for (std::size_t o = 0; o < out_; ++o) y.signal(s, o).array() += bias(static_cast<Eigen::Index>(o), 0);
        }
        return y;
    }

    SignalBatch backward_through(const Eigen::MatrixXd& synthesis, const SignalBatch& grad_out, const LayerCache& cache,
                                 std::vector<Eigen::MatrixXd>& grads, bool need_input_grad) const {
        const std::size_t samples = grad_out.samples;
        const Eigen::MatrixXd spectral_grad = synthesis.transpose() * grad_out.data;
        const FilterBank dk = spectral_correlate(spectral_grad, cache.spectral_input, samples, in_, out_);
        grads[tracked_].noalias() += interp_.phi.transpose() * dk.values;
        for (std::size_t s = 0; s < samples; ++s) {
            for (std::size_t o = 0; o < out_; ++o) grads[bias_](static_cast<Eigen::Index>(o), 0) += grad_out.signal(s, o).sum();
        }
        if (!need_input_grad) return {};
        return {igft(*level_.basis, spectral_multiply_adjoint(spectral_grad, samples, cache.filters)), samples, in_};
    }

private:
    GraphLevel level_;
    Interpolator interp_;
    std::size_t in_, out_;
    std::size_t tracked_, bias_;
    Eigen::MatrixXd pooled_synthesis_;
};

class PoolLayer final : public Layer {
public:
    PoolLayer(std::shared_ptr<const CoarseningHierarchy> h, std::size_t channels)
        : h_(std::move(h)), channels_(channels) {}

    LayerKind kind() const override { return LayerKind::Pool; }
    std::string describe() const override {
        return "pool(" + std::to_string(h_->fine_size()) + "->" + std::to_string(h_->coarse_size()) + ", levels=" +
               std::to_string(h_->levels.size()) + ")";
    }
    std::size_t output_channels() const override { return channels_; }
    std::size_t output_vertices() const override { return h_->coarse_size(); }

    SignalBatch forward(const SignalBatch& in, const std::vector<Parameter>&, LayerCache&) const override {
        return pool_forward(*h_, in);
    }
    SignalBatch backward(const SignalBatch& grad_out, const LayerCache&, const std::vector<Parameter>&,
                         std::vector<Eigen::MatrixXd>&, bool need_input_grad) const override {
        if (!need_input_grad) return {};
        return pool_backward(*h_, grad_out);
    }

private:
    std::shared_ptr<const CoarseningHierarchy> h_;
    std::size_t channels_;
};

class ReluLayer final : public Layer {
public:
    ReluLayer(std::size_t channels, std::size_t vertices) : channels_(channels), vertices_(vertices) {}

    LayerKind kind() const override { return LayerKind::Relu; }
    std::string describe() const override { return "relu"; }
    std::size_t output_channels() const override { return channels_; }
    std::size_t output_vertices() const override { return vertices_; }

    SignalBatch forward(const SignalBatch& in, const std::vector<Parameter>&, LayerCache& cache) const override {
        cache.input = in;
        return {in.data.cwiseMax(0.0), in.samples, in.channels};
    }
    SignalBatch backward(const SignalBatch& grad_out, const LayerCache& cache, const std::vector<Parameter>&,
                         std::vector<Eigen::MatrixXd>&, bool need_input_grad) const override {
        if (!need_input_grad) return {};
        Eigen::MatrixXd g = (cache.input.data.array() < 0.0).select(0.0, grad_out.data);
        return {std::move(g), grad_out.samples, grad_out.channels};
    }

private:
    std::size_t channels_, vertices_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in_vertices, std::size_t in_channels, std::size_t outputs, std::size_t weight_index,
               std::size_t bias_index)
        : in_vertices_(in_vertices),
          in_channels_(in_channels),
          outputs_(outputs),
          weight_(weight_index),
          bias_(bias_index) {}

    LayerKind kind() const override { return LayerKind::Dense; }
    std::string describe() const override {
        return "dense(" + std::to_string(in_vertices_ * in_channels_) + "->" + std::to_string(outputs_) + ")";
    }
    std::size_t output_channels() const override { return 1; }
    std::size_t output_vertices() const override { return outputs_; }

    SignalBatch forward(const SignalBatch& in, const std::vector<Parameter>& params, LayerCache& cache) const override {
        if (in.vertices() != in_vertices_ || in.channels != in_channels_) {
            throw std::invalid_argument("dense layer: input shape does not match layer");
        }
        cache.input = in;
        const auto x = flat(in);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(outputs_), x.cols());
        y.noalias() = params[weight_].value.transpose() * x;
        y.colwise() += params[bias_].value.col(0);
        return {std::move(y), in.samples, 1};
    }

    SignalBatch backward(const SignalBatch& grad_out, const LayerCache& cache, const std::vector<Parameter>& params,
                         std::vector<Eigen::MatrixXd>& grads, bool need_input_grad) const override {
        const auto x = flat(cache.input);
        grads[weight_].noalias() += x * grad_out.data.transpose();
        grads[bias_].col(0) += grad_out.data.rowwise().sum();
        if (!need_input_grad) return {};
        Eigen::MatrixXd dx(x.rows(), x.cols());
        dx.noalias() = params[weight_].value * grad_out.data;
        // Same memory layout as the N x (S*C) input.
        Eigen::MatrixXd reshaped = Eigen::Map<const Eigen::MatrixXd>(
            dx.data(), static_cast<Eigen::Index>(in_vertices_), static_cast<Eigen::Index>(grad_out.samples * in_channels_));
        return {std::move(reshaped), grad_out.samples, in_channels_};
    }

private:
    Eigen::Map<const Eigen::MatrixXd> flat(const SignalBatch& in) const {
        return {in.data.data(), static_cast<Eigen::Index>(in_vertices_ * in_channels_),
                static_cast<Eigen::Index>(in.samples)};
    }

    std::size_t in_vertices_, in_channels_, outputs_;
    std::size_t weight_, bias_;
};

} // namespace

std::vector<LayerSpec> parse_architecture(const std::string& text, bool relu_after_conv) {
    std::vector<LayerSpec> specs;
    std::size_t pos = 0;
    auto read_number = [&]() -> std::optional<std::size_t> {
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (start == pos) return std::nullopt;
        return static_cast<std::size_t>(std::stoull(text.substr(start, pos - start)));
    };
    while (pos < text.size()) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[pos])));
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            ++pos;
            continue;
        }
        ++pos;
        const auto number = read_number();
        switch (c) {
        case 'C':
            if (!number || *number == 0) throw ConfigError("architecture: 'C' needs a positive map count");
            specs.push_back({LayerKind::Conv, *number});
            if (relu_after_conv) specs.push_back({LayerKind::Relu, 0});
            break;
        case 'P':
        case 'R':
            if (number) throw ConfigError(std::string("architecture: '") + c + "' takes no count");
            specs.push_back({c == 'P' ? LayerKind::Pool : LayerKind::Relu, 0});
            break;
        case 'F':
            if (number && *number == 0) throw ConfigError("architecture: 'F' needs a positive width");
            specs.push_back({LayerKind::Dense, number.value_or(0)});
            break;
        default:
            throw ConfigError(std::string("architecture: unknown layer '") + text[pos - 1] + "'");
        }
    }
    if (specs.empty() || specs.back().kind != LayerKind::Dense || specs.back().width != 0) {
        throw ConfigError("architecture: must end with the classifier 'F'");
    }
    for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
        if (specs[i].kind == LayerKind::Dense && specs[i].width == 0) {
            throw ConfigError("architecture: hidden fully connected layers need a width, e.g. F128");
        }
    }
    return specs;
}

Network Network::build(const NetworkConfig& cfg, const Graph& input_graph, std::uint64_t seed) {
    if (cfg.classes < 2) throw ConfigError("network: need at least two classes");
    if (cfg.tracked_weights < 1) throw ConfigError("network: tracked weight count must be positive");
    const auto specs = parse_architecture(cfg.architecture, cfg.relu_after_conv);

    Network net;
    net.cfg_ = cfg;
    BasisCache cache;
    std::mt19937_64 rng(seed);
    net.levels_.push_back({std::make_shared<const Graph>(input_graph), nullptr});

    std::size_t vertices = input_graph.size();
    std::size_t channels = 1;
    bool flat = false;
    std::size_t level = 0;
    std::size_t index = 0;
    for (const auto& spec : specs) {
        const std::string prefix = "layer" + std::to_string(index);
        net.layer_levels_.push_back(level);
        switch (spec.kind) {
        case LayerKind::Conv: {
            if (flat) throw ConfigError(prefix + ": convolution after a fully connected layer");
            auto& lvl = net.levels_[level];
            if (!lvl.basis) lvl.basis = cache.get(laplacian(*lvl.graph));
            const std::size_t m = std::min(cfg.tracked_weights, vertices);
            Interpolator interp = cfg.knot_domain == KnotDomain::Rank ? build_interpolator(m, vertices)
                                                                       : build_interpolator(m, lvl.basis->values);
            const std::size_t tracked = net.params_.size();
            net.params_.push_back(make_parameter(prefix + ".tracked", {channels, spec.width, m}));
            fill_normal(net.params_.back().value, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
            net.params_.push_back(make_parameter(prefix + ".bias", {spec.width}));
            net.layers_.push_back(
                std::make_unique<ConvLayer>(lvl, std::move(interp), channels, spec.width, tracked, tracked + 1));
            channels = spec.width;
            break;
        }
        case LayerKind::Pool: {
            if (flat) throw ConfigError(prefix + ": pooling after a fully connected layer");
            if (vertices < 2) throw ConfigError(prefix + ": cannot pool a graph with " + std::to_string(vertices) + " vertex");
            std::shared_ptr<const CoarseningHierarchy> h;
            try {
                h = std::make_shared<const CoarseningHierarchy>(amg_coarsen(
                    *net.levels_[level].graph, CoarseningOptions{cfg.beta, cfg.pool_levels, cfg.seed, false}));
            } catch (const CoarseningStall& e) {
                throw ConfigError(prefix + ": " + e.what());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(prefix + ": " + e.what());
            }
            net.hierarchies_.push_back(h);
            net.levels_.push_back({std::make_shared<const Graph>(h->coarse_graph()), nullptr});
            ++level;
            vertices = h->coarse_size();
            if (!net.layers_.empty()) {
                if (auto* conv = dynamic_cast<ConvLayer*>(net.layers_.back().get())) conv->attach_pooling(*h);
            }
            net.layers_.push_back(std::make_unique<PoolLayer>(std::move(h), channels));
            break;
        }
        case LayerKind::Relu:
            net.layers_.push_back(std::make_unique<ReluLayer>(channels, vertices));
            break;
        case LayerKind::Dense: {
            const std::size_t outputs = spec.width == 0 ? cfg.classes : spec.width;
            const std::size_t fan_in = vertices * channels;
            const std::size_t weight = net.params_.size();
            net.params_.push_back(make_parameter(prefix + ".weight", {outputs, fan_in}));
            fill_normal(net.params_.back().value, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
            net.params_.push_back(make_parameter(prefix + ".bias", {outputs}));
            net.layers_.push_back(std::make_unique<DenseLayer>(vertices, channels, outputs, weight, weight + 1));
            vertices = outputs;
            channels = 1;
            flat = true;
            break;
        }
        }
        ++index;
    }
    return net;
}

std::size_t Network::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += static_cast<std::size_t>(p.value.size());
    return total;
}

void Network::load_parameters(const std::vector<Parameter>& params) {
    if (params.size() != params_.size()) {
        throw ConfigError("checkpoint has " + std::to_string(params.size()) + " parameters, network expects " +
                          std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != params_[i].name || params[i].shape != params_[i].shape) {
            throw ConfigError("checkpoint parameter '" + params[i].name + "' does not match network parameter '" +
                              params_[i].name + "'");
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params_[i].value = params[i].value;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.cols(); ++s) {
        const double peak = logits.col(s).maxCoeff();
        p.col(s) = (logits.col(s).array() - peak).exp();
        p.col(s) /= p.col(s).sum();
    }
    return p;
}

double cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const std::uint8_t> labels) {
    if (static_cast<std::size_t>(probabilities.cols()) != labels.size()) {
        throw std::invalid_argument("cross_entropy: label count does not match batch size");
    }
    double total = 0.0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        total -= std::log(probabilities(labels[s], static_cast<Eigen::Index>(s)));
    }
    return total / static_cast<double>(labels.size());
}

ForwardResult Network::forward(const SignalBatch& batch, std::span<const std::uint8_t> labels,
                               bool keep_activations) const {
    if (batch.vertices() != input_vertices() || batch.channels != 1) {
        throw std::invalid_argument("network forward: batch is not a single-channel signal on the input graph");
    }
    if (!labels.empty() && labels.size() != batch.samples) {
        throw std::invalid_argument("network forward: label count does not match batch size");
    }
    ForwardResult result;
    result.caches.resize(layers_.size());
    result.activations.reserve(layers_.size());
    result.folded.assign(layers_.size(), false);
    const SignalBatch* current = &batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto* conv = dynamic_cast<const ConvLayer*>(layers_[l].get());
        if (!keep_activations && conv && conv->has_pooling()) {
            result.folded[l] = true;
            result.activations.emplace_back();
            ++l;
            result.activations.push_back(conv->forward_pooled(*current, params_, result.caches[l - 1]));
        } else {
            result.activations.push_back(layers_[l]->forward(*current, params_, result.caches[l]));
        }
        if (!result.activations.back().all_finite()) {
            throw NumericalFailure("non-finite activation in layer " + std::to_string(l) + " (" +
                                   layers_[l]->describe() + ")");
        }
        current = &result.activations.back();
    }
    result.logits = current->data;
    result.probabilities = softmax(result.logits);
    if (labels.empty()) {
        result.loss = std::numeric_limits<double>::quiet_NaN();
    } else {
        // log-sum-exp form avoids log(0) for saturated predictions
        double total = 0.0;
        for (std::size_t s = 0; s < labels.size(); ++s) {
            const auto col = result.logits.col(static_cast<Eigen::Index>(s));
            const double peak = col.maxCoeff();
            total += peak + std::log((col.array() - peak).exp().sum()) - col(labels[s]);
        }
        result.loss = total / static_cast<double>(labels.size());
    }
    return result;
}

Gradients Network::backward(const ForwardResult& result, std::span<const std::uint8_t> labels,
                            bool need_input_grad) const {
    const auto samples = static_cast<std::size_t>(result.probabilities.cols());
    if (labels.size() != samples || result.caches.size() != layers_.size() || result.folded.size() != layers_.size()) {
        throw std::logic_error("network backward: forward result does not match labels or layers");
    }
    Gradients grads;
    grads.parameters.reserve(params_.size());
    for (const auto& p : params_) grads.parameters.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));

    Eigen::MatrixXd dlogits = result.probabilities;
    for (std::size_t s = 0; s < samples; ++s) dlogits(labels[s], static_cast<Eigen::Index>(s)) -= 1.0;
    dlogits /= static_cast<double>(samples);

    SignalBatch grad(std::move(dlogits), samples, 1);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l > 0 && result.folded[l - 1]) {
            --l;
            const auto& conv = static_cast<const ConvLayer&>(*layers_[l]);
            grad = conv.backward_pooled(grad, result.caches[l], grads.parameters, l > 0 || need_input_grad);
            continue;
        }
        const bool need = l > 0 || need_input_grad;
        grad = layers_[l]->backward(grad, result.caches[l], params_, grads.parameters, need);
    }
    if (need_input_grad) grads.input = std::move(grad);
    return grads;
}

std::vector<Network::LayerFilters> Network::interpolated_filters() const {
    std::vector<LayerFilters> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto* conv = dynamic_cast<const ConvLayer*>(layers_[l].get());
        if (!conv) continue;
        out.push_back({l, interpolate_filters(conv->interpolator(), conv->tracked_weights(params_)),
                       conv->basis().values});
    }
    return out;
}

void set_threads(int threads) { Eigen::setNbThreads(std::max(1, threads)); }

} // namespace gcnn
