#include "gcnn/binary_io.hpp"
#include "gcnn/errors.hpp"
#include "gcnn/network.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>

namespace gcnn {
namespace {

constexpr char kCheckpointMagic[4] = {'G', 'C', 'N', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace

void SgdMomentum::step(std::vector<Parameter>& params, const std::vector<Eigen::MatrixXd>& grads) {
    if (grads.size() != params.size()) throw std::invalid_argument("sgd_step: gradient count != parameter count");
    if (velocity_.empty()) {
        for (const auto& p : params) velocity_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols()) {
            throw std::invalid_argument("sgd_step: gradient shape mismatch for " + params[i].name);
        }
        if (!grads[i].allFinite()) {
            throw NumericalFailure("sgd_step: non-finite gradient for parameter " + params[i].name +
                                   " (max |g| = " + std::to_string(grads[i].cwiseAbs().maxCoeff()) + ")");
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] - lr_ * grads[i];
        params[i].value += velocity_[i];
    }
}

std::vector<std::size_t> predict(const Network& net, const SignalBatch& batch) {
    const auto result = net.forward(batch);
    std::vector<std::size_t> out(batch.samples);
    for (std::size_t s = 0; s < batch.samples; ++s) {
        Eigen::Index best = 0;
        result.logits.col(static_cast<Eigen::Index>(s)).maxCoeff(&best);
        out[s] = static_cast<std::size_t>(best);
    }
    return out;
}

double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) return 0.0;
    batch_size = std::max<std::size_t>(batch_size, 1);
    std::size_t correct = 0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        rows.resize(std::min(batch_size, data.size() - start));
        std::iota(rows.begin(), rows.end(), start);
        const auto predicted = predict(net, data.batch(rows));
        for (std::size_t s = 0; s < rows.size(); ++s) correct += predicted[s] == data.labels[rows[s]];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(Network& net, const Dataset& train_set, const Dataset& test_set, const TrainOptions& options) {
    if (train_set.vertices() != net.input_vertices() || test_set.vertices() != net.input_vertices()) {
        throw std::invalid_argument("train: dataset signals do not live on the network's input graph");
    }
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    const std::size_t batch_size = std::max<std::size_t>(options.batch_size, 1);

    TrainResult result;
    SgdMomentum optimizer(options.learning_rate, options.momentum);
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    try {
        for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
            const auto start = std::chrono::steady_clock::now();
            std::shuffle(order.begin(), order.end(), rng);
            double loss_sum = 0.0;
            for (std::size_t first = 0; first < order.size(); first += batch_size) {
                const std::vector<std::size_t> rows(
                    order.begin() + static_cast<std::ptrdiff_t>(first),
                    order.begin() + static_cast<std::ptrdiff_t>(std::min(first + batch_size, order.size())));
                const auto labels = train_set.batch_labels(rows);
                const auto forward = net.forward(train_set.batch(rows), labels);
                const auto grads = net.backward(forward, labels);
                optimizer.step(net.parameters(), grads.parameters);
                loss_sum += forward.loss * static_cast<double>(rows.size());
            }
            EpochMetrics m;
            m.epoch = epoch;
            m.train_loss = loss_sum / static_cast<double>(order.size());
            m.test_accuracy = evaluate_accuracy(net, test_set);
            m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            result.metrics.push_back(m);
            if (m.test_accuracy > result.best_accuracy) {
                result.best_accuracy = m.test_accuracy;
                result.best_epoch = epoch;
                result.best_parameters = net.parameters();
            }
            if (options.on_epoch) options.on_epoch(m);
        }
    } catch (const NumericalFailure& e) {
        result.failure = e.what();
    }
    return result;
}

void save_checkpoint(const std::string& path, const std::vector<Parameter>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os.write(kCheckpointMagic, 4);
    io::write_le(os, kCheckpointVersion);
    for (const auto& p : params) {
        io::write_le(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        io::write_le(os, static_cast<std::uint32_t>(p.shape.size()));
        for (auto d : p.shape) io::write_le(os, static_cast<std::uint64_t>(d));
        io::write_doubles(os, p.value.data(), static_cast<std::size_t>(p.value.size()));
    }
    if (!os) throw FormatError("failed writing " + path);
}

std::vector<Parameter> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) {
        throw FormatError(path + ": not a checkpoint (bad magic at byte offset 0)");
    }
    if (const auto version = io::read_le<std::uint32_t>(is, path); version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    std::vector<Parameter> params;
    while (is.peek() != std::char_traits<char>::eof()) {
        Parameter p;
        const auto name_length = io::read_le<std::uint32_t>(is, path);
        if (name_length > 4096) throw FormatError(path + ": implausible parameter name length");
        p.name.resize(name_length);
        if (!is.read(p.name.data(), name_length)) throw FormatError(path + ": truncated parameter name");
        const auto rank = io::read_le<std::uint32_t>(is, path);
        if (rank > 8) throw FormatError(path + ": implausible rank for " + p.name);
        std::size_t total = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            p.shape.push_back(static_cast<std::size_t>(io::read_le<std::uint64_t>(is, path)));
            total *= p.shape.back();
        }
        if (total > (std::size_t{1} << 32)) throw FormatError(path + ": implausible size for " + p.name);
        const std::size_t rows = p.shape.empty() ? 1 : p.shape.back();
        p.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows == 0 ? 0 : total / rows));
        io::read_doubles(is, p.value.data(), total, path + " (" + p.name + ")");
        params.push_back(std::move(p));
    }
    return params;
}

} // namespace gcnn
