#include "doctest.h"
#include "oracles.hpp"

#include "gcnn/errors.hpp"
#include "gcnn/network.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

using namespace gcnn;
namespace fs = std::filesystem;

namespace {

std::vector<Parameter> one_parameter(double value) {
    return {Parameter{"w", {2}, Eigen::MatrixXd::Constant(2, 1, value)}};
}

std::string data_file(const char* name) { return (fs::path(GCNN_DATA_DIR) / name).string(); }

} // namespace

TEST_CASE("sgd without momentum is plain gradient descent") {
    auto params = one_parameter(1.0);
    SgdMomentum opt(0.1, 0.0);
    opt.step(params, {Eigen::Vector2d(2.0, -4.0)});
    CHECK(params[0].value(0, 0) == doctest::Approx(0.8));
    CHECK(params[0].value(1, 0) == doctest::Approx(1.4));
}

TEST_CASE("zero gradients leave parameters unchanged") {
    auto params = one_parameter(3.0);
    SgdMomentum opt(0.5, 0.9);
    for (int i = 0; i < 3; ++i) opt.step(params, {Eigen::Vector2d::Zero()});
    CHECK(params[0].value == Eigen::MatrixXd::Constant(2, 1, 3.0));
}

TEST_CASE("momentum recurrence over two steps") {
    // v1 = -lr g, p1 = p - lr g; v2 = mu v1 - lr g = -(1 + mu) lr g, p2 = p - (2 + mu) lr g
    auto params = one_parameter(1.0);
    SgdMomentum opt(0.01, 0.9);
    const Eigen::Vector2d g(1.0, -2.0);
    opt.step(params, {g});
    CHECK(opt.velocities()[0](0, 0) == doctest::Approx(-0.01));
    opt.step(params, {g});
    CHECK(opt.velocities()[0](0, 0) == doctest::Approx(-0.019));
    CHECK(opt.velocities()[0](1, 0) == doctest::Approx(0.038));
    CHECK(params[0].value(0, 0) == doctest::Approx(1.0 - 0.029));
    CHECK(params[0].value(1, 0) == doctest::Approx(1.0 + 0.058));
}

TEST_CASE("non-finite gradients abort the step") {
    auto params = one_parameter(1.0);
    SgdMomentum opt(0.1, 0.9);
    CHECK_THROWS_WITH_AS(opt.step(params, {Eigen::Vector2d(1.0, std::numeric_limits<double>::infinity())}),
                         doctest::Contains("w"), NumericalFailure);
    CHECK(params[0].value == Eigen::MatrixXd::Constant(2, 1, 1.0));
    CHECK_THROWS_AS(opt.step(params, {Eigen::Vector3d::Zero()}), std::invalid_argument);
    CHECK_THROWS_AS(opt.step(params, {}), std::invalid_argument);
}

TEST_CASE("training on real digits") {
    const auto train_full = load_mnist(data_file("train-images-idx3-ubyte"), data_file("train-labels-idx1-ubyte"));
    const auto grid = build_grid_graph(28, 28);

    SUBCASE("ten samples are memorised") {
        const auto ten = train_full.head(10);
        NetworkConfig cfg;
        auto net = Network::build(cfg, grid, 1);
        TrainOptions opts;
        opts.epochs = 200;
        opts.batch_size = 10;
        opts.seed = 1;
        const auto result = train(net, ten, ten, opts);
        CHECK_FALSE(result.failure);
        CHECK(result.metrics.size() == 200);
        CHECK(evaluate_accuracy(net, ten) == 1.0);
    }

    SUBCASE("loss falls over the first epochs") {
        const auto subset = train_full.head(1000);
        NetworkConfig cfg;
        auto net = Network::build(cfg, grid, 2);
        TrainOptions opts;
        opts.epochs = 5;
        opts.seed = 2;
        const auto result = train(net, subset, subset.head(100), opts);
        REQUIRE(result.metrics.size() == 5);
        int falling = 0;
        for (std::size_t e = 1; e < 5; ++e) falling += result.metrics[e].train_loss <= result.metrics[e - 1].train_loss;
        CHECK(falling >= 4);
        CHECK(result.best_epoch >= 1);
        CHECK(result.best_parameters.size() == net.parameters().size());
    }
}

TEST_CASE("training is reproducible") {
    std::mt19937_64 rng(1);
    Dataset d;
    d.images = oracle::random_matrix(rng, 16, 40).cwiseAbs();
    d.labels.resize(40);
    for (std::size_t s = 0; s < 40; ++s) d.labels[s] = static_cast<std::uint8_t>(s % 3);
    NetworkConfig cfg;
    cfg.architecture = "C2 P C2 R F";
    cfg.tracked_weights = 6;
    cfg.classes = 3;
    TrainOptions opts;
    opts.epochs = 3;
    opts.batch_size = 8;
    opts.seed = 9;
    auto a = Network::build(cfg, build_grid_graph(4, 4), 9);
    auto b = Network::build(cfg, build_grid_graph(4, 4), 9);
    const auto ra = train(a, d, d, opts);
    const auto rb = train(b, d, d, opts);
    REQUIRE(ra.metrics.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(ra.metrics[e].train_loss == rb.metrics[e].train_loss);
        CHECK(ra.metrics[e].test_accuracy == rb.metrics[e].test_accuracy);
    }
    for (std::size_t p = 0; p < a.parameters().size(); ++p) CHECK(a.parameters()[p].value == b.parameters()[p].value);

    Dataset empty;
    empty.images = Eigen::MatrixXd::Zero(16, 0);
    CHECK_THROWS_AS(train(a, empty, d, opts), std::invalid_argument);
    Dataset wrong;
    wrong.images = Eigen::MatrixXd::Zero(5, 2);
    wrong.labels = {0, 1};
    CHECK_THROWS_AS(train(a, wrong, d, opts), std::invalid_argument);
}

TEST_CASE("numerical failures end training with a partial log") {
    Dataset d;
    d.images = Eigen::MatrixXd::Ones(4, 6);
    d.labels = {0, 1, 0, 1, 0, 1};
    NetworkConfig cfg;
    cfg.architecture = "F";
    cfg.classes = 2;
    auto net = Network::build(cfg, build_grid_graph(2, 2), 0);
    TrainOptions opts;
    opts.epochs = 5;
    opts.batch_size = 3;
    opts.learning_rate = 1e308;
    opts.momentum = 0.0;
    const auto result = train(net, d, d, opts);
    CHECK(result.failure.has_value());
    CHECK(result.metrics.size() < 5);
}

TEST_CASE("checkpoint round trip and corruption") {
    NetworkConfig cfg;
    cfg.architecture = "C3 P C2 R F";
    cfg.tracked_weights = 5;
    const auto net = Network::build(cfg, build_grid_graph(5, 5), 12);
    const auto path = (fs::temp_directory_path() / "gcnn_test.ckpt").string();
    save_checkpoint(path, net.parameters());
    const auto back = load_checkpoint(path);
    REQUIRE(back.size() == net.parameters().size());
    for (std::size_t p = 0; p < back.size(); ++p) {
        CHECK(back[p].name == net.parameters()[p].name);
        CHECK(back[p].shape == net.parameters()[p].shape);
        CHECK(back[p].value == net.parameters()[p].value);
    }
    auto other = Network::build(cfg, build_grid_graph(5, 5), 13);
    other.load_parameters(back);
    CHECK(other.parameters()[0].value == net.parameters()[0].value);

    auto mismatched = cfg;
    mismatched.architecture = "C4 P C2 R F";
    auto wrong = Network::build(mismatched, build_grid_graph(5, 5), 1);
    CHECK_THROWS_AS(wrong.load_parameters(back), ConfigError);

    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 5);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    fs::resize_file(path, 6);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    fs::remove(path);
}

TEST_CASE("prediction and accuracy helpers") {
    NetworkConfig cfg;
    cfg.architecture = "F";
    cfg.classes = 3;
    auto net = Network::build(cfg, build_grid_graph(1, 2), 0);
    net.parameters()[0].value.setZero();
    net.parameters()[0].value(0, 0) = 1.0;  // logit 0 reads vertex 0
    net.parameters()[0].value(1, 2) = 1.0;  // logit 2 reads vertex 1
    Dataset d;
    d.images.resize(2, 3);
    d.images << 1.0, 0.0, 0.2,
                0.0, 1.0, 0.1;
    d.labels = {0, 2, 2};
    CHECK(predict(net, d.batch({0, 1, 2})) == std::vector<std::size_t>{0, 2, 0});
    CHECK(evaluate_accuracy(net, d, 2) == doctest::Approx(2.0 / 3.0));
}
