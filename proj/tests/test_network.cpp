#include "doctest.h"
#include "oracles.hpp"

#include "gcnn/errors.hpp"
#include "gcnn/network.hpp"

#include <cmath>
#include <numeric>

using namespace gcnn;

namespace {

Graph path3() {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
    w(0, 1) = w(1, 0) = w(1, 2) = w(2, 1) = 1.0;
    return Graph(w);
}

SignalBatch random_batch(std::mt19937_64& rng, std::size_t samples, std::size_t vertices) {
    return SignalBatch(oracle::random_matrix(rng, static_cast<Eigen::Index>(vertices),
                                             static_cast<Eigen::Index>(samples)),
                       samples, 1);
}

std::vector<std::uint8_t> random_labels(std::mt19937_64& rng, std::size_t count, std::size_t classes = 10) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
    std::vector<std::uint8_t> labels(count);
    for (auto& l : labels) l = static_cast<std::uint8_t>(d(rng));
    return labels;
}

// Max over parameters (and the input) of the relative error between the
// analytic gradient and central differences.
double end_to_end_error(Network& net, const SignalBatch& x, const std::vector<std::uint8_t>& labels, double h) {
    const auto fw = net.forward(x, labels);
    const auto grads = net.backward(fw, labels, true);
    double worst = 0.0;
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        Eigen::MatrixXd& value = net.parameters()[p].value;
        const Eigen::MatrixXd saved = value;
        const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(saved.data(), saved.size());
        const auto numeric = oracle::central_differences(
            [&](const Eigen::VectorXd& v) {
                value = Eigen::Map<const Eigen::MatrixXd>(v.data(), saved.rows(), saved.cols());
                return net.forward(x, labels).loss;
            },
            flat, h);
        value = saved;
        const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(grads.parameters[p].data(), grads.parameters[p].size());
        const double err = oracle::relative_error(analytic, numeric);
        INFO(net.parameters()[p].name << " relative error " << err);
        CHECK(err < 1e-5);
        worst = std::max(worst, err);
    }
    const Eigen::VectorXd xin = Eigen::Map<const Eigen::VectorXd>(x.data.data(), x.data.size());
    const auto numeric = oracle::central_differences(
        [&](const Eigen::VectorXd& v) {
            SignalBatch moved(Eigen::Map<const Eigen::MatrixXd>(v.data(), x.data.rows(), x.data.cols()), x.samples, x.channels);
            return net.forward(moved, labels).loss;
        },
        xin, h);
    const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(grads.input.data.data(), grads.input.data.size());
    const double err = oracle::relative_error(analytic, numeric);
    INFO("input relative error " << err);
    CHECK(err < 1e-5);
    return std::max(worst, err);
}

} // namespace

TEST_CASE("architecture parsing") {
    const auto specs = parse_architecture("C20 P C50 P R F");
    REQUIRE(specs.size() == 6);
    CHECK(specs[0].kind == LayerKind::Conv);
    CHECK(specs[0].width == 20);
    CHECK(specs[1].kind == LayerKind::Pool);
    CHECK(specs[2].width == 50);
    CHECK(specs[4].kind == LayerKind::Relu);
    CHECK(specs[5].kind == LayerKind::Dense);

    CHECK(parse_architecture("C20PC50PRF").size() == 6);
    CHECK(parse_architecture("C2 P F", true).size() == 4);
    CHECK(parse_architecture("C2 F16 R F").size() == 4);

    CHECK_THROWS_AS(parse_architecture("C20 P"), ConfigError);
    CHECK_THROWS_AS(parse_architecture("C P F"), ConfigError);
    CHECK_THROWS_AS(parse_architecture("X F"), ConfigError);
    CHECK_THROWS_AS(parse_architecture("F10"), ConfigError);
    CHECK_THROWS_AS(parse_architecture(""), ConfigError);
    CHECK_THROWS_AS(parse_architecture("C0 F"), ConfigError);
}

TEST_CASE("default architecture layer chain") {
    NetworkConfig cfg;
    const auto net = Network::build(cfg, build_grid_graph(28, 28), 0);
    REQUIRE(net.layers().size() == 6);
    CHECK(net.layers()[0]->kind() == LayerKind::Conv);
    CHECK(net.layers()[0]->output_channels() == 20);
    CHECK(net.layers()[1]->kind() == LayerKind::Pool);
    CHECK(net.layers()[2]->kind() == LayerKind::Conv);
    CHECK(net.layers()[2]->output_channels() == 50);
    CHECK(net.layers()[3]->kind() == LayerKind::Pool);
    CHECK(net.layers()[4]->kind() == LayerKind::Relu);
    CHECK(net.layers()[5]->kind() == LayerKind::Dense);
    CHECK(net.layers()[5]->output_vertices() == 10);
    const std::size_t n2 = net.layers()[3]->output_vertices();
    CHECK(n2 < net.layers()[1]->output_vertices());
    CHECK(net.layers()[1]->output_vertices() < 784);
    CHECK(net.parameters().back().shape == std::vector<std::size_t>{10});
    CHECK(net.parameters()[4].shape == std::vector<std::size_t>{10, 50 * n2});
    REQUIRE(net.levels().size() == 3);
    for (std::size_t l = 0; l < 2; ++l) {
        REQUIRE(net.levels()[l].basis);
        CHECK(net.levels()[l].basis->size() == net.levels()[l].graph->size());
    }
}

TEST_CASE("parameter counts and initialisation") {
    NetworkConfig cfg;
    cfg.architecture = "C1 F";
    cfg.tracked_weights = 3;
    const auto net = Network::build(cfg, path3(), 4);
    CHECK(net.parameter_count() == 1 * 1 * 3 + 1 + 3 * 10 + 10);

    cfg.architecture = "F";
    CHECK(Network::build(cfg, path3(), 4).parameter_count() == 40);

    // tracked weights clamp to the graph size
    cfg.architecture = "C2 F";
    cfg.tracked_weights = 60;
    CHECK(Network::build(cfg, path3(), 4).parameters()[0].shape == std::vector<std::size_t>{1, 2, 3});

    // initial scales
    cfg.architecture = "C8 C8 F";
    cfg.tracked_weights = 30;
    const auto big = Network::build(cfg, build_grid_graph(10, 10), 1);
    auto sd = [](const Eigen::MatrixXd& m) { return std::sqrt(m.squaredNorm() / static_cast<double>(m.size())); };
    CHECK(sd(big.parameters()[2].value) == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(0.08));
    CHECK(sd(big.parameters()[4].value) == doctest::Approx(1.0 / std::sqrt(800.0)).epsilon(0.05));
    CHECK(big.parameters()[1].value.isZero(0.0));
    CHECK(big.parameters()[5].value.isZero(0.0));

    const auto again = Network::build(cfg, build_grid_graph(10, 10), 1);
    for (std::size_t p = 0; p < big.parameters().size(); ++p) CHECK(big.parameters()[p].value == again.parameters()[p].value);
}

TEST_CASE("build errors") {
    NetworkConfig cfg;
    cfg.architecture = "F C2 F";
    CHECK_THROWS_AS(Network::build(cfg, path3(), 0), ConfigError);
    cfg.architecture = "P P P F";
    CHECK_THROWS_AS(Network::build(cfg, path3(), 0), ConfigError);
    cfg.architecture = "C2 Q F";
    CHECK_THROWS_AS(Network::build(cfg, path3(), 0), ConfigError);
}

TEST_CASE("untrained loss is near ln 10") {
    std::mt19937_64 rng(8);
    NetworkConfig cfg;
    cfg.architecture = "C4 P C4 P R F";
    cfg.tracked_weights = 20;
    const auto net = Network::build(cfg, build_grid_graph(12, 12), 2);
    const auto x = random_batch(rng, 50, 144);
    CHECK(std::abs(net.forward(x, random_labels(rng, 50)).loss - std::log(10.0)) < 0.3);
}

TEST_CASE("all-zero input gives exactly ln 10") {
    NetworkConfig cfg;
    cfg.architecture = "C3 P C2 R F";
    cfg.tracked_weights = 4;
    const auto net = Network::build(cfg, build_grid_graph(3, 3), 0);
    const std::vector<std::uint8_t> labels{7};
    const auto fw = net.forward(SignalBatch(1, 1, 9), labels);
    CHECK(fw.logits.isZero(0.0));
    CHECK(fw.loss == std::log(10.0));
}

TEST_CASE("tiny network forward matches straight-line code") {
    // C1 F on the 3-vertex path, M = 3 so phi is the identity
    NetworkConfig cfg;
    cfg.architecture = "C1 F";
    cfg.tracked_weights = 3;
    cfg.classes = 2;
    auto net = Network::build(cfg, path3(), 0);
    auto& p = net.parameters();
    p[0].value = Eigen::Vector3d(0.5, -1.0, 2.0);
    p[1].value(0, 0) = 0.25;
    // weight has logical shape [2, 3]: stored 3 x 2, column o holds row o
    p[2].value.col(0) = Eigen::Vector3d(1.0, 0.0, -1.0);
    p[2].value.col(1) = Eigen::Vector3d(0.5, 0.5, 0.5);
    p[3].value = Eigen::Vector2d(0.1, -0.2);

    const double r3 = 1.0 / std::sqrt(3.0), r2 = 1.0 / std::sqrt(2.0), r6 = 1.0 / std::sqrt(6.0);
    const double u[3][3] = {{r3, r2, -r6}, {r3, 0.0, 2 * r6}, {r3, -r2, -r6}};
    const double k[3] = {0.5, -1.0, 2.0};
    const double f[3] = {1.0, 2.0, -0.5};
    double y[3];
    for (int v = 0; v < 3; ++v) {
        y[v] = 0.25;
        for (int l = 0; l < 3; ++l) {
            double c = 0.0;
            for (int w = 0; w < 3; ++w) c += u[w][l] * f[w];
            y[v] += u[v][l] * k[l] * c;
        }
    }
    const double z0 = y[0] - y[2] + 0.1;
    const double z1 = 0.5 * (y[0] + y[1] + y[2]) - 0.2;
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    const double loss = lse - z1;

    const std::vector<std::uint8_t> labels{1};
    const auto fw = net.forward(SignalBatch(Eigen::MatrixXd(Eigen::Vector3d(1.0, 2.0, -0.5)), 1, 1), labels);
    CHECK(std::abs(fw.logits(0, 0) - z0) < 1e-10);
    CHECK(std::abs(fw.logits(1, 0) - z1) < 1e-10);
    CHECK(std::abs(fw.loss - loss) < 1e-10);
    CHECK(std::abs(fw.probabilities(1, 0) - std::exp(z1 - lse)) < 1e-10);
}

TEST_CASE("end-to-end gradients match central differences") {
    std::mt19937_64 rng(21);
    NetworkConfig cfg;
    cfg.architecture = "C3 P C4 R F";
    cfg.tracked_weights = 8;
    auto net = Network::build(cfg, build_grid_graph(5, 6), 3);
    // move the biases off zero so every path is exercised
    for (auto& p : net.parameters()) p.value += 0.1 * oracle::random_matrix(rng, p.value.rows(), p.value.cols());
    const auto x = random_batch(rng, 3, 30);
    CHECK(end_to_end_error(net, x, random_labels(rng, 3), 1e-6) < 1e-5);
}

TEST_CASE("end-to-end gradients with relu after every conv and a hidden layer") {
    std::mt19937_64 rng(22);
    NetworkConfig cfg;
    cfg.architecture = "C3 P C2 F6 R F";
    cfg.relu_after_conv = true;
    cfg.tracked_weights = 5;
    cfg.knot_domain = KnotDomain::Value;
    cfg.classes = 4;
    auto net = Network::build(cfg, build_grid_graph(4, 5), 5);
    for (auto& p : net.parameters()) p.value += 0.1 * oracle::random_matrix(rng, p.value.rows(), p.value.cols());
    const auto x = random_batch(rng, 2, 20);
    end_to_end_error(net, x, random_labels(rng, 2, 4), 1e-6);
}

TEST_CASE("saturated softmax has vanishing gradients") {
    NetworkConfig cfg;
    cfg.architecture = "F";
    cfg.classes = 3;
    auto net = Network::build(cfg, path3(), 0);
    net.parameters()[0].value.setZero();
    net.parameters()[1].value = Eigen::Vector3d(0.0, 30.0, 0.0);
    const std::vector<std::uint8_t> labels{1, 1};
    const auto fw = net.forward(SignalBatch(Eigen::MatrixXd::Ones(3, 2), 2, 1), labels);
    const auto grads = net.backward(fw, labels, true);
    for (const auto& g : grads.parameters) CHECK(g.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(grads.input.data.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("relu backward masks negative pre-activations") {
    NetworkConfig cfg;
    cfg.architecture = "R F";
    cfg.classes = 2;
    auto net = Network::build(cfg, path3(), 0);
    const Eigen::Vector3d x(-1.0, 0.5, -0.25);
    const std::vector<std::uint8_t> labels{0};
    const auto fw = net.forward(SignalBatch(Eigen::MatrixXd(x), 1, 1), labels);
    const auto grads = net.backward(fw, labels, true);
    CHECK(grads.input.data(0, 0) == 0.0);
    CHECK(grads.input.data(1, 0) != 0.0);
    CHECK(grads.input.data(2, 0) == 0.0);
    CHECK(fw.activations[0].data(0, 0) == 0.0);
    CHECK(fw.activations[0].data(1, 0) == 0.5);
}

TEST_CASE("nan activations name the layer") {
    NetworkConfig cfg;
    cfg.architecture = "C2 F";
    cfg.tracked_weights = 3;
    auto net = Network::build(cfg, path3(), 0);
    net.parameters()[0].value(0, 0) = std::nan("");
    try {
        (void)net.forward(SignalBatch(Eigen::MatrixXd::Ones(3, 1), 1, 1));
        FAIL("expected NumericalFailure");
    } catch (const NumericalFailure& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("softmax properties") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd logits = 10.0 * oracle::random_matrix(rng, 10, 40);
    const auto p = softmax(logits);
    for (Eigen::Index s = 0; s < 40; ++s) CHECK(std::abs(p.col(s).sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
    const auto shifted = softmax((logits.array() + 123.456).matrix());
    CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<std::uint8_t> labels(40);
    for (std::size_t s = 0; s < 40; ++s) labels[s] = static_cast<std::uint8_t>(s % 10);
    CHECK(cross_entropy(p, labels) >= 0.0);
    Eigen::MatrixXd huge = Eigen::MatrixXd::Zero(3, 1);
    huge(0, 0) = 1e4;
    CHECK(softmax(huge).allFinite());
}

TEST_CASE("load_parameters checks names and shapes") {
    NetworkConfig cfg;
    cfg.architecture = "C2 F";
    cfg.tracked_weights = 3;
    auto net = Network::build(cfg, path3(), 0);
    auto params = net.parameters();
    params[0].value.setConstant(0.5);
    net.load_parameters(params);
    CHECK(net.parameters()[0].value(0, 0) == 0.5);
    params[1].name = "other";
    CHECK_THROWS_AS(net.load_parameters(params), ConfigError);
    params.pop_back();
    CHECK_THROWS_AS(net.load_parameters(params), ConfigError);
}

TEST_CASE("interpolated filters report every conv layer") {
    NetworkConfig cfg;
    cfg.architecture = "C3 P C2 F";
    cfg.tracked_weights = 5;
    const auto net = Network::build(cfg, build_grid_graph(6, 6), 0);
    const auto filters = net.interpolated_filters();
    REQUIRE(filters.size() == 2);
    CHECK(filters[0].layer == 0);
    CHECK(filters[0].filters.length() == 36);
    CHECK(filters[0].filters.outputs == 3);
    CHECK(filters[1].layer == 2);
    CHECK(filters[1].filters.inputs == 3);
    CHECK(static_cast<std::size_t>(filters[1].eigenvalues.size()) == filters[1].filters.length());
}

TEST_CASE("folded conv-pool pairs match the layer-by-layer pass") {
    std::mt19937_64 rng(30);
    NetworkConfig cfg;
    cfg.architecture = "C3 P C4 P R F";
    cfg.tracked_weights = 10;
    auto net = Network::build(cfg, build_grid_graph(8, 9), 6);
    for (auto& p : net.parameters()) p.value += 0.1 * oracle::random_matrix(rng, p.value.rows(), p.value.cols());
    const auto x = random_batch(rng, 4, 72);
    const auto labels = random_labels(rng, 4);
    const auto folded = net.forward(x, labels);
    const auto full = net.forward(x, labels, true);
    CHECK(folded.folded[0]);
    CHECK(folded.folded[2]);
    CHECK_FALSE(full.folded[0]);
    CHECK(folded.activations[0].data.size() == 0);
    CHECK(full.activations[0].vertices() == 72);
    CHECK((folded.activations[1].data - full.activations[1].data).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(folded.loss - full.loss) < 1e-12);
    const auto ga = net.backward(folded, labels, true);
    const auto gb = net.backward(full, labels, true);
    for (std::size_t p = 0; p < ga.parameters.size(); ++p)
        CHECK((ga.parameters[p] - gb.parameters[p]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ga.input.data - gb.input.data).cwiseAbs().maxCoeff() < 1e-12);
}
