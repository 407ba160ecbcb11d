#include "experiment.hpp"

#include "gcnn/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace gcnn::cli {

using nlohmann::json;

json to_json(const ExperimentConfig& c) {
    const auto& n = c.network;
    return {
        {"data_dir", c.data_dir},
        {"grid", c.grid},
        {"weights", c.weights},
        {"exclude", c.exclude},
        {"seed", c.seed},
        {"out", c.out},
        {"train_limit", c.train_limit},
        {"test_limit", c.test_limit},
        {"deterministic", c.deterministic},
        {"threads", c.threads},
        {"graph_in", c.graph_in},
        {"architecture", n.architecture},
        {"tracked_weights", c.tracked_list},
        {"beta", n.beta},
        {"levels", n.pool_levels},
        {"learning_rate", n.learning_rate},
        {"momentum", n.momentum},
        {"batch_size", n.batch_size},
        {"epochs", n.epochs},
        {"classes", n.classes},
        {"relu_after_conv", n.relu_after_conv},
        {"knot_domain", c.knot_domain},
        {"target", c.target},
        {"variant", c.variant},
        {"runs", c.runs},
        {"step", c.step},
        {"forward_diff", c.forward_diff},
        {"directional", c.directional},
        {"directions", c.directions},
        {"samples", c.samples},
        {"inputs", c.inputs},
        {"outputs", c.outputs},
    };
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& value) {
    if (!j.contains(key)) return;
    try {
        value = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

} // namespace

void apply_json(const json& root, ExperimentConfig& c) {
    const json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    auto& n = c.network;
    take(j, "data_dir", c.data_dir);
    take(j, "grid", c.grid);
    take(j, "weights", c.weights);
    take(j, "exclude", c.exclude);
    take(j, "seed", c.seed);
    take(j, "out", c.out);
    take(j, "train_limit", c.train_limit);
    take(j, "test_limit", c.test_limit);
    take(j, "deterministic", c.deterministic);
    take(j, "threads", c.threads);
    take(j, "graph_in", c.graph_in);
    take(j, "architecture", n.architecture);
    if (j.contains("tracked_weights")) {
        const auto& t = j.at("tracked_weights");
        c.tracked_list = t.is_number_unsigned() ? std::to_string(t.get<std::size_t>()) : t.is_string() ? t.get<std::string>() : "";
        if (c.tracked_list.empty()) throw ConfigError("config key 'tracked_weights' must be a count or a list string");
    }
    take(j, "beta", n.beta);
    take(j, "levels", n.pool_levels);
    take(j, "learning_rate", n.learning_rate);
    take(j, "momentum", n.momentum);
    take(j, "batch_size", n.batch_size);
    take(j, "epochs", n.epochs);
    take(j, "classes", n.classes);
    take(j, "relu_after_conv", n.relu_after_conv);
    take(j, "knot_domain", c.knot_domain);
    take(j, "target", c.target);
    take(j, "variant", c.variant);
    take(j, "runs", c.runs);
    take(j, "step", c.step);
    take(j, "forward_diff", c.forward_diff);
    take(j, "directional", c.directional);
    take(j, "directions", c.directions);
    take(j, "samples", c.samples);
    take(j, "inputs", c.inputs);
    take(j, "outputs", c.outputs);
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    ExperimentConfig cfg;
    apply_json(j, cfg);
    return cfg;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("'" + text + "' is not a list of positive integers");
        }
        if (used != item.size() || v == 0) throw ConfigError("'" + text + "' is not a list of positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("empty tracked-weight list");
    return out;
}

void finalize(ExperimentConfig& c) {
    if (c.grid != "regular" && c.grid != "subsampled") throw ConfigError("--grid must be regular or subsampled");
    if (c.weights != "binary" && c.weights != "euclidean") throw ConfigError("--weights must be binary or euclidean");
    if (c.knot_domain == "rank") {
        c.network.knot_domain = KnotDomain::Rank;
    } else if (c.knot_domain == "value") {
        c.network.knot_domain = KnotDomain::Value;
    } else {
        throw ConfigError("--knot-domain must be rank or value");
    }
    if (c.target != "data" && c.target != "filters" && c.target != "tracked" && c.target != "all") {
        throw ConfigError("--target must be data, filters, tracked or all");
    }
    if (c.variant != "proposed" && c.variant != "naive" && c.variant != "both") {
        throw ConfigError("--variant must be proposed, naive or both");
    }
    const auto tracked = parse_size_list(c.tracked_list);
    if (c.command != "gradcheck" && tracked.size() != 1) {
        throw ConfigError("--tracked-weights takes a single count for " + c.command);
    }
    c.network.tracked_weights = tracked.front();
    c.network.seed = c.seed;
    if (c.network.batch_size == 0) throw ConfigError("--batch-size must be positive");
    if (c.network.pool_levels < 1) throw ConfigError("--levels must be positive");
    if (!(c.network.beta > 0.0 && c.network.beta < 1.0)) throw ConfigError("--beta must lie in (0, 1)");
}

InputGraph make_input_graph(const ExperimentConfig& c) {
    Graph base = c.graph_in.empty()
                     ? build_grid_graph(28, 28, c.weights == "euclidean" ? WeightMode::Euclidean : WeightMode::Binary)
                     : load_edge_list(c.graph_in);
    if (c.grid == "regular") return {std::move(base), {}, {}};
    if (c.exclude >= base.size()) throw ConfigError("--exclude must be smaller than the vertex count");
    auto sub = subsample_graph(base, c.exclude, c.seed);
    return {std::move(sub.graph), std::move(sub.kept_indices), std::move(sub.excluded)};
}

Data load_data(const ExperimentConfig& c, const InputGraph& input) {
    namespace fs = std::filesystem;
    const fs::path dir(c.data_dir);
    Data d;
    d.files = {(dir / "train-images-idx3-ubyte").string(), (dir / "train-labels-idx1-ubyte").string(),
               (dir / "t10k-images-idx3-ubyte").string(), (dir / "t10k-labels-idx1-ubyte").string()};
    d.train = load_mnist(d.files[0], d.files[1]).head(c.train_limit);
    d.test = load_mnist(d.files[2], d.files[3]).head(c.test_limit);
    if (!input.kept.empty()) {
        d.train = subsample_dataset(d.train, input.kept);
        d.test = subsample_dataset(d.test, input.kept);
    }
    if (d.train.vertices() != input.graph.size()) {
        throw ConfigError("images have " + std::to_string(d.train.vertices()) + " pixels but the graph has " +
                          std::to_string(input.graph.size()) + " vertices");
    }
    return d;
}

} // namespace gcnn::cli
