#ifndef GCNN_TOOLS_EXPERIMENT_HPP
#define GCNN_TOOLS_EXPERIMENT_HPP

#include "gcnn/dataset.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/network.hpp"
#include "gcnn/verification.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gcnn::cli {

struct ExperimentConfig {
    std::string command;
    std::string data_dir = "data";
    std::string grid = "regular";  // regular | subsampled
    std::string weights = "binary";  // binary | euclidean
    std::size_t exclude = 84;
    std::uint64_t seed = 0;
    std::string out = "out";
    std::size_t train_limit = 0;  // 0 = everything
    std::size_t test_limit = 0;
    bool deterministic = false;
    int threads = 0;  // 0 = all available cores
    std::string graph_in;
    std::string graph_out;
    std::string dump_basis;

    NetworkConfig network;
    std::string knot_domain = "rank";

    // gradcheck
    std::string tracked_list = "60";
    std::string target = "all";       // data | filters | tracked | all
    std::string variant = "both";     // proposed | naive | both
    std::size_t runs = 100;
    double step = 1e-4;
    bool forward_diff = false;
    bool directional = false;
    std::size_t directions = 16;
    std::size_t samples = 1;
    std::size_t inputs = 1;
    std::size_t outputs = 1;

    // eval / inspect-filters
    std::string checkpoint;
    std::size_t sample = 0;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Applies the keys present in `j` on top of `cfg`. A manifest is accepted
/// too: its "config" object is used. Throws ConfigError on bad values.
void apply_json(const nlohmann::json& j, ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

/// Validates enumerations and copies derived fields (knot domain) into the
/// network config. Throws ConfigError.
void finalize(ExperimentConfig& cfg);

/// Comma separated list of positive integers.
std::vector<std::size_t> parse_size_list(const std::string& text);

struct InputGraph {
    Graph graph;
    std::vector<std::size_t> kept;      // empty for the regular grid
    std::vector<std::size_t> excluded;
};

/// The 28x28 grid (or --graph-in), subsampled when grid == "subsampled".
InputGraph make_input_graph(const ExperimentConfig& cfg);

struct Data {
    Dataset train;
    Dataset test;
    std::vector<std::string> files;
};

/// MNIST from data_dir restricted to the input graph and the sample limits.
Data load_data(const ExperimentConfig& cfg, const InputGraph& input);

} // namespace gcnn::cli

#endif // GCNN_TOOLS_EXPERIMENT_HPP
