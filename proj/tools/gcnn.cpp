#include "experiment.hpp"

#include "gcnn/errors.hpp"

#include "CLI11.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <thread>

using namespace gcnn;
using namespace gcnn::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kFormat = 3 };

void apply_threads(const ExperimentConfig& cfg) {
    int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (cfg.deterministic) threads = 1;
    set_threads(threads);
}

fs::path prepare_out(const ExperimentConfig& cfg) {
    fs::path out(cfg.out);
    fs::create_directories(out);
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json manifest_for(const ExperimentConfig& cfg, const InputGraph& input) {
    json m;
    m["command"] = cfg.command;
    m["seed"] = cfg.seed;
    m["grid"] = cfg.grid;
    m["vertices"] = input.graph.size();
    m["excluded_vertices"] = input.excluded;
    m["config"] = to_json(cfg);
    m["files"] = json::object();
    return m;
}

void add_checksums(json& manifest, const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        if (fs::exists(p)) manifest["files"][p] = file_checksum(p);
    }
}

void export_graph_artifacts(const ExperimentConfig& cfg, const InputGraph& input) {
    if (!cfg.graph_out.empty()) save_edge_list(cfg.graph_out, input.graph);
    if (!cfg.dump_basis.empty()) save_basis(cfg.dump_basis, eigendecompose(laplacian(input.graph)));
}

std::string format_seconds(const ExperimentConfig& cfg, double seconds) {
    std::ostringstream os;
    os << std::setprecision(6) << (cfg.deterministic ? 0.0 : seconds);
    return os.str();
}

int cmd_train(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    const auto input = make_input_graph(cfg);
    export_graph_artifacts(cfg, input);
    const auto data = load_data(cfg, input);
    const auto out = prepare_out(cfg);

    auto manifest = manifest_for(cfg, input);
    add_checksums(manifest, data.files);
    write_json(out / "manifest.json", manifest);

    auto net = Network::build(cfg.network, input.graph, cfg.seed);
    std::cout << "graph: " << input.graph.size() << " vertices, " << input.graph.edge_count() << " edges, "
              << input.graph.component_count() << " component(s)\n";
    for (const auto& layer : net.layers()) std::cout << "  " << layer->describe() << '\n';
    std::cout << "parameters: " << net.parameter_count() << "; train " << data.train.size() << ", test "
              << data.test.size() << '\n';

    std::ofstream metrics(out / "metrics.csv");
    if (!metrics) throw FormatError("cannot write " + (out / "metrics.csv").string());
    metrics << "epoch,train_loss,test_accuracy,seconds\n" << std::setprecision(17);

    TrainOptions opts;
    opts.epochs = cfg.network.epochs;
    opts.batch_size = cfg.network.batch_size;
    opts.learning_rate = cfg.network.learning_rate;
    opts.momentum = cfg.network.momentum;
    opts.seed = cfg.seed;
    opts.on_epoch = [&](const EpochMetrics& m) {
        metrics << m.epoch << ',' << m.train_loss << ',' << m.test_accuracy << ',' << format_seconds(cfg, m.seconds)
                << '\n';
        metrics.flush();
        std::cout << "epoch " << m.epoch << "  loss " << std::fixed << std::setprecision(4) << m.train_loss
                  << "  test accuracy " << std::setprecision(2) << 100.0 * m.test_accuracy << "%" << std::defaultfloat
                  << std::endl;
    };
    const auto result = train(net, data.train, data.test, opts);

    const auto final_path = (out / "final.ckpt").string();
    const auto best_path = (out / "best.ckpt").string();
    save_checkpoint(final_path, net.parameters());
    if (!result.best_parameters.empty()) save_checkpoint(best_path, result.best_parameters);

    manifest["best_epoch"] = result.best_epoch;
    manifest["best_test_accuracy"] = std::max(result.best_accuracy, 0.0);
    manifest["epochs_completed"] = result.metrics.size();
    if (result.failure) manifest["failure"] = *result.failure;
    add_checksums(manifest, {(out / "metrics.csv").string(), final_path, best_path});
    write_json(out / "manifest.json", manifest);

    if (result.failure) {
        std::cerr << "training stopped: " << *result.failure << '\n';
        return kNumerical;
    }
    std::cout << "best test accuracy " << std::setprecision(4) << 100.0 * result.best_accuracy << "% at epoch "
              << result.best_epoch << '\n';
    return kOk;
}

Network network_from_checkpoint(const ExperimentConfig& cfg, const InputGraph& input) {
    if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    auto net = Network::build(cfg.network, input.graph, cfg.seed);
    net.load_parameters(load_checkpoint(cfg.checkpoint));
    return net;
}

int cmd_eval(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    const auto input = make_input_graph(cfg);
    const auto data = load_data(cfg, input);
    const auto net = network_from_checkpoint(cfg, input);
    const double accuracy = evaluate_accuracy(net, data.test);
    std::cout << "test accuracy " << std::setprecision(17) << accuracy << " (" << data.test.size() << " samples)\n";
    return kOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    const auto input = make_input_graph(cfg);
    export_graph_artifacts(cfg, input);
    const auto out = prepare_out(cfg);

    ProtocolSetup setup;
    setup.basis = std::make_shared<const SpectralBasis>(eigendecompose(laplacian(input.graph)));
    setup.samples = cfg.samples;
    setup.inputs = cfg.inputs;
    setup.outputs = cfg.outputs;
    setup.step = cfg.step;
    setup.scheme = cfg.forward_diff ? DiffScheme::Forward : DiffScheme::Central;
    setup.mode = cfg.directional ? PerturbMode::Directional : PerturbMode::Coordinate;
    setup.directions = cfg.directions;

    const auto m_values = parse_size_list(cfg.tracked_list);
    for (auto m : m_values) {
        if (m > input.graph.size()) {
            throw ConfigError("tracked weight count " + std::to_string(m) + " exceeds the graph size " +
                              std::to_string(input.graph.size()));
        }
    }
    std::vector<GradTarget> targets;
    if (cfg.target == "all") {
        targets = {GradTarget::Data, GradTarget::Filters, GradTarget::Tracked};
    } else {
        targets = {parse_target(cfg.target)};
    }

    std::vector<GradCheckReport> reports;
    if (cfg.variant == "both") {
        reports = compare_variants(setup, targets, m_values, cfg.runs, cfg.seed);
    } else {
        const auto variant = cfg.variant == "naive" ? GradVariant::Naive : GradVariant::Proposed;
        for (auto t : targets) {
            auto r = run_protocol(setup, t, variant, m_values, cfg.runs, cfg.seed);
            reports.insert(reports.end(), r.begin(), r.end());
        }
    }

    const auto csv = (out / "gradcheck.csv").string();
    {
        std::ofstream os(csv);
        if (!os) throw FormatError("cannot write " + csv);
        write_reports_csv(os, reports);
    }
    write_reports_csv(std::cout, reports);

    auto manifest = manifest_for(cfg, input);
    add_checksums(manifest, {csv});
    write_json(out / "manifest.json", manifest);
    for (const auto& r : reports) {
        if (r.runs == 0) {
            std::cerr << "every run failed numerically for " << to_string(r.target) << '/' << to_string(r.variant)
                      << " M=" << r.tracked << '\n';
            return kNumerical;
        }
    }
    return kOk;
}

int cmd_inspect(const ExperimentConfig& cfg) {
    apply_threads(cfg);
    const auto input = make_input_graph(cfg);
    const auto net = network_from_checkpoint(cfg, input);
    const auto out = prepare_out(cfg);

    std::size_t files = 0;
    for (const auto& lf : net.interpolated_filters()) {
        std::ofstream os(out / ("filters_layer" + std::to_string(lf.layer) + ".csv"));
        os << "input,output,index,eigenvalue,multiplier\n" << std::setprecision(17);
        for (std::size_t i = 0; i < lf.filters.inputs; ++i) {
            for (std::size_t o = 0; o < lf.filters.outputs; ++o) {
                const auto k = lf.filters.filter(i, o);
                for (Eigen::Index b = 0; b < k.size(); ++b) {
                    os << i << ',' << o << ',' << b << ',' << lf.eigenvalues(b) << ',' << k(b) << '\n';
                }
            }
        }
        ++files;
    }

    const auto data = load_data(cfg, input);
    if (cfg.sample >= data.test.size()) {
        throw std::invalid_argument("--sample " + std::to_string(cfg.sample) + " is out of range (test set has " +
                                    std::to_string(data.test.size()) + " samples)");
    }
    const auto fw = net.forward(data.test.batch({cfg.sample}), {}, true);
    std::size_t maps = 0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto kind = net.layers()[l]->kind();
        if (kind != LayerKind::Conv && kind != LayerKind::Pool) continue;
        // a layer's output lives on the graph the next layer reads
        const auto& graph = *net.levels()[kind == LayerKind::Pool ? net.layer_levels()[l] + 1 : net.layer_levels()[l]].graph;
        const auto& act = fw.activations[l];
        std::ofstream os(out / ("features_layer" + std::to_string(l) + ".csv"));
        os << "vertex,original_vertex,row,col";
        for (std::size_t c = 0; c < act.channels; ++c) os << ",map" << c;
        os << '\n' << std::setprecision(17);
        for (std::size_t v = 0; v < act.vertices(); ++v) {
            const auto original = graph.vertex_labels()[v];
            os << v << ',' << original << ',' << original / 28 << ',' << original % 28;
            for (std::size_t c = 0; c < act.channels; ++c) os << ',' << act.signal(0, c)(static_cast<Eigen::Index>(v));
            os << '\n';
        }
        ++maps;
    }
    std::cout << "wrote " << files << " filter file(s) and " << maps << " feature map file(s) for test sample "
              << cfg.sample << " (label " << static_cast<int>(data.test.labels[cfg.sample]) << ") to " << out.string()
              << '\n';
    return kOk;
}

int cmd_coarsen(const ExperimentConfig& cfg) {
    const auto input = make_input_graph(cfg);
    export_graph_artifacts(cfg, input);
    const auto out = prepare_out(cfg);
    const auto& g = input.graph;
    std::cout << "input graph: " << g.size() << " vertices, " << g.edge_count() << " edges, " << g.component_count()
              << " component(s)\n";

    const auto h = amg_coarsen(g, CoarseningOptions{cfg.network.beta, cfg.network.pool_levels, cfg.seed, false});
    std::size_t fine = g.size();
    for (std::size_t l = 0; l < h.levels.size(); ++l) {
        const auto& level = h.levels[l];
        std::map<std::size_t, std::size_t> histogram;
        for (auto s : level.aggregate_sizes()) ++histogram[s];
        std::cout << "level " << l + 1 << ": " << fine << " -> " << level.coarse_size() << " vertices, "
                  << level.coarse_graph.edge_count() << " edges; aggregate sizes";
        for (const auto& [size, count] : histogram) std::cout << ' ' << size << 'x' << count;
        std::cout << '\n';
        save_edge_list((out / ("coarse_level" + std::to_string(l + 1) + ".txt")).string(), level.coarse_graph);
        fine = level.coarse_size();
    }
    if (g.size() >= 2) {
        const auto split = polarity_split(eigendecompose(laplacian(g)));
        std::cout << "polarity split: " << split.kept.size() << " kept, " << split.complement.size()
                  << " complement\n";
    }

    auto manifest = manifest_for(cfg, input);
    json levels = json::array();
    for (const auto& level : h.levels) levels.push_back(level.coarse_size());
    manifest["coarse_sizes"] = levels;
    write_json(out / "manifest.json", manifest);
    return kOk;
}

// Values from --config seed the option variables before CLI11 parses, so
// explicit flags override the file.
std::string find_argument(int argc, char** argv, const std::string& flag) {
    const auto prefix = flag + "=";
    for (int i = 1; i < argc; ++i) {
        if (argv[i] == flag && i + 1 < argc) return argv[i + 1];
        if (std::strncmp(argv[i], prefix.c_str(), prefix.size()) == 0) return argv[i] + prefix.size();
    }
    return {};
}

// Without --config, eval and inspect-filters rebuild the network from the
// manifest written next to the checkpoint.
std::string config_source(int argc, char** argv) {
    if (auto path = find_argument(argc, argv, "--config"); !path.empty()) return path;
    const auto ckpt = find_argument(argc, argv, "--checkpoint");
    if (ckpt.empty()) return {};
    const auto manifest = fs::path(ckpt).parent_path() / "manifest.json";
    return fs::exists(manifest) ? manifest.string() : std::string{};
}

void add_shared_options(CLI::App* sub, ExperimentConfig& c, std::string& config_path) {
    sub->add_option("--config", config_path, "JSON config file or manifest; flags override its values");
    sub->add_option("--grid", c.grid, "regular or subsampled")->capture_default_str();
    sub->add_option("--exclude", c.exclude, "vertices removed for the subsampled grid")->capture_default_str();
    sub->add_option("--weights", c.weights, "grid edge weights: binary or euclidean")->capture_default_str();
    sub->add_option("--seed", c.seed, "experiment seed")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--data-dir", c.data_dir, "directory with the MNIST IDX files")->capture_default_str();
    sub->add_option("--train-limit", c.train_limit, "use the first N training samples (0 = all)");
    sub->add_option("--test-limit", c.test_limit, "use the first N test samples (0 = all)");
    sub->add_option("--epochs", c.network.epochs, "training epochs")->capture_default_str();
    sub->add_option("--tracked-weights", c.tracked_list, "tracked weights M (a list for gradcheck)")
        ->capture_default_str();
    sub->add_option("--beta", c.network.beta, "coarsening strength threshold")->capture_default_str();
    sub->add_option("--levels", c.network.pool_levels, "coarsening levels per pooling layer")->capture_default_str();
    sub->add_option("--arch", c.network.architecture, "architecture string")->capture_default_str();
    sub->add_option("--lr", c.network.learning_rate, "learning rate")->capture_default_str();
    sub->add_option("--momentum", c.network.momentum, "momentum")->capture_default_str();
    sub->add_option("--batch-size", c.network.batch_size, "mini-batch size")->capture_default_str();
    sub->add_flag("--relu-after-conv", c.network.relu_after_conv, "insert a ReLU after every convolution");
    sub->add_option("--knot-domain", c.knot_domain, "spline knots over eigenvalue rank or value")->capture_default_str();
    sub->add_flag("--deterministic", c.deterministic, "single-threaded, bit-reproducible output");
    sub->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    sub->add_option("--graph-in", c.graph_in, "read the input graph from an edge list");
    sub->add_option("--graph-out", c.graph_out, "write the input graph as an edge list");
    sub->add_option("--dump-basis", c.dump_basis, "write the input graph's eigenbasis");
}

} // namespace

int main(int argc, char** argv) {
    ExperimentConfig cfg;
    std::string config_path;
    try {
        if (const auto path = config_source(argc, argv); !path.empty()) cfg = load_config_file(path);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFormat;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    CLI::App app{"Spectral graph convolutional networks on MNIST grids"};
    app.require_subcommand(1);
    auto* train_cmd = app.add_subcommand("train", "train a network and write metrics, checkpoints and a manifest");
    auto* eval_cmd = app.add_subcommand("eval", "test accuracy of a checkpoint");
    auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    auto* inspect_cmd = app.add_subcommand("inspect-filters", "dump interpolated filters and feature maps");
    auto* coarsen_cmd = app.add_subcommand("coarsen-report", "report the AMG coarsening of the input graph");
    for (auto* sub : {train_cmd, eval_cmd, grad_cmd, inspect_cmd, coarsen_cmd}) add_shared_options(sub, cfg, config_path);

    for (auto* sub : {eval_cmd, inspect_cmd}) {
        sub->add_option("--checkpoint", cfg.checkpoint, "checkpoint file")->required();
    }
    inspect_cmd->add_option("--sample", cfg.sample, "test sample for the feature maps")->capture_default_str();
    grad_cmd->add_option("--target", cfg.target, "data, filters, tracked or all")->capture_default_str();
    grad_cmd->add_option("--variant", cfg.variant, "proposed, naive or both")->capture_default_str();
    grad_cmd->add_option("--runs", cfg.runs, "random instances per tracked-weight count")->capture_default_str();
    grad_cmd->add_option("--step", cfg.step, "perturbation size")->capture_default_str();
    grad_cmd->add_flag("--forward-diff", cfg.forward_diff, "forward instead of central differences");
    grad_cmd->add_flag("--directional", cfg.directional, "random directional derivatives instead of coordinates");
    grad_cmd->add_option("--directions", cfg.directions, "directions per run in directional mode")->capture_default_str();
    grad_cmd->add_option("--samples", cfg.samples, "signals per instance")->capture_default_str();
    grad_cmd->add_option("--inputs", cfg.inputs, "input channels per instance")->capture_default_str();
    grad_cmd->add_option("--outputs", cfg.outputs, "output channels per instance")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        finalize(cfg);
        if (cfg.command == "train") return cmd_train(cfg);
        if (cfg.command == "eval") return cmd_eval(cfg);
        if (cfg.command == "gradcheck") return cmd_gradcheck(cfg);
        if (cfg.command == "inspect-filters") return cmd_inspect(cfg);
        return cmd_coarsen(cfg);
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kFormat;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const CoarseningStall& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
