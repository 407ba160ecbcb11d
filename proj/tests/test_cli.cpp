#include "doctest.h"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("gcnn_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + GCNN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

const std::string kData = std::string("--data-dir \"") + GCNN_DATA_DIR + "\"";

} // namespace

TEST_CASE("cli: one training epoch writes metrics, checkpoints and a manifest") {
    Scratch s("train");
    const auto out = s.dir / "run";
    const int rc = run("train " + kData + " --epochs 1 --train-limit 100 --test-limit 100 --out \"" + out.string() + "\"",
                       s.dir / "log");
    REQUIRE_MESSAGE(rc == 0, slurp(s.dir / "log"));
    const auto metrics = slurp(out / "metrics.csv");
    CHECK(metrics.rfind("epoch,train_loss,test_accuracy,seconds\n", 0) == 0);
    CHECK(line_count(metrics) == 2);
    CHECK(fs::exists(out / "final.ckpt"));
    CHECK(fs::exists(out / "best.ckpt"));

    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("seed") == 0);
    CHECK(manifest.at("excluded_vertices").empty());
    CHECK(manifest.at("config").at("epochs") == 1);
    CHECK(manifest.at("files").size() >= 4);

    SUBCASE("eval reads the manifest next to the checkpoint") {
        CHECK(run("eval " + kData + " --test-limit 100 --checkpoint \"" + (out / "best.ckpt").string() + "\"",
                  s.dir / "eval") == 0);
        CHECK(slurp(s.dir / "eval").find("test accuracy") != std::string::npos);
    }
    SUBCASE("a checkpoint for another architecture is a config error") {
        CHECK(run("eval " + kData + " --arch \"C4 P R F\" --checkpoint \"" + (out / "final.ckpt").string() + "\"",
                  s.dir / "eval") == 1);
    }
    SUBCASE("a truncated checkpoint is an io error") {
        const auto bytes = slurp(out / "final.ckpt");
        const auto cut = s.dir / "cut.ckpt";
        std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        CHECK(run("eval " + kData + " --config \"" + (out / "manifest.json").string() + "\" --checkpoint \"" +
                      cut.string() + "\"",
                  s.dir / "eval") == 3);
    }
    SUBCASE("inspect-filters dumps filters and feature maps") {
        const auto insp = s.dir / "insp";
        CHECK(run("inspect-filters " + kData + " --test-limit 5 --checkpoint \"" + (out / "final.ckpt").string() +
                      "\" --out \"" + insp.string() + "\"",
                  s.dir / "insp.log") == 0);
        const auto filters = slurp(insp / "filters_layer0.csv");
        CHECK(filters.rfind("input,output,index,eigenvalue,multiplier\n", 0) == 0);
        CHECK(line_count(filters) == 1 + 20 * 784);
        CHECK(line_count(slurp(insp / "features_layer1.csv")) == 1 + 108);
    }
}

TEST_CASE("cli: deterministic training is bit-identical") {
    Scratch s("det");
    const std::string common = "train " + kData + " --epochs 2 --train-limit 100 --test-limit 50 --deterministic --seed 5";
    REQUIRE(run(common + " --out \"" + (s.dir / "a").string() + "\"", s.dir / "log_a") == 0);
    REQUIRE(run(common + " --out \"" + (s.dir / "b").string() + "\"", s.dir / "log_b") == 0);
    const auto a = slurp(s.dir / "a" / "metrics.csv");
    CHECK(line_count(a) == 3);
    CHECK(a == slurp(s.dir / "b" / "metrics.csv"));
    CHECK(slurp(s.dir / "a" / "final.ckpt") == slurp(s.dir / "b" / "final.ckpt"));
}

TEST_CASE("cli: gradcheck output is a function of the seed") {
    Scratch s("grad");
    const std::string common = "gradcheck --runs 1 --seed 7 --tracked-weights 6,12 --grid subsampled --exclude 760";
    REQUIRE(run(common + " --out \"" + (s.dir / "a").string() + "\"", s.dir / "log") == 0);
    REQUIRE(run(common + " --out \"" + (s.dir / "b").string() + "\"", s.dir / "log") == 0);
    const auto a = slurp(s.dir / "a" / "gradcheck.csv");
    CHECK(line_count(a) == 1 + 3 * 2 * 2);
    CHECK(a == slurp(s.dir / "b" / "gradcheck.csv"));
}

TEST_CASE("cli: exit codes") {
    Scratch s("codes");
    CHECK(run("", s.dir / "log") == 1);
    CHECK(run("train --grid hexagonal", s.dir / "log") == 1);
    CHECK(run("train --tracked-weights 6,7", s.dir / "log") == 1);
    CHECK(run("train --data-dir \"" + s.dir.string() + "\"", s.dir / "log") == 3);
    CHECK(run("gradcheck --runs 1 --target data --tracked-weights 784 --step 1e300 --out \"" + s.dir.string() + "\"",
              s.dir / "log") == 2);

    const auto cfg = s.dir / "cfg.json";
    std::ofstream(cfg) << "{\"grid\": 3}";
    CHECK(run("coarsen-report --config \"" + cfg.string() + "\"", s.dir / "log") == 1);
    std::ofstream(cfg) << "{not json";
    CHECK(run("coarsen-report --config \"" + cfg.string() + "\"", s.dir / "log") == 3);
}

TEST_CASE("cli: flags override the config file") {
    Scratch s("override");
    const auto cfg = s.dir / "cfg.json";
    std::ofstream(cfg) << R"({"grid": "subsampled", "exclude": 84, "levels": 1})";
    REQUIRE(run("coarsen-report --config \"" + cfg.string() + "\" --exclude 284 --out \"" + s.dir.string() + "\"",
                s.dir / "log") == 0);
    const auto log = slurp(s.dir / "log");
    CHECK(log.find("input graph: 500 vertices") != std::string::npos);
    CHECK(log.find("level 2") == std::string::npos);
}
