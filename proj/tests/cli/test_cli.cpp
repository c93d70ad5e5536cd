#include "doctest.h"

#include "bleocc/dataset.hpp"
#include "bleocc/models.hpp"
#include "bleocc/preprocess.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir = fs::temp_directory_path() / ("bleocc_cli_" + std::to_string(::getpid()));
    Scratch() {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

const fs::path& workdir() {
    static const Scratch scratch;
    return scratch.dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args) {
    const std::string cmd = std::string(BLEOCC_CLI) + " " + args + " > " + path("stdout.txt") + " 2> " +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string scenario(int transmitters, double duration, double hz) {
    std::string s = "sampling_hz = " + std::to_string(hz) + "\nduration_s = " + std::to_string(duration) + "\nseed = 7\n";
    const int dist[] = {25, 500, 100, 300, 600};
    for (int t = 0; t < transmitters; ++t)
        s += "transmitter = AA:BB:CC:DD:EE:0" + std::to_string(t + 1) + ", " + std::to_string(dist[t]) + "\n";
    s += "cycle_period_s = 5\ncycle_counts = 0 1 2 3\npath_loss.exponent = 2.2\nbody.atten_db_per_person = 6\n";
    return s;
}

std::size_t lines(const std::string& text) { return std::size_t(std::count(text.begin(), text.end(), '\n')); }

} // namespace

TEST_CASE("simulate is deterministic and sized by the scenario") {
    put(path("s.cfg"), scenario(3, 60, 45));
    REQUIRE(run("simulate --scenario " + path("s.cfg") + " --out " + path("a.csv")) == 0);
    REQUIRE(run("simulate --scenario " + path("s.cfg") + " --out " + path("b.csv")) == 0);
    const auto a = slurp(path("a.csv"));
    CHECK(a == slurp(path("b.csv")));
    CHECK(slurp(path("a.meta")) == slurp(path("b.meta")));
    CHECK(lines(a) == 2700 + 1);

    REQUIRE(run("simulate --scenario " + path("s.cfg") + " --out " + path("c.csv") + " --seed 8") == 0);
    CHECK(slurp(path("c.csv")) != a);

    CHECK(run("validate " + path("a.csv")) == 0);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run("simulate --scenario " + path("missing.cfg") + " --out " + path("x.csv")) == 2);
    CHECK_FALSE(fs::exists(path("x.csv")));
    CHECK(run("simulate --out " + path("x.csv")) == 2);
    CHECK(run("evaluate " + path("missing.csv")) == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("--version") == 0);
    CHECK_FALSE(slurp(path("stdout.txt")).empty());
}

TEST_CASE("validate points at the offending line") {
    put(path("v.cfg"), scenario(2, 5, 10));
    REQUIRE(run("simulate --scenario " + path("v.cfg") + " --out " + path("v.csv")) == 0);
    auto text = slurp(path("v.csv"));
    CHECK(run("validate " + path("v.csv")) == 0);
    CHECK(slurp(path("stdout.txt")).find("valid") != std::string::npos);

    // swap the last two rows
    const auto last = text.rfind('\n', text.size() - 2) + 1;
    const auto prev = text.rfind('\n', last - 2) + 1;
    put(path("v.csv"), text.substr(0, prev) + text.substr(last) + text.substr(prev, last - prev));
    CHECK(run("validate " + path("v.csv")) == 1);
    CHECK(slurp(path("stderr.txt")).find("line 51: timestamp") != std::string::npos);

    put(path("v.csv"), text.substr(0, prev) + "garbage\n");
    CHECK(run("validate " + path("v.csv")) == 1);
    CHECK(slurp(path("stderr.txt")).find("line 50:") != std::string::npos);
}

TEST_CASE("featurize writes one row per window") {
    put(path("f.cfg"), scenario(5, 20, 45));
    REQUIRE(run("simulate --scenario " + path("f.cfg") + " --out " + path("f.csv")) == 0);
    REQUIRE(run("featurize " + path("f.csv") + " --out " + path("feat1.csv")) == 0);
    REQUIRE(run("featurize " + path("f.csv") + " --out " + path("feat2.csv")) == 0);
    const auto f = slurp(path("feat1.csv"));
    CHECK(f == slurp(path("feat2.csv")));
    const auto header = f.substr(0, f.find('\n'));
    CHECK(std::count(header.begin(), header.end(), ',') + 1 == 280 + 2);
    CHECK(lines(f) == 20 + 1);
    REQUIRE(run("featurize " + path("f.csv") + " --out " + path("feat3.csv") + " --window-s 2") == 0);
    CHECK(lines(slurp(path("feat3.csv"))) == 10 + 1);
}

TEST_CASE("evaluate writes a report, scores and the best model") {
    put(path("e.cfg"), scenario(3, 60, 20));
    REQUIRE(run("simulate --scenario " + path("e.cfg") + " --out " + path("e.csv")) == 0);
    REQUIRE(run("evaluate " + path("e.csv") + " --task counting --models ridge,ols --k 3 --seed 4 --out " +
                path("r.json") + " --model-out " + path("m.json")) == 0);
    const auto report = nlohmann::json::parse(slurp(path("r.json")));
    CHECK(report.at("task") == "counting");
    CHECK(report.at("seed") == 4);
    const auto best = report.at("best_family").get<std::string>();
    CHECK((best == "Ridge" || best == "Linear"));
    CHECK(slurp(path("stdout.txt")).find("best family: " + best) != std::string::npos);

    const auto scores = slurp(path("r.scores.csv"));
    CHECK(lines(scores) == 1 + 3 + 1);

    const auto model = bleocc::TrainedModel::from_json(nlohmann::json::parse(slurp(path("m.json"))));
    CHECK(std::string(bleocc::to_string(model.spec().family)) == best);
    bleocc::ScalerParams scaler;
    bleocc::SelectionMask mask;
    bool has_mask = false;
    bleocc::parse_preprocess(slurp(path("m.json.preprocess")), scaler, mask, has_mask);
    CHECK(scaler.columns() == 3 * 56);
    REQUIRE(has_mask);
    CHECK(mask.kept.size() == model.n_features());

    const auto first = slurp(path("r.json"));
    REQUIRE(run("evaluate " + path("e.csv") + " --task counting --models ridge,ols --k 3 --seed 4 --out " +
                path("r2.json")) == 0);
    CHECK(slurp(path("r2.json")) == first);
    CHECK(slurp(path("r2.scores.csv")) == scores);
}

TEST_CASE("evaluate rejects bad requests") {
    put(path("d.cfg"), scenario(2, 20, 10));
    REQUIRE(run("simulate --scenario " + path("d.cfg") + " --out " + path("d.csv")) == 0);
    CHECK(run("evaluate " + path("d.csv") + " --task detection --representation raw --out " + path("dr.json")) == 2);
    CHECK(slurp(path("stderr.txt")).find("raw") != std::string::npos);
    CHECK_FALSE(fs::exists(path("dr.json")));
    CHECK(run("evaluate " + path("d.csv") + " --task detection --models ridge --out " + path("dr.json")) == 2);
    CHECK(run("evaluate " + path("d.csv") + " --models perceptron --out " + path("dr.json")) == 2);
}

TEST_CASE("failed runs leave no outputs behind") {
    put(path("p.cfg"), scenario(2, 20, 10));
    REQUIRE(run("simulate --scenario " + path("p.cfg") + " --out " + path("p.csv")) == 0);
    const auto report = path("p.json");
    CHECK(run("evaluate " + path("p.csv") + " --task counting --models ridge --k 3 --seed 1 --out " + report +
              " --scores " + path("no_such_dir/p.scores.csv")) == 1);
    CHECK_FALSE(fs::exists(report));
    CHECK_FALSE(fs::exists(report + ".partial"));

    // a stage failure is reported by name
    auto text = slurp(path("p.csv"));
    put(path("short.csv"), text.substr(0, text.find('\n', text.find('\n', text.find('\n') + 1) + 1) + 1));
    fs::copy_file(path("p.meta"), path("short.meta"), fs::copy_options::overwrite_existing);
    CHECK(run("evaluate " + path("short.csv") + " --task counting --models ridge --seed 1 --out " + report) == 1);
    CHECK(slurp(path("stderr.txt")).find("error in stage '") != std::string::npos);
    CHECK_FALSE(fs::exists(report));
}
