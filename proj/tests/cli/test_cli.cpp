#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "nilm_cli_test";

struct Result {
    int code;
    std::string err;
};

Result run(const std::string& args) {
    const fs::path err = kScratch / "stderr.txt";
    const std::string cmd = std::string(NILM_BIN) + " " + args + " >" + (kScratch / "stdout.txt").string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {status, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmall = "--set data.appliances=3 --set data.max_active=2 --set data.windows=30 --set data.fs=5000 --set train.epochs=2 --set train.ssl_epochs=1 --set baseline.epochs=2 --set vae.epochs=5";

void full_chain(const fs::path& dir) {
    REQUIRE(run("simulate --out " + dir.string() + " " + kSmall).code == 0);
    for (const char* cmd : {"pretrain", "train", "eval", "decompose", "render-signature"}) {
        const auto r = run(std::string(cmd) + " --run " + dir.string());
        const std::string what = std::string(cmd) + ": " + r.err;
        INFO(what);
        REQUIRE(r.code == 0);
    }
}

}  // namespace

TEST_CASE("cli: usage errors") {
    fs::create_directories(kScratch);
    CHECK(run("").code != 0);
    CHECK(run("bogus").code != 0);
    CHECK(run("train --run " + (kScratch / "x").string() + " --bogus").code != 0);

    const auto unknown = run("simulate --out " + (kScratch / "u").string() + " --set data.nonsense=3");
    CHECK(unknown.code != 0);
    CHECK(unknown.err.find("data.nonsense") != std::string::npos);

    const fs::path cfg = kScratch / "bad.cfg";
    std::ofstream(cfg) << "seed = 3\n\ntrain.epoch = 4\n";
    const auto bad_file = run("simulate --out " + (kScratch / "u").string() + " --config " + cfg.string());
    CHECK(bad_file.code != 0);
    CHECK(bad_file.err.find("bad.cfg:3") != std::string::npos);

    const auto bad_value = run("simulate --out " + (kScratch / "u").string() + " --set data.split=abc");
    CHECK(bad_value.code != 0);
    CHECK(bad_value.err.find("data.split") != std::string::npos);
}

TEST_CASE("cli: train without a dataset names the missing file") {
    const fs::path dir = kScratch / "empty";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto r = run("train --run " + dir.string());
    CHECK(r.code != 0);
    CHECK(r.err.find((dir / "dataset" / "index.csv").string()) != std::string::npos);
}

TEST_CASE("cli: selftest passes") { CHECK(run("selftest").code == 0); }

TEST_CASE("cli: reports agree, runs are reproducible and read-only commands are idempotent") {
    const fs::path a = kScratch / "run_a", b = kScratch / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);
    full_chain(a);
    full_chain(b);

    // eval macro-F1 equals the last line of the training log
    std::ifstream log(a / "reports" / "train_log.jsonl");
    std::string line, last;
    while (std::getline(log, line))
        if (!line.empty()) last = line;
    const double logged = nlohmann::json::parse(last).at("test_macro_f1").get<double>();
    std::ifstream metrics(a / "reports" / "metrics.csv");
    std::getline(metrics, line);
    std::getline(metrics, line);
    REQUIRE(line.rfind("pipeline,", 0) == 0);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() >= 7);
    CHECK(std::stod(cells[6]) == doctest::Approx(logged).epsilon(0).scale(1).epsilon(5e-7));

    // identical config and seed: byte-identical artifacts and manifests
    const std::string manifest = slurp(a / "manifest.json");
    CHECK(manifest == slurp(b / "manifest.json"));
    const auto j = nlohmann::json::parse(manifest);
    CHECK(j.at("seed").get<std::uint64_t>() == 1);
    CHECK(j.at("artifacts").contains("checkpoints/model.ckpt"));
    CHECK(j.at("artifacts").contains("reports/energy.csv"));
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        CHECK_MESSAGE(slurp(e.path()) == slurp(b / rel), rel.string());
        ++compared;
    }
    CHECK(compared > 10);

    const std::string report = slurp(a / "reports" / "metrics.csv");
    const std::string pgm = slurp(a / "signatures" / "window_0000_cycle_000_gg.pgm");
    REQUIRE(run("eval --run " + a.string()).code == 0);
    REQUIRE(run("render-signature --run " + a.string()).code == 0);
    CHECK(slurp(a / "reports" / "metrics.csv") == report);
    CHECK(slurp(a / "signatures" / "window_0000_cycle_000_gg.pgm") == pgm);
    CHECK(slurp(a / "manifest.json") == manifest);

    // a different seed changes the data
    const fs::path c = kScratch / "run_c";
    fs::remove_all(c);
    REQUIRE(run("simulate --out " + c.string() + " " + kSmall + " --set seed=2").code == 0);
    CHECK(slurp(c / "dataset" / "window_0000.csv") != slurp(a / "dataset" / "window_0000.csv"));
}

TEST_CASE("cli: ingest and continual learning of a new appliance") {
    const fs::path old_run = kScratch / "old", new_run = kScratch / "new", ingested = kScratch / "ingested";
    for (const auto& d : {old_run, new_run, ingested}) fs::remove_all(d);
    REQUIRE(run("simulate --out " + old_run.string() + " " + kSmall).code == 0);
    REQUIRE(run("train --run " + old_run.string()).code == 0);
    REQUIRE(run("simulate --out " + new_run.string() + " " + kSmall + " --set data.appliances=4 --set data.required=3 --set seed=9").code == 0);

    const auto r = run("learn-new --run " + old_run.string() + " --data " + (new_run / "dataset").string());
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(old_run / "checkpoints" / "model_continual.ckpt"));
    const std::string report = slurp(old_run / "reports" / "learn_new.csv");
    CHECK(report.find("old_task,") != std::string::npos);
    CHECK(report.find("new_task/class_3,") != std::string::npos);

    const auto missing = run("learn-new --run " + old_run.string() + " --data " + (kScratch / "nowhere").string());
    CHECK(missing.code != 0);
    CHECK(missing.err.find("index.csv") != std::string::npos);

    const fs::path src = old_run / "dataset" / "window_0001.csv";
    const auto ing = run("ingest --out " + ingested.string() + " --input " + src.string() + " --input " + (old_run / "dataset" / "window_0002.csv").string() +
                         " --set ingest.fs=5000");
    INFO(ing.err);
    REQUIRE(ing.code == 0);
    CHECK(slurp(ingested / "dataset" / "window_0000.csv") == slurp(src));
    CHECK(run("train --run " + ingested.string() + " --set train.epochs=1").code == 0);

    const auto no_file = run("ingest --out " + ingested.string() + " --input " + (kScratch / "absent.csv").string());
    CHECK(no_file.code != 0);
    CHECK(no_file.err.find("absent.csv") != std::string::npos);
}
