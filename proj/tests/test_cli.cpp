#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "srcloc_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Runs the CLI inside the scratch directory with its own run root and
// returns the exit status.
int run(const std::string& args, const std::string& run_root = "runs") {
    const std::string cmd = "cd '" + work().string() + "' && SRCLOC_RUN_ROOT='" + run_root + "' '" SRCLOC_CLI_PATH "' " +
                            args + " > last.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path only_run(const std::string& root) {
    fs::path found;
    int n = 0;
    for (const auto& e : fs::directory_iterator(work() / root)) {
        found = e.path();
        ++n;
    }
    REQUIRE(n == 1);
    return found;
}

const std::string kSmall =
    " --set grid.nx=8 --set grid.ny=8 --set grid.nt=12 --set dataset.lattice_side=4"
    " --set model.hidden='12 12' --set model.skips= --set train.epochs=2 --set train.batch_size=32"
    " --set mh.iterations=400 --set mh.burn_in=100 --set inference.grid_resolution=12 --set heatmap.bins=10";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("simulate --set dataset.sigma0_sq=-1") == 1);
    CHECK(slurp(work() / "last.log").find("dataset.sigma0_sq") != std::string::npos);
    CHECK(run("simulate --set nonsense") == 1);
    CHECK(run("simulate --config /nonexistent/cfg.txt") == 2);
}

TEST_CASE("missing artifacts exit with the I/O code") {
    CHECK(run("infer --model absent_model.txt --obs nothing.csv") == 2);
    CHECK(slurp(work() / "last.log").find("missing model file") != std::string::npos);
    CHECK(run("suite --model absent_model.txt") == 2);
}

TEST_CASE("small pipeline end to end") {
    REQUIRE(run("simulate --dataset ds_a" + kSmall) == 0);
    REQUIRE(run("simulate --dataset ds_b" + kSmall) == 0);
    CHECK(fs::exists(work() / "ds_a" / "manifest.txt"));
    CHECK(fs::exists(work() / "ds_a" / "train" / "src_7.csv"));
    CHECK(slurp(work() / "ds_a" / "test" / "src_3.csv") == slurp(work() / "ds_b" / "test" / "src_3.csv"));

    REQUIRE(run("train --dataset ds_a --model m.txt" + kSmall, "runs_train") == 0);
    CHECK(fs::exists(work() / "m.txt"));
    const fs::path tr = only_run("runs_train");
    CHECK(fs::exists(tr / "config.txt"));
    CHECK(fs::exists(tr / "history.csv"));

    REQUIRE(run("suite --dataset ds_a --model m.txt" + kSmall, "runs_s1") == 0);
    REQUIRE(run("suite --dataset ds_a --model m.txt" + kSmall, "runs_s2") == 0);
    const fs::path s1 = only_run("runs_s1");
    const fs::path s2 = only_run("runs_s2");
    CHECK(slurp(s1 / "summary.csv") == slurp(s2 / "summary.csv"));
    CHECK(fs::exists(s1 / "heatmaps" / "src_0.csv"));
    CHECK(fs::exists(s1 / "heatmaps" / "src_7.normalized.csv"));
    CHECK(fs::exists(s1 / "aggregate.txt"));
    CHECK(slurp(s1 / "config.txt").find("mh.iterations = 400") != std::string::npos);

    // The echoed config reproduces the run on its own.
    REQUIRE(run("suite --config '" + (s1 / "config.txt").string() + "'", "runs_s3") == 0);
    CHECK(slurp(only_run("runs_s3") / "summary.csv") == slurp(s1 / "summary.csv"));

    REQUIRE(run("infer --model m.txt --obs ds_a/test/src_2.csv" + kSmall, "runs_i") == 0);
    const fs::path inf = only_run("runs_i");
    CHECK(fs::exists(inf / "chain.csv"));
    CHECK(fs::exists(inf / "summary.txt"));
    CHECK(slurp(inf / "chain.csv").rfind("iter,y1,y2,log_post,accepted\n", 0) == 0);

    REQUIRE(run("ablate --model m.txt" + kSmall, "runs_a") == 0);
    std::ifstream ab(only_run("runs_a") / "ablation.csv");
    int rows = 0;
    for (std::string l; std::getline(ab, l);) ++rows;
    CHECK(rows == 5);

    CHECK(run("ablate --model m.txt" + kSmall +
                  " --set dataset.receivers='0.5 0.25; 0.5 0.75; 0.2 0.4' --set ablation.order='0.2 0.4'",
              "runs_a2") == 4);
    CHECK(slurp(work() / "last.log").find("error[4]") != std::string::npos);

    REQUIRE(run("symmetry --set symmetry.forward=solver" + kSmall, "runs_sym") == 0);
    const fs::path sym = only_run("runs_sym");
    CHECK(fs::exists(sym / "symmetry_colinear.txt"));
    CHECK(fs::exists(sym / "symmetry_default.txt"));
    CHECK(fs::exists(sym / "heatmaps" / "grid_colinear.csv"));
}

TEST_CASE("numerical failures exit with code 3") {
    REQUIRE(run("simulate --dataset ds_div" + kSmall) == 0);
    CHECK(run("train --dataset ds_div --model div.txt --set train.optimizer=sgd --set train.lr=1000" + kSmall,
              "runs_div") == 3);
    CHECK(slurp(work() / "last.log").find("error[3]") != std::string::npos);
}

} // TEST_SUITE
