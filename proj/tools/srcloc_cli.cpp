// srcloc: acoustic source localisation pipeline.
//
//   srcloc simulate   build the dataset (solver traces, noisy test observations)
//   srcloc train      fit the surrogate network, estimate sigma1^2
//   srcloc infer      localise one observation CSV
//   srcloc suite      localise every test source
//   srcloc ablate     receiver-removal study on one source
//   srcloc symmetry   mirror-ambiguity demo with co-linear receivers
//
// Exit codes: 0 ok, 1 config, 2 I/O, 3 numerical, 4 identifiability.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srcloc/config.hpp"
#include "srcloc/dataset.hpp"
#include "srcloc/errors.hpp"
#include "srcloc/experiments.hpp"
#include "srcloc/inference.hpp"
#include "srcloc/pipeline.hpp"
#include "srcloc/rng.hpp"
#include "srcloc/surrogate.hpp"

namespace fs = std::filesystem;
using namespace srcloc;

namespace {

void log_line(const std::string& msg) { std::cerr << "[srcloc] " << msg << std::endl; }

fs::path make_run_dir() {
    const char* env = std::getenv("SRCLOC_RUN_ROOT");
    const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream name;
    name << std::put_time(&tm, "%Y%m%d-%H%M%S");
    fs::path dir = root / name.str();
    for (int n = 1; fs::exists(dir); ++n) dir = root / (name.str() + "-" + std::to_string(n));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
    return dir;
}

fs::path start_run(const config::Config& cfg, const std::string& command) {
    const fs::path dir = make_run_dir();
    config::write_config(cfg, dir / "config.txt");
    log_line(command + ": run directory " + dir.string());
    return dir;
}

nn::Mlp load_trained(const config::Config& cfg) {
    if (!fs::exists(cfg.model_path)) {
        throw IoError("missing model file '" + cfg.model_path + "' (run `srcloc train` first)");
    }
    nn::Mlp net = nn::load_model(cfg.model_path);
    if (!net.sigma1_sq) throw IoError("model file '" + cfg.model_path + "' carries no sigma1_sq estimate");
    return net;
}

data::Dataset load_dataset(const config::Config& cfg, bool train, bool clean) {
    if (!fs::exists(fs::path(cfg.dataset_dir) / "manifest.txt")) {
        throw IoError("missing dataset '" + cfg.dataset_dir + "' (run `srcloc simulate` first)");
    }
    return data::read_dataset(cfg.dataset_dir, train, clean);
}

int cmd_simulate(const config::Config& cfg) {
    const data::DatasetManifest manifest = cfg.manifest();
    log_line("simulate: " + std::to_string(manifest.train_sources.size()) + " train + " +
             std::to_string(manifest.test_sources.size()) + " test sources on " + std::to_string(cfg.grid.nx) + "x" +
             std::to_string(cfg.grid.ny));
    const data::Dataset ds = data::build_dataset(manifest, cfg.workers);
    data::write_dataset(ds, cfg.dataset_dir);
    config::write_config(cfg, fs::path(cfg.dataset_dir) / "config.txt");
    log_line("simulate: wrote " + cfg.dataset_dir);
    return 0;
}

int cmd_train(const config::Config& cfg) {
    const data::Dataset ds = load_dataset(cfg, true, true);
    const nn::Samples train = pipeline::train_samples(ds);
    const nn::Samples test = pipeline::test_samples(ds);
    const fs::path run = start_run(cfg, "train");
    log_line("train: " + std::to_string(train.size()) + " training rows, " + std::to_string(test.size()) + " test rows");

    std::ofstream history(run / "history.csv");
    history << "epoch,lr,train_mse,test_mse,best_test_mse\n";
    const auto result = nn::train(pipeline::initial_model(cfg), train, test, cfg.train_config(), [&](const nn::EpochStats& s) {
        history << s.epoch << ',' << data::format_double(s.learning_rate) << ',' << data::format_double(s.train_mse) << ','
                << data::format_double(s.validation_mse) << ',' << data::format_double(s.best_validation_mse) << '\n';
        history.flush();
        log_line("epoch " + std::to_string(s.epoch) + " train " + data::format_double(s.train_mse) + " test " +
                 data::format_double(s.validation_mse));
    });
    nn::save_model(result.net, cfg.model_path);
    nn::save_model(result.net, run / "model.txt");
    log_line("train: sigma1_sq = " + data::format_double(result.sigma1_sq) + " (best epoch " +
             std::to_string(result.best_epoch) + "), model " + cfg.model_path);
    return 0;
}

int cmd_infer(const config::Config& cfg, const std::string& obs_path) {
    const nn::Mlp net = load_trained(cfg);
    const std::string path = obs_path.empty() ? cfg.observations : obs_path;
    if (path.empty()) throw ConfigError("inference.observations", "no observation file given");
    const data::ObservationSet obs = data::observations_from_rows(data::read_trace_csv(path), cfg.sigma0_sq, cfg.source);
    const fs::path run = start_run(cfg, "infer");
    const infer::SurrogateForward model(net);
    const auto loc = exp::localize(obs, model, {obs.sigma0_sq, *net.sigma1_sq}, cfg.localization(), 0);
    infer::write_chain_csv(loc.chain, run / "chain.csv");
    infer::write_summary(loc.summary, run / "summary.txt");
    infer::write_grid_csv(loc.grid, run / "log_posterior_grid.csv");
    std::optional<Point> truth;
    if (obs.source_truth) truth = obs.source_truth->location;
    fs::create_directories(run / "heatmaps");
    exp::export_heatmap(exp::bin_samples(loc.chain.samples, cfg.heatmap_bins), truth, run / "heatmaps" / "chain");
    std::cout << "mean " << data::format_double(loc.summary.mean.x) << ' ' << data::format_double(loc.summary.mean.y);
    if (loc.summary.mse) std::cout << " mse " << data::format_double(*loc.summary.mse);
    std::cout << " acceptance " << data::format_double(loc.summary.acceptance_rate) << '\n';
    return 0;
}

int cmd_suite(const config::Config& cfg) {
    const nn::Mlp net = load_trained(cfg);
    const data::Dataset ds = load_dataset(cfg, false, false);
    const fs::path run = start_run(cfg, "suite");
    const infer::SurrogateForward model(net);
    log_line("suite: " + std::to_string(ds.test.size()) + " test sources, sigma1_sq " + data::format_double(*net.sigma1_sq));
    const auto suite = exp::run_localization_suite(ds.test, model, *net.sigma1_sq, cfg.localization(), true);
    exp::write_suite_csv(suite, run / "summary.csv");
    fs::create_directories(run / "heatmaps");
    for (const auto& row : suite.sources) {
        if (!row.chain) continue;
        exp::export_heatmap(exp::bin_samples(row.chain->samples, cfg.heatmap_bins), row.truth,
                            run / "heatmaps" / ("src_" + std::to_string(row.index)));
        if (cfg.save_chains) infer::write_chain_csv(*row.chain, run / ("chain_" + std::to_string(row.index) + ".csv"));
    }
    kv::Entries agg{
        {"sources", std::to_string(suite.sources.size())},
        {"aggregate_mse", suite.aggregate_mse ? data::format_double(*suite.aggregate_mse) : "none"},
        {"median_mse", suite.median_mse ? data::format_double(*suite.median_mse) : "none"},
        {"sigma1_sq", data::format_double(*net.sigma1_sq)},
    };
    kv::write_file(agg, run / "aggregate.txt");
    std::cout << "aggregate_mse " << agg[1].second << " median_mse " << agg[2].second << '\n';
    return 0;
}

int cmd_ablate(const config::Config& cfg) {
    const nn::Mlp net = load_trained(cfg);
    const data::DatasetManifest m = cfg.manifest();
    const data::ObservationSet obs = pipeline::synthetic_observations(
        m, cfg.ablation_source, cfg.receivers, Rng::derive_seed(cfg.seed, "ablation-noise"));
    const auto subsets = exp::removal_subsets(cfg.receivers, cfg.ablation_order);
    const fs::path run = start_run(cfg, "ablate");
    const infer::SurrogateForward model(net);
    const auto rows = exp::ablate_receivers(obs, model, {m.sigma0_sq, *net.sigma1_sq}, cfg.localization(), subsets);
    exp::write_ablation_csv(rows, run / "ablation.csv");
    for (const auto& r : rows) {
        std::cout << r.receivers.size() << " receivers: mean (" << data::format_double(r.summary.mean.x) << ", "
                  << data::format_double(r.summary.mean.y) << ") mse " << data::format_double(r.summary.mse.value_or(0.0))
                  << '\n';
    }
    return 0;
}

int cmd_symmetry(const config::Config& cfg) {
    const data::DatasetManifest m = cfg.manifest();
    std::optional<nn::Mlp> net;
    std::unique_ptr<infer::ForwardModel> model;
    double sigma1_sq = 0.0;
    if (cfg.symmetry_forward == "surrogate") {
        net = load_trained(cfg);
        sigma1_sq = *net->sigma1_sq;
        model = std::make_unique<infer::SurrogateForward>(*net);
    } else {
        model = std::make_unique<infer::SolverForward>(m.source, m.medium, m.grid);
    }
    const fs::path run = start_run(cfg, "symmetry");
    fs::create_directories(run / "heatmaps");
    const std::uint64_t noise = Rng::derive_seed(cfg.seed, "symmetry-noise");
    const std::pair<const char*, data::ReceiverSet> cases[] = {
        {"colinear", data::ReceiverSet{cfg.symmetry_receivers}},
        {"default", cfg.receivers},
    };
    for (const auto& [name, receivers] : cases) {
        const auto obs = pipeline::synthetic_observations(m, cfg.symmetry_source, receivers, noise);
        const auto rep = exp::symmetry_demo(obs, *model, {m.sigma0_sq, sigma1_sq}, cfg.grid_resolution, cfg.workers);
        exp::write_symmetry_report(rep, run / (std::string("symmetry_") + name + ".txt"));
        exp::export_heatmap(rep.grid, rep.truth, run / "heatmaps" / (std::string("grid_") + name));
        std::cout << name << ": " << rep.modes.size() << " modes, gap " << data::format_double(rep.gap)
                  << (rep.top_two_mirrored ? " (top two mirrored)" : "") << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian acoustic source localisation with a neural surrogate"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    std::optional<long long> seed;
    std::optional<int> workers;
    std::optional<int> iterations;
    std::optional<int> epochs;
    std::string dataset_dir;
    std::string model_path;
    std::string obs_path;

    app.add_option("-c,--config", config_path, "Key-value configuration file");
    app.add_option("--set", sets, "Override a key: --set mh.iterations=1000 (repeatable)");
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--workers", workers, "Worker thread cap");
    app.add_option("--iterations", iterations, "MH iterations");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--dataset", dataset_dir, "Dataset directory");
    app.add_option("--model", model_path, "Model file");

    auto* simulate = app.add_subcommand("simulate", "Build the dataset");
    auto* train = app.add_subcommand("train", "Train the surrogate");
    auto* infer = app.add_subcommand("infer", "Localise one observation file");
    infer->add_option("--obs", obs_path, "Observation CSV (noisy test file)");
    auto* suite = app.add_subcommand("suite", "Localise every test source");
    auto* ablate = app.add_subcommand("ablate", "Receiver ablation table");
    auto* symmetry = app.add_subcommand("symmetry", "Mirror ambiguity demo");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::kConfig;
    }

    try {
        kv::Entries overrides;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
            overrides.emplace_back(kv::trim(s.substr(0, eq)), kv::trim(s.substr(eq + 1)));
        }
        if (seed) overrides.emplace_back("seed", std::to_string(*seed));
        if (workers) overrides.emplace_back("workers", std::to_string(*workers));
        if (iterations) overrides.emplace_back("mh.iterations", std::to_string(*iterations));
        if (epochs) overrides.emplace_back("train.epochs", std::to_string(*epochs));
        if (!dataset_dir.empty()) overrides.emplace_back("dataset.dir", dataset_dir);
        if (!model_path.empty()) overrides.emplace_back("model.path", model_path);
        std::optional<fs::path> file;
        if (!config_path.empty()) file = config_path;
        const config::Config cfg = config::resolve(file, overrides);

        if (*simulate) return cmd_simulate(cfg);
        if (*train) return cmd_train(cfg);
        if (*infer) return cmd_infer(cfg, obs_path);
        if (*suite) return cmd_suite(cfg);
        if (*ablate) return cmd_ablate(cfg);
        if (*symmetry) return cmd_symmetry(cfg);
        return exit_code::kConfig;
    } catch (const Error& e) {
        std::cerr << "error[" << e.exit_code() << "]: " << e.what() << std::endl;
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error[" << exit_code::kNumerical << "]: " << e.what() << std::endl;
        return exit_code::kNumerical;
    }
}
