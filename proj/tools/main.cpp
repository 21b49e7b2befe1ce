#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"

namespace {

using Command = void (*)(const tara::RunConfig&, const std::filesystem::path&, std::ostream&);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Depth-camera identity tracking: synthetic data, preprocessing, training, consensus inference "
                 "and the day-over-day re-calibration experiment."};
    app.fallthrough();
    app.require_subcommand(1);

    tara::cli::GlobalOptions opts;
    std::string config, out;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "Run configuration file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed; overrides the config file");
    app.add_option("--out", out, "Output directory")->default_str("out");
    app.add_flag("--deterministic", opts.deterministic, "Single worker thread");
    app.add_option("--set", opts.overrides, "Override a config key, e.g. --set train.epochs=10")->take_all();
    bool dump = false;
    app.add_flag("--print-config", dump, "Print the resolved configuration to stdout and exit");

    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"synth", {"Generate a synthetic multi-day dataset", tara::cli::cmd_synth}},
        {"preprocess", {"Preprocess the frames of paths.dataset", tara::cli::cmd_preprocess}},
        {"train", {"Train the base model on schedule.train_day", tara::cli::cmd_train}},
        {"infer", {"Consensus identities for the visits of infer.day", tara::cli::cmd_infer}},
        {"evaluate", {"Score a consensus report against the RFID log", tara::cli::cmd_evaluate}},
        {"experiment", {"Base model plus iterative re-calibration over all days", tara::cli::cmd_experiment}},
    };
    for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

    CLI11_PARSE(app, argc, argv);

    std::string name;
    Command run = nullptr;
    for (const auto& [n, entry] : commands)
        if (app.got_subcommand(n)) {
            name = n;
            run = entry.second;
        }

    tara::RunConfig cfg;
    try {
        opts.config = config;
        if (*seed_opt) opts.seed = seed;
        if (!out.empty()) opts.out = out;
        cfg = tara::cli::resolve_config(opts);
    } catch (const std::exception& e) {
        std::cerr << "tara " << name << ": error [config]: " << e.what() << '\n';
        return 2;
    }
    if (dump) {
        std::cout << cfg.dump();
        return 0;
    }

    try {
        run(cfg, opts.out, std::cout);
    } catch (const tara::cli::StageError& e) {
        std::cerr << "tara " << name << ": error [" << e.stage() << "]: " << e.what() << '\n';
        return 1;
    } catch (const tara::InfeasibleConfig& e) {
        std::cerr << "tara " << name << ": error [config]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tara " << name << ": error [" << name << "]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
