#include <iostream>

#include <CLI11.hpp>

#include "invrec/experiment.hpp"

using namespace invrec;

int main(int argc, char** argv) {
    CLI::App app{"Reconstruct training data from group-invariant networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir, checkpoint, recon;
    int jobs = 1, verify_seeds = 20;
    bool quiet = false;

    auto common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the training and reconstruction seed");
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_option("--jobs", jobs, "parallel sweep cells")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", quiet, "only print results");
    };
    auto* train = app.add_subcommand("train", "train the invariant model, write checkpoint.girn and history.csv");
    auto* rec = app.add_subcommand("reconstruct", "run the configured reconstruction method");
    auto* eval = app.add_subcommand("evaluate", "match a reconstruction against the training set");
    auto* verify = app.add_subcommand("verify", "run the numerical property suite");
    auto* sweep = app.add_subcommand("sweep", "train/reconstruct/evaluate over group x n x method");
    for (auto* s : {train, rec, eval, sweep}) common(s, true);
    common(verify, false);
    rec->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/checkpoint.girn)");
    rec->add_option("--recon", recon, "reconstruction output (default <out>/recon.grec)");
    eval->add_option("--recon", recon, "reconstruction input (default <out>/recon.grec)");
    verify->add_option("--seeds", verify_seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (verify->parsed()) {
        const bool has_seed = verify->count("--seed") > 0;
        return cmd_verify(has_seed ? seed : 0, verify_seeds, std::cout, quiet);
    }

    RunOptions opts;
    CLI::App* active = app.get_subcommands().front();
    if (active->count("--seed") > 0) opts.seed = seed;
    if (!out_dir.empty()) opts.out = out_dir;
    if (!checkpoint.empty()) opts.checkpoint = checkpoint;
    if (!recon.empty()) opts.recon = recon;
    opts.jobs = jobs;
    opts.quiet = quiet;

    ExperimentConfig config;
    try {
        config = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    if (train->parsed()) return cmd_train(config, opts, std::cout, std::cerr);
    if (rec->parsed()) return cmd_reconstruct(config, opts, std::cout, std::cerr);
    if (eval->parsed()) return cmd_evaluate(config, opts, std::cout, std::cerr);
    return cmd_sweep(config, opts, std::cout, std::cerr);
}
