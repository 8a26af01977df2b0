#include <CLI11.hpp>

#include <iostream>

#include "nilgrowth/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nilgrowth: growth of product sets and convolution powers in groups of polynomial growth"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    int jobs = 1;
    std::uint64_t cap = 0;
    std::uint64_t seed = 0;
    long trials = -1;
    bool has_cap = false, has_seed = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario config (JSON)");
    run->add_option("config", config_path, "scenario config file")->required();
    run->add_option("--out", out_dir, "artifact output directory");
    run->add_option("--jobs", jobs, "parallel independent scenarios");
    run->add_option("--cap", cap, "state-count cap override")->each([&](const std::string&) { has_cap = true; });
    run->add_option("--seed", seed, "seed override")->each([&](const std::string&) { has_seed = true; });
    run->add_option("--trials", trials, "trial-count override");

    std::string artifact_path, plot_out = "plot.csv";
    CLI::App* plot = app.add_subcommand("plot", "reshape an artifact CSV into tidy (series,x,y) rows");
    plot->add_option("artifact", artifact_path, "artifact CSV")->required();
    plot->add_option("--out", plot_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : nilgrowth::scenario::kExitParse;
    }

    if (run->parsed()) {
        nilgrowth::scenario::RunOptions opt;
        opt.out_dir = out_dir;
        opt.jobs = jobs;
        if (has_cap) opt.cap = cap;
        if (has_seed) opt.seed = seed;
        if (trials >= 0) opt.trials = trials;
        return nilgrowth::scenario::run_config_file(config_path, opt, std::cerr);
    }
    return nilgrowth::scenario::emit_plot_series(artifact_path, plot_out, std::cerr);
}
