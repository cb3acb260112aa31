// qplab: command-line front end for the quasi-periodic operator experiments.
//
//   qplab [--config PATH] [--out DIR] [--seed INT] [--jobs INT] [--set sec.key=value]... <command>
//
// Precedence: built-in defaults < config file < QPLAB_<SECTION>_<KEY> < flags.

#include "qplab/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace qplab;

    CLI::App app{"Quasi-periodic Schrodinger operator lab"};
    app.set_version_flag("--version", std::string(kVersion));
    std::string config_path, out_dir;
    std::optional<std::int64_t> seed, jobs;
    std::vector<std::string> assignments;
    bool print_config = false;
    app.add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (output.dir)");
    app.add_option("--seed", seed, "random seed (run.seed)");
    app.add_option("--jobs", jobs, "worker threads, 0 = all cores (run.jobs)");
    app.add_option("--set", assignments, "override one entry, section.key=value");
    app.add_flag("--print-config", print_config, "print the effective configuration and exit");
    app.require_subcommand(1);

    const std::map<std::string, std::string> help = {
        {"spectrum", "eigenvalues of the direct or dual truncation"},
        {"transport", "moments and velocity operators of delta_0"},
        {"cocycle", "Lyapunov exponent and rotation number on an energy grid"},
        {"ids", "integrated density of states and its rotation-number check"},
        {"duality", "duality defect, localization profile and spectra comparison"},
        {"reduce", "reducing frames from dual eigenvectors"},
        {"verify-lemmas", "numerical checks of the weighted-sequence inequalities"},
        {"sweep", "run sweep.command over sweep.axis = sweep.values"}};
    for (const auto& name : subcommands()) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    Config cfg;
    try {
        cfg = merge_with_defaults(config_path.empty() ? Config{} : Config::load(config_path));
        cfg.apply_env();
        for (const auto& a : assignments) apply_assignment(cfg, a);
        if (!out_dir.empty()) cfg.set("output", "dir", out_dir);
        if (seed) cfg.set("run", "seed", *seed);
        if (jobs) cfg.set("run", "jobs", *jobs);
    } catch (...) {
        return exit_code_for_current_exception(std::cerr);
    }
    if (print_config) {
        std::cout << cfg.serialize();
        return kExitOk;
    }
    return run(command, cfg, std::cout, std::cerr);
}
