// whomog: batch runner for the library's studies.
//
//   whomog [--jobs J] [--output-dir DIR] <command> --config c.json
//
// Commands: solve, converge, homogenize, random-homogenize, hydro.
// Output goes to DIR (default $WHOMOG_OUTPUT_DIR, else ./whomog-out).

#include "whomog/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"W-measure elliptic solver, homogenization and exclusion-process experiments"};
    app.set_version_flag("--version", std::string(whomog::version));
    app.require_subcommand(1);

    int jobs = 1;
    std::string output_dir;
    if (const char* env = std::getenv("WHOMOG_OUTPUT_DIR"); env && *env) output_dir = env;
    else output_dir = "whomog-out";
    app.add_option("--jobs,-j", jobs, "Worker threads for independent N-levels, seeds or replicas")
        ->check(CLI::PositiveNumber);
    app.add_option("--output-dir,-o", output_dir, "Root directory for outputs (env WHOMOG_OUTPUT_DIR)");

    std::string config;
    for (const auto& name : whomog::experiment_commands()) {
        auto* sub = app.add_subcommand(name, "Run a " + name + " experiment");
        sub->add_option("--config,-c", config, "Experiment config (or a manifest from an earlier run)")
            ->required()
            ->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const auto res = whomog::run_experiment_file(config, output_dir, jobs, command);
    if (res.status != whomog::ExitStatus::Ok) {
        std::cerr << "whomog: " << res.error_type << ": " << res.message << '\n';
        return static_cast<int>(res.status);
    }
    std::cout << res.output_dir.string() << '\n';
    for (const auto& f : res.files) std::cout << "  " << f << '\n';
    return 0;
}
