#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cefr/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Conditional expectation function ratio estimation"};
    app.require_subcommand(1);
    std::string config;
    std::string output;
    std::uint64_t seed = 0;

    for (const char* name : {"estimate", "select", "simulate", "band"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--output", output, "output directory (overrides output_dir)");
        sub->add_option("--seed-override", seed, "replace the config seed");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    std::optional<std::string> out_dir;
    if (chosen->count("--output")) out_dir = output;
    std::optional<std::uint64_t> seed_override;
    if (chosen->count("--seed-override")) seed_override = seed;
    return cefr::cli::run(cefr::cli::command_from_string(chosen->get_name()), config, out_dir, seed_override,
                          std::cout, std::cerr);
}
