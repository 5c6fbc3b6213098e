// Batch front end: nlarch_cli --command {simulate|fit|check|diagnose} [--config PATH] [--input PATH] [--out DIR] [--seed N]

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlarch/app.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Simulate, fit and check nonlinear AR models with nonlinear ARCH errors"};
    nlarch::app::CliArgs args;
    std::string config, input, out, command;
    std::uint64_t seed = 0;
    bool quiet = false;
    auto* o_config = cli.add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
    auto* o_input = cli.add_option("--input", input, "CSV series with a header row");
    auto* o_out = cli.add_option("--out", out, "output directory");
    auto* o_seed = cli.add_option("--seed", seed, "random seed");
    auto* o_command = cli.add_option("--command", command, "workflow to run")
                          ->check(CLI::IsMember({"simulate", "fit", "check", "diagnose"}));
    cli.add_flag("-q,--quiet", quiet, "suppress progress output");
    cli.set_version_flag("--version", nlarch::app::kVersion);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : nlarch::app::kConfigFail;
    }

    if (*o_config) args.config_path = config;
    if (*o_input) args.input = input;
    if (*o_out) args.out = out;
    if (*o_seed) args.seed = seed;
    if (*o_command) args.command = command;
    args.verbosity = quiet ? 0 : 1;

    nlarch::app::RunConfig rc;
    try {
        rc = nlarch::app::resolve(args, [](const char* name) -> std::optional<std::string> {
            if (const char* v = std::getenv(name)) return std::string(v);
            return std::nullopt;
        });
    } catch (const nlarch::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return nlarch::app::exit_code(e.category());
    }
    return nlarch::app::run(rc);
}
