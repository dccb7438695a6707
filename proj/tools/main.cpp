#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rshjb/commands.hpp"
#include "rshjb/run_config.hpp"
#include "rshjb/version.hpp"

namespace {

int dispatch(const std::string& command, const rshjb::CommandOptions& opts) {
    const rshjb::RunConfig cfg = rshjb::load_run_config(opts.config_path);
    if (command == "validate") return rshjb::cmd_validate(cfg, opts, std::cout);
    if (command == "coeffs") return rshjb::cmd_coeffs(cfg, opts, std::cout);
    if (command == "closed-form") return rshjb::cmd_closed_form(cfg, opts, std::cout);
    if (command == "solve") return rshjb::cmd_solve(cfg, opts, std::cout);
    if (command == "simulate") return rshjb::cmd_simulate(cfg, opts, std::cout);
    if (command == "verify") return rshjb::cmd_verify(cfg, opts, std::cout);
    std::cerr << "unknown command: " << command << "\n";
    return rshjb::kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-regime stochastic control: coupled elliptic solver and Monte Carlo "
                 "verifier"};
    app.set_version_flag("--version", rshjb::kToolVersion);
    app.require_subcommand(1);

    rshjb::CommandOptions opts;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_out = false;
    bool have_seed = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "Path to the JSON run configuration")
            ->required();
        sub->add_option("--out", out_dir, "Output directory (overrides the config)")
            ->each([&](const std::string&) { have_out = true; });
        sub->add_option("--seed", seed, "Master seed (overrides the config)")
            ->each([&](const std::string&) { have_seed = true; });
        sub->add_flag("--quiet", opts.quiet, "Suppress stdout reports");
    };

    for (const char* name : {"validate", "coeffs", "closed-form", "solve", "simulate",
                             "verify"}) {
        add_common(app.add_subcommand(name));
    }

    CLI11_PARSE(app, argc, argv);
    if (have_out) opts.out_dir = out_dir;
    if (have_seed) opts.seed = seed;

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, opts);
    } catch (const rshjb::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rshjb::kExitValidation;
    } catch (const rshjb::NonPositiveLambda& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rshjb::kExitValidation;
    } catch (const rshjb::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rshjb::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rshjb::kExitSolver;
    }
}
