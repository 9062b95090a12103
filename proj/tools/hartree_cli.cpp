#include <CLI11.hpp>

#include "hartree/cli.hpp"

int main(int argc, char** argv) {
    using namespace hartree::cli;
    CLI::App app{"Ground states of the pseudo-relativistic Hartree equation"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Options opt;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "configuration file")->required();
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--threads", opt.threads, "worker threads for multistart")
            ->check(CLI::Range(1, 256))
            ->capture_default_str();
    };
    auto* profile = app.add_subcommand("profile", "tabulate the extension profile and its asymptotic fit");
    auto* solve = app.add_subcommand("solve", "compute the ground state and compare levels");
    auto* verify = app.add_subcommand("verify", "run the extension checks on a stored trace field");
    add_common(profile);
    add_common(solve);
    add_common(verify);
    verify->add_option("--field", opt.field, "field file (.csv or .bin)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }
    for (auto* sub : {profile, solve, verify})
        if (sub->count("--seed")) opt.seed = seed;

    init_logging();
    if (*profile) return cmd_profile(opt);
    if (*solve) return cmd_solve(opt);
    return cmd_verify(opt);
}
