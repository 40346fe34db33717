#include "dunkl/cli/runner.hpp"

#include <CLI11/CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode : int { ok = 0, validation = 1, numeric = 2, consistency = 3 };

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool no_timestamp = false;
};

int run(const std::string& subcommand, const Flags& flags) {
    using namespace dunkl::cli;
    json user = flags.config.empty() ? json::object() : read_json_file(flags.config);
    if (!user.is_object()) throw dunkl::ValidationError("config root must be a JSON object");
    if (flags.seed) user["seed"] = *flags.seed;
    if (flags.threads) user["threads"] = *flags.threads;
    if (!flags.out.empty()) user["out"] = flags.out;

    const auto cfg = parse_config(user, subcommand);
    const auto table = run_experiment(cfg, subcommand, {!flags.no_timestamp});
    if (cfg.out.empty()) write_csv(table, std::cout);
    else emit_csv(table, cfg.out);
    if (table.consistency_failure) {
        std::cerr << "verify-theorem: " << *table.consistency_failure << '\n';
        return consistency;
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dunkl heat kernel and Schroedinger semigroup experiments"};
    app.set_version_flag("--version", DUNKL_VERSION);
    app.require_subcommand(1);

    Flags flags;
    std::string chosen;
    for (std::string_view name : dunkl::cli::kSubcommands) {
        auto* sub = app.add_subcommand(std::string(name));
        sub->add_option("--config", flags.config, "JSON experiment config")->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "CSV output path (stdout when omitted)");
        sub->add_option("--seed", flags.seed, "Random seed (overrides the config)");
        sub->add_option("--threads", flags.threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
        sub->add_flag("--no-timestamp", flags.no_timestamp, "Omit the timestamp provenance line");
        sub->callback([&chosen, name] { chosen = std::string(name); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        return run(chosen, flags);
    } catch (const dunkl::cli::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return validation;
    } catch (const dunkl::ValidationError& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return validation;
    } catch (const dunkl::ConsistencyError& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return numeric;
    } catch (const dunkl::NumericError& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return numeric;
    } catch (const dunkl::DomainError& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return numeric;
    } catch (const dunkl::BudgetError& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return numeric;
    } catch (const std::exception& e) {
        std::cerr << chosen << ": " << e.what() << '\n';
        return numeric;
    }
}
