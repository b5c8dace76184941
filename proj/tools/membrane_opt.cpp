// membrane-opt <subcommand> --config <path> [--out <dir>] [--seed <u64>]
#include "membrane/membrane.h"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> names;
    {
        std::istringstream in(membrane_subcommands());
        for (std::string s; in >> s;)
            names.push_back(s);
    }

    const std::map<std::string, std::string> about{
        {"solve", "solve the state equation and report the energy"},
        {"check", "test the load against the assumptions A1 and A2"},
        {"minimize", "minimize the energy over the rearrangement class"},
        {"maximize", "maximize the energy over the rearrangement class"},
        {"shape", "optimal placement of two materials"},
        {"sweep-gamma", "two-material optima over a range of volumes"},
        {"sweep-alpha", "two-material optima over a range of stiffnesses"},
        {"oracle", "compare against exhaustive search on a small grid"},
        {"multistart", "minimize from several random starts"},
    };

    CLI::App app{"Rearrangement optimization for the membrane design problem"};
    app.set_version_flag("--version", membrane_version());
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    for (const auto& name : names) {
        const auto it = about.find(name);
        auto* sub = app.add_subcommand(name, it == about.end() ? "" : it->second);
        sub->add_option("--config,-c", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", out, "output directory (overrides output.dir)");
        sub->add_option("--seed,-s", seed, "seed for randomized starts");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    const std::uint64_t seed_value = seed.value_or(0);
    const int status = membrane_run(sub.c_str(), config.c_str(), out.empty() ? nullptr : out.c_str(),
                                    seed ? &seed_value : nullptr);
    if (status != 0)
        std::cerr << "membrane-opt " << sub << ": " << membrane_last_error() << "\n";
    return status;
}
