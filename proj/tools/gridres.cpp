// gridres: batch front end for the outage-resilience toolkit.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridres/ingest.hpp"
#include "gridres/pipeline.hpp"

#ifndef GRIDRES_DEFAULT_TAXONOMY
#define GRIDRES_DEFAULT_TAXONOMY ""
#endif

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config, "flat key = value run configuration");
    cmd->add_option("--set", opts.overrides, "override a config entry (key=value), repeatable");
    cmd->add_option("-o,--out", opts.out, "output directory (overrides out_dir)");
    cmd->add_option("--seed", opts.seed, "random seed for cross-validation folds");
}

std::string taxonomy_version_of(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path)) return "unavailable";
    try {
        return gridres::CauseTaxonomy::from_file(path).version();
    } catch (const std::exception&) {
        return "unreadable";
    }
}

int print_version(const std::string& config_path) {
    std::string taxonomy = GRIDRES_DEFAULT_TAXONOMY;
    if (!config_path.empty()) {
        try {
            const auto cfg = gridres::load_run_config(std::filesystem::path(config_path), {});
            if (!cfg.taxonomy.empty()) taxonomy = cfg.taxonomy.string();
        } catch (const std::exception& e) {
            std::cerr << "gridres: " << e.what() << '\n';
            return 2;
        }
    }
    std::cout << "gridres " << gridres::toolkit_version() << '\n'
              << "taxonomy " << taxonomy_version_of(taxonomy) << '\n';
    return 0;
}

int run(gridres::Stage stage, const CommonOptions& opts) {
    try {
        auto overrides = opts.overrides;
        if (!opts.out.empty()) {
            overrides.push_back("out_dir=" + std::filesystem::absolute(opts.out).string());
        }
        if (opts.seed) overrides.push_back("seed=" + std::to_string(*opts.seed));
        std::optional<std::filesystem::path> config_path;
        if (!opts.config.empty()) config_path = opts.config;
        const auto config = gridres::load_run_config(config_path, overrides);

        const auto bundle = gridres::run_stage(config, stage);
        gridres::write_bundle(config, bundle);
        for (const auto& note : bundle.notes) std::cerr << "note: " << note << '\n';
        if (bundle.identity && !bundle.identity->holds) {
            std::cerr << "warning: slope identity check failed (rel error "
                      << bundle.identity->rel_error_saidi << ")\n";
        }
        if (bundle.empty) {
            std::cerr << "gridres " << gridres::to_string(stage) << ": no events survived cleaning\n";
            return 4;
        }
        std::cout << "wrote " << bundle.files.size() + 1 << " files to " << config.out_dir.string()
                  << " (manifest " << bundle.hash << ")\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "gridres " << gridres::to_string(stage) << ": " << e.what() << '\n';
        return gridres::exit_code_for(stage, e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outage reliability metrics, influence diagnostics and predictor selection"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    std::string version_config;
    app.add_flag("--version", show_version, "print toolkit and taxonomy versions");
    app.add_option("--version-config", version_config, "config whose taxonomy --version reports");

    struct Entry {
        const char* name;
        const char* help;
        gridres::Stage stage;
    };
    const Entry entries[] = {
        {"ingest", "clean the outage table into canonical events and a rejection log", gridres::Stage::Ingest},
        {"metrics", "SAIDI/SAIFI/CAIDI tables, state map export and region counts", gridres::Stage::Metrics},
        {"regress", "duration vs fraction-affected fits and the slope identity check", gridres::Stage::Regress},
        {"influence", "leave-one-out influence measures and excision report", gridres::Stage::Influence},
        {"select", "LASSO with cross-validation, then OLS refit and p-value filter", gridres::Stage::Select},
        {"med", "2.5-beta major event day thresholds and detector comparison", gridres::Stage::Med},
        {"report", "every configured stage into one bundle", gridres::Stage::Report},
    };
    std::vector<CommonOptions> options(std::size(entries));
    std::vector<CLI::App*> commands;
    for (std::size_t i = 0; i < std::size(entries); ++i) {
        auto* cmd = app.add_subcommand(entries[i].name, entries[i].help);
        add_common(cmd, options[i]);
        commands.push_back(cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (show_version) return print_version(version_config);
    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (commands[i]->parsed()) return run(entries[i].stage, options[i]);
    }
    std::cerr << app.help();
    return 2;
}
