#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tsmi/config.hpp"
#include "tsmi/errors.hpp"
#include "tsmi/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string workdir = "runs/default";
    std::optional<std::int64_t> seed;
    std::optional<std::string> site;
};

int dispatch(const std::string& stage, const GlobalArgs& args) {
    tsmi::ExperimentConfig cfg = args.config_path.empty()
                                     ? tsmi::parse_config("{}")  // defaults + derived fields
                                     : tsmi::load_config(args.config_path);
    if (args.seed) {
        cfg.seed = static_cast<std::uint64_t>(*args.seed);
        cfg.model.seed = cfg.seed;
        cfg.sae.seed = cfg.seed;
    }
    cfg.validate();
    tsmi::pipeline::Paths paths{args.workdir};

    if (stage == "gen-data") {
        tsmi::pipeline::run_gen_data(cfg, paths);
    } else if (stage == "train-model") {
        tsmi::pipeline::run_train_model(cfg, paths);
    } else if (stage == "extract") {
        tsmi::pipeline::run_extract(cfg, paths, args.site);
    } else if (stage == "train-sae") {
        tsmi::pipeline::run_train_sae(cfg, paths, args.site);
    } else if (stage == "taxonomy") {
        tsmi::pipeline::run_taxonomy(cfg, paths);
    } else if (stage == "ablate") {
        tsmi::pipeline::run_ablate(cfg, paths);
    } else if (stage == "report") {
        tsmi::pipeline::run_report(cfg, paths, true);
    } else if (stage == "run-all") {
        tsmi::pipeline::run_all(cfg, paths, true);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-series transformer interpretability pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // accept the global options after the subcommand too

    GlobalArgs args;
    app.add_option("--config", args.config_path, "experiment config (JSON)");
    app.add_option("--workdir", args.workdir, "artifact directory");
    app.add_option("--seed", args.seed, "override the config seed");

    const char* stages[] = {"gen-data", "train-model", "extract", "train-sae",
                            "taxonomy", "ablate",      "report",  "run-all"};
    for (const char* s : stages) {
        auto* sub = app.add_subcommand(s);
        if (std::string(s) == "extract" || std::string(s) == "train-sae")
            sub->add_option("--site", args.site, "restrict the stage to one hook site");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        return dispatch(stage, args);
    } catch (const tsmi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tsmi::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const tsmi::DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
