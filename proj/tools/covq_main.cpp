#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "covq/cli.hpp"

namespace {

// Exit codes: 0 ok, 2 usage, 3 config, 4 io, 5 runtime. Every error prints a
// single machine-parsable line to stderr.
enum ExitCode { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kRuntime = 5 };

int fail(ExitCode code, const char* prefix, const std::string& what) {
    std::cerr << prefix << ": " << what << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covq - recurrent deep Q-learning for energy-constrained grid coverage"};
    app.require_subcommand(1);

    covq::cli::MapgenOptions mapgen;
    auto* sc_mapgen = app.add_subcommand("mapgen", "generate a map file");
    sc_mapgen->add_option("--n", mapgen.n, "side length")->check(CLI::Range(4, 256));
    sc_mapgen->add_option("--stations", mapgen.stations, "number of charging stations");
    sc_mapgen->add_option("--density", mapgen.density, "obstacle density in [0, 0.4]");
    sc_mapgen->add_option("--seed", mapgen.seed, "generator seed");
    sc_mapgen->add_option("--budget", mapgen.validation_budget,
                          "validation budget (default 5n)");
    sc_mapgen->add_option("--out", mapgen.out_path, "output map path")->required();

    covq::cli::TrainOptions train;
    std::optional<uint64_t> train_seed;
    std::optional<std::string> train_variant, train_budget;
    std::optional<int> train_episodes;
    auto* sc_train = app.add_subcommand("train", "train a policy on a map");
    sc_train->add_option("--map", train.map_path, "map file");
    sc_train->add_option("--config", train.config_path, "key=value config file");
    sc_train->add_option("--from-manifest", train.from_manifest,
                         "re-run the configuration recorded in a manifest");
    sc_train->add_option("--out", train.out_dir, "output directory")->required();
    sc_train->add_option("--seed", train_seed, "override seed");
    sc_train->add_option("--variant", train_variant, "recurrent|cnn")
        ->check(CLI::IsMember({"recurrent", "cnn"}));
    sc_train->add_option("--budget", train_budget, "budget: 4n, 5n, 6n or an integer");
    sc_train->add_option("--episodes", train_episodes, "override episode count");
    sc_train->add_flag("--quiet", train.quiet, "suppress progress output");

    covq::cli::EvalOptions eval;
    std::optional<std::string> eval_budget, eval_variant;
    auto* sc_eval = app.add_subcommand("eval", "greedy rollout of a checkpoint");
    sc_eval->add_option("--checkpoint", eval.checkpoint_path, "checkpoint file")->required();
    sc_eval->add_option("--map", eval.map_path, "map file")->required();
    sc_eval->add_option("--out", eval.out_path, "path JSON output");
    sc_eval->add_option("--budget", eval_budget, "budget override (default: from checkpoint)");
    sc_eval->add_option("--variant", eval_variant, "expected variant")
        ->check(CLI::IsMember({"recurrent", "cnn"}));
    sc_eval->add_option("--seed", eval.seed, "accepted for symmetry; rollouts are greedy");

    covq::cli::CompareOptions compare;
    auto* sc_compare = app.add_subcommand("compare", "compare two run manifests");
    sc_compare->add_option("manifest_a", compare.manifest_a, "first manifest")->required();
    sc_compare->add_option("manifest_b", compare.manifest_b, "second manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_USAGE: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*sc_mapgen) return covq::cli::cmd_mapgen(mapgen);
        if (*sc_train) {
            train.seed = train_seed;
            train.variant = train_variant;
            train.budget = train_budget;
            train.episodes = train_episodes;
            return covq::cli::cmd_train(train);
        }
        if (*sc_eval) {
            eval.budget = eval_budget;
            eval.variant = eval_variant;
            return covq::cli::cmd_eval(eval);
        }
        if (*sc_compare) return covq::cli::cmd_compare(compare);
        std::cerr << "E_USAGE: no subcommand\n";
        return kUsage;
    } catch (const covq::ConfigError& e) {
        return fail(kConfig, "E_CONFIG", e.what());
    } catch (const covq::MapParseError& e) {
        return fail(kConfig, "E_CONFIG", e.what());
    } catch (const covq::IoError& e) {
        return fail(kIo, "E_IO", e.what());
    } catch (const std::exception& e) {
        return fail(kRuntime, "E_RUNTIME", e.what());
    }
}
