#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "updm/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "runs/default";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    bool resume = true;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config JSON (defaults when omitted)");
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", args.seed, "override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--workers", args.workers, "parallel evaluation workers")
        ->capture_default_str();
    cmd->add_flag("--resume,!--no-resume", args.resume,
                  "reuse checkpoints whose provenance matches (default on)");
}

int run_until(const CommonArgs& args, const std::string& until) {
    updm::ExperimentConfig config = args.config_path.empty()
                                        ? updm::ExperimentConfig()
                                        : updm::ExperimentConfig::load_file(args.config_path);
    if (args.seed_set) config.seed = args.seed;
    updm::PipelineOptions opts;
    opts.workers = args.workers;
    opts.resume = args.resume;
    opts.until = until;
    const updm::PipelineResult result = updm::run_pipeline(config, args.out_dir, opts);
    for (const updm::StageStatus& s : result.stages) {
        std::printf("%-12s %s %s\n", s.name.c_str(), s.skipped ? "skipped" : "done   ",
                    s.output_hash.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"updm: concept erasure and adversarial restoration testbed"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string inspect_path;

    struct Sub {
        const char* name;
        const char* help;
        const char* until;
    };
    const Sub subs[] = {
        {"train-base", "train the base conditional denoiser", "base"},
        {"erase", "produce the four unlearned model variants",
         "erase_esd,erase_ca,erase_fmn,erase_uce"},
        {"attack-ti", "run the textual-inversion baselines",
         "ti_base,ti_esd,ti_ca,ti_fmn,ti_uce"},
        {"attack-as", "run the adversarial embedding search", "attack_as"},
        {"evaluate", "build the attack x model transfer matrix", "evaluate"},
        {"atlas", "project and score the embedding clusters", "atlas"},
        {"ablate", "trace restoration accuracy with and without search", "ablate"},
        {"run", "run the full pipeline", ""},
    };
    for (const Sub& s : subs) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, args);
        cmd->callback([&args, until = std::string(s.until)] {
            std::exit(run_until(args, until));
        });
    }

    CLI::App* inspect = app.add_subcommand("inspect", "print checkpoint metadata");
    inspect->add_option("checkpoint", inspect_path, "path to a .updm file")->required();
    inspect->callback([&inspect_path] {
        std::fputs(updm::describe_checkpoint(inspect_path).c_str(), stdout);
        std::exit(0);
    });

    try {
        CLI11_PARSE(app, argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
