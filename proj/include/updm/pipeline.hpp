#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "updm/checkpoint.hpp"
#include "updm/config.hpp"

namespace updm {

struct PipelineOptions {
    int workers = 1;
    bool resume = true;
    // run only the named stage and its dependencies; empty = full pipeline
    std::string until;
};

struct StageStatus {
    std::string name;
    bool skipped = false;
    std::string output_hash;
    std::vector<std::string> inputs;  // checkpoint files this stage read or depended on
};

struct PipelineResult {
    std::filesystem::path out_dir;
    std::vector<StageStatus> stages;

    const StageStatus* find(const std::string& name) const;
};

// Executes the experiment stages in order, checkpointing after each one and
// skipping stages whose recorded provenance (config hash + input content
// hashes) already matches. Reports land as CSV/JSON/SVG in the output tree;
// the effective config is materialized as effective_config.json. Timing goes
// to log.txt only, so the artifact tree is byte-stable across reruns.
PipelineResult run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            const PipelineOptions& options = {});

// checkpoint adapters
Checkpoint model_to_checkpoint(const DenoiserModel& model, const Provenance& prov);
DenoiserModel model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint classifier_to_checkpoint(const ConceptClassifier& classifier, const Provenance& prov);
ConceptClassifier classifier_from_checkpoint(const Checkpoint& ckpt);
Checkpoint candidates_to_checkpoint(const CandidateSet& candidates, const Provenance& prov);
CandidateSet candidates_from_checkpoint(const Checkpoint& ckpt);

std::string describe_checkpoint(const std::filesystem::path& path);

}  // namespace updm
