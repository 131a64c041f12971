#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "updm/diffusion.hpp"
#include "updm/erasure.hpp"
#include "updm/evaluation.hpp"
#include "updm/restoration.hpp"

namespace updm {

struct WorldConfig {
    int concepts = 6;
    double radius = 4.0;
    double spread = 0.3;
    int points_per_concept = 256;
};

struct ScheduleConfig {
    int steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.05;
};

struct TiConfig {
    int iters = 600;
    double learning_rate = 0.1;
    double weight_decay = 0.1;
    int atlas_seeds = 6;  // inversion repeats per model for the atlas
};

struct EvalConfig {
    int samples_per_cell = 500;
    int selection_samples = 100;  // best-of-V candidate scoring
    int ddim_stride = 5;
    int record_every = 20;
    int ablation_samples = 200;
};

// Whole-experiment configuration. Defaults here are the pilot-calibrated
// toy-scale budgets; the effective (fully materialized) config is always
// written into the output tree.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    int target = 0;
    int workers = 1;
    WorldConfig world;
    ScheduleConfig schedule;
    TrainConfig base_training;
    ClassifierConfig classifier;
    ErasureSpec esd;
    ErasureSpec ca;
    ErasureSpec fmn;
    ErasureSpec uce;
    TiConfig ti;
    ASConfig search;
    EvalConfig eval;

    ExperimentConfig();

    std::string to_json() const;                      // canonical, sorted keys
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig load_file(const std::filesystem::path& path);
    std::string config_hash() const;
};

}  // namespace updm
