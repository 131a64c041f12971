#pragma once

#include <cstdint>
#include <vector>

#include "updm/model.hpp"
#include "updm/schedule.hpp"
#include "updm/world.hpp"

namespace updm {

struct TrainingReport {
    std::vector<double> loss_trace;
};

struct TrainConfig {
    int steps = 6000;
    double learning_rate = 2e-3;
    double weight_decay = 0.0;
    // fraction of steps trained on the bare neutral prompt so the model has a
    // meaningful unconditional mode (data drawn from the full mixture)
    double neutral_fraction = 0.1;
};

Tensor data_point_tensor(const std::array<double, 2>& p);

// squared-error noise-prediction objective, differentiable wrt model
// parameters and any bound embedding inside the prompt
Tensor denoise_loss(const DenoiserModel& model, const Tensor& z0, const PromptSpec& prompt, int t,
                    const Tensor& eps, const NoiseSchedule& sched);

TrainingReport train_denoiser(DenoiserModel& model, const ConceptWorld& world,
                              const NoiseSchedule& sched, const TrainConfig& cfg,
                              std::uint64_t seed);

// ancestral sampler; per-sample streams derived from (seed, sample index)
std::vector<Tensor> ddpm_sample(const DenoiserModel& model, const PromptSpec& prompt, int n,
                                const NoiseSchedule& sched, std::uint64_t seed);

// deterministic (eta = 0) sampler over the strided step subsequence; only the
// initial z_T draw is stochastic
std::vector<Tensor> ddim_sample(const DenoiserModel& model, const PromptSpec& prompt, int n,
                                const NoiseSchedule& sched, int stride, std::uint64_t seed);

}  // namespace updm
