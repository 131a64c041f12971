#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "updm/diffusion.hpp"
#include "updm/model.hpp"

namespace updm {

enum class V0Policy { table_mean, target_token };

std::string v0_policy_name(V0Policy p);
V0Policy v0_policy_from_name(const std::string& name);

// Adversarial-search schedule: E epochs of I_v embedding iterations each,
// with I_theta surrogate-parameter iterations every f-th epoch (including
// epoch 0, since f divides 0).
struct ASConfig {
    int epochs = 300;        // E
    int embed_iters = 10;    // I_v
    int update_freq = 5;     // f
    int param_iters = 5;     // I_theta
    double lr_embed = 0.1;
    double wd_embed = 0.1;
    double lr_params = 1e-3;
    V0Policy v0_policy = V0Policy::table_mean;
    // ablation lever only: false turns the run into a plain inversion
    // trajectory (parameter phases still scheduled, but skipped)
    bool param_updates_enabled = true;
    // diagnostic: also evaluate the frozen-original form of the inner loss
    // and record its divergence from the stop-gradient form
    bool track_original_reference = false;

    void validate() const;
};

struct CandidateEntry {
    int epoch = 0;
    Tensor embedding;  // detached snapshot
    double loss = 0.0; // L_v at snapshot time
};

struct CandidateSet {
    std::vector<CandidateEntry> entries;
    ASConfig config;
    int target = 0;
    std::uint64_t seed = 0;
    std::uint64_t surrogate_base_checksum = 0;
    // epochs at which parameter-update phases ran
    std::vector<int> update_epochs;
    // filled when track_original_reference is on: |L_sg - L_theta0| per update iteration
    std::vector<double> reference_divergence;
};

// Quantities of one relaxation-bound check: the drawn noise, the proxy
// epsilon-tilde, the model prediction, and d = ||eps - eps_tilde||.
struct RelaxationWitness {
    Tensor eps;
    Tensor eps_tilde;
    Tensor pred;
    double d = 0.0;

    double dist_eps_pred() const;
    double dist_pred_tilde() const;
    // lower-bound slack ||eps - pred|| - (d - ||pred - eps_tilde||); the
    // triangle inequality makes this non-negative up to fp additivity
    double bound_slack() const;
};

using WitnessSink = std::function<void(const RelaxationWitness&)>;
using EpochCallback = std::function<void(int epoch, const Tensor& v)>;

// Plain textual inversion against a frozen model: optimizes the placeholder
// embedding of [NEUTRAL, S*] to reconstruct target-concept data.
Tensor textual_inversion(const DenoiserModel& target_model, const ConceptWorld& world,
                         const NoiseSchedule& sched, int target, int iters, double lr, double wd,
                         std::uint64_t seed, V0Policy policy = V0Policy::table_mean,
                         int policy_target = -1);

Tensor initial_embedding(const DenoiserModel& model, const ConceptWorld& world, V0Policy policy,
                         int target, std::uint64_t seed);

// ||eps_theta(z_t, T(y', v), t) - sg(eps_theta(z_t, T(y'), t))||^2 form of the
// inner objective; gradients flow into theta only.
Tensor erase_step_loss(const DenoiserModel& surrogate, const Tensor& v, const Tensor& z0, int t,
                       const Tensor& eps, const NoiseSchedule& sched);

// Frozen-original form of the inner objective (the memory-heavy variant the
// stop-gradient form approximates); used for the divergence diagnostic.
Tensor erase_step_loss_original(const DenoiserModel& surrogate, const DenoiserModel& original,
                                const Tensor& v, const Tensor& z0, int t, const Tensor& eps,
                                const NoiseSchedule& sched);

// The transferable-embedding search. Operates on a private copy of the
// original model; unlearned models never enter this function.
CandidateSet adversarial_search(const DenoiserModel& surrogate_base, const ConceptWorld& world,
                                const NoiseSchedule& sched, int target, const ASConfig& cfg,
                                std::uint64_t seed, const WitnessSink& witness_sink = nullptr,
                                const EpochCallback& epoch_callback = nullptr);

struct CandidateSelection {
    int index = -1;
    Tensor embedding;
    double score = 0.0;
};

// surrogate-only: minimal recorded L_v among the last ceil(E/f) snapshots
CandidateSelection select_final_loss(const CandidateSet& candidates);

// generation-only queries: scores every candidate on every model id through
// the supplied scorer and returns the per-model argmax
std::map<std::string, CandidateSelection> select_best_of_v(
    const CandidateSet& candidates, const std::vector<std::string>& model_ids,
    const std::function<double(const Tensor& v, const std::string& model_id)>& score);

}  // namespace updm
