#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "updm/diffusion.hpp"
#include "updm/model.hpp"

namespace updm {

enum class ErasureMethod { esd, ca, fmn, uce };

std::string erasure_method_name(ErasureMethod m);
ErasureMethod erasure_method_from_name(const std::string& name);

struct ErasureSpec {
    ErasureMethod method = ErasureMethod::esd;
    int target = 0;
    int steps = 0;
    double learning_rate = 1e-3;
    double negative_guidance = 1.0;  // esd
    int anchor = -1;                 // ca; -1 = use the world's anchor map
    double ridge = 1e-6;             // uce
    bool attention_only = true;      // esd: false enables full-trunk fine-tuning

    static ErasureSpec defaults(ErasureMethod m, int target);
};

// Erased model variant. Always a distinct copy; erasure never mutates the
// base model (checked via checksum in tests).
struct UnlearnedModel {
    DenoiserModel model;
    ErasureSpec spec;
    std::uint64_t base_checksum = 0;
    std::uint64_t seed = 0;
};

UnlearnedModel erase_esd(const DenoiserModel& base, const ConceptWorld& world,
                         const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed);
UnlearnedModel erase_ca(const DenoiserModel& base, const ConceptWorld& world,
                        const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed);
UnlearnedModel erase_fmn(const DenoiserModel& base, const ConceptWorld& world,
                         const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed);
UnlearnedModel edit_uce(const DenoiserModel& base, const ConceptWorld& world,
                        const ErasureSpec& spec);

UnlearnedModel run_erasure(const DenoiserModel& base, const ConceptWorld& world,
                           const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed);

// Closed-form least-squares projection edit. W maps encodings to outputs in
// row convention (out = c^T W). Each edit pair (c_i, v_i) asks W to send c_i
// to v_i; preserve vectors keep their old images. An empty edit set returns
// W unchanged. The ridge term regularizes the normal matrix.
Tensor uce_solve(const Tensor& w_old, const std::vector<Tensor>& edit_inputs,
                 const std::vector<Tensor>& edit_targets,
                 const std::vector<Tensor>& preserve_inputs, double ridge);

// mean attention mass on the target token's slot over sampled (z_t, t);
// recorded before/after FMN for comparison
double mean_target_attention(const DenoiserModel& model, const ConceptWorld& world,
                             const NoiseSchedule& sched, int target, int draws, std::uint64_t seed);

}  // namespace updm
