#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "updm/optim.hpp"
#include "updm/tensor.hpp"
#include "updm/world.hpp"

namespace updm {

// Ordered token list with an optional placeholder slot bound to a learnable
// embedding. The neutral prompt is [NEUTRAL] with no placeholder.
struct PromptSpec {
    std::vector<std::string> tokens;
    std::optional<int> placeholder_slot;
    std::optional<Tensor> bound_embedding;

    static PromptSpec neutral();
    static PromptSpec concept_prompt(const ConceptWorld& world, int concept);
    static PromptSpec adversarial(const Tensor& embedding);
};

struct DenoiserOutput {
    Tensor eps_hat;
    Tensor attention;  // [1 x prompt length], rows sum to 1
};

// Conditional noise predictor: MLP trunk over (z_t ++ time embedding), one
// single-head cross-attention block over the encoded prompt, linear head.
// The token-embedding table and the two-layer text encoder live here too.
struct DenoiserModel {
    int data_dim = 2;
    int embed_dim = 16;
    int hidden_dim = 64;
    int attn_dim = 16;
    int time_dim = 16;
    std::vector<std::string> vocab;

    Tensor embedding;  // [vocab x embed_dim]
    Tensor enc_w1, enc_b1, enc_w2, enc_b2;
    Tensor trunk_w1, trunk_b1, trunk_w2, trunk_b2;
    Tensor attn_wq;  // [hidden x attn]
    Tensor attn_wk;  // [embed x attn]
    Tensor attn_wv;  // [embed x hidden]
    Tensor head_w, head_b;

    static DenoiserModel init(const ConceptWorld& world, std::uint64_t seed);

    std::vector<Param> all_params();        // base training
    std::vector<Param> denoiser_params();   // trunk + attention + head
    std::vector<Param> attention_params();  // wq, wk, wv

    // fixed-order (name, member) view; serialization and checksums rely on it
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

    DenoiserModel clone() const;
    std::uint64_t checksum() const;
    void set_requires_grad(bool enabled);

    int token_index(const std::string& token) const;
};

Tensor time_embedding(int t, int dim);

// Per-token embedding lookup (or the bound tensor at the placeholder slot)
// passed through the shared two-layer encoder; one output row per token.
std::vector<Tensor> encode_tokens(const DenoiserModel& model, const PromptSpec& prompt);

// Single-head attention. Returns the residual-updated hidden state and the
// row-stochastic attention map over token positions.
std::pair<Tensor, Tensor> cross_attention(const Tensor& hidden, const std::vector<Tensor>& context,
                                          const Tensor& wq, const Tensor& wk, const Tensor& wv);

DenoiserOutput denoiser_forward(const DenoiserModel& model, const Tensor& zt,
                                const PromptSpec& prompt, int t);

}  // namespace updm
