#include "updm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

Tensor glorot(int fan_in, int fan_out, RandomStream& rng) {
    const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
    return Tensor::gaussian({fan_in, fan_out}, stddev, rng, true);
}

}  // namespace

PromptSpec PromptSpec::neutral() {
    PromptSpec p;
    p.tokens = {ConceptWorld::kNeutralToken};
    return p;
}

PromptSpec PromptSpec::concept_prompt(const ConceptWorld& world, int concept) {
    PromptSpec p;
    p.tokens = {ConceptWorld::kNeutralToken, world.concept_token(concept)};
    return p;
}

PromptSpec PromptSpec::adversarial(const Tensor& embedding) {
    PromptSpec p;
    p.tokens = {ConceptWorld::kNeutralToken, ConceptWorld::kPlaceholderToken};
    p.placeholder_slot = 1;
    p.bound_embedding = embedding;
    return p;
}

DenoiserModel DenoiserModel::init(const ConceptWorld& world, std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, 0x6d6f64656cULL));
    DenoiserModel m;
    m.vocab = world.vocab;
    const int v = static_cast<int>(m.vocab.size());

    m.embedding = Tensor::gaussian({v, m.embed_dim}, 0.3, rng, true);
    m.enc_w1 = glorot(m.embed_dim, m.embed_dim, rng);
    m.enc_b1 = Tensor::zeros({1, m.embed_dim}, true);
    m.enc_w2 = glorot(m.embed_dim, m.embed_dim, rng);
    m.enc_b2 = Tensor::zeros({1, m.embed_dim}, true);

    const int in_dim = m.data_dim + m.time_dim;
    m.trunk_w1 = glorot(in_dim, m.hidden_dim, rng);
    m.trunk_b1 = Tensor::zeros({1, m.hidden_dim}, true);
    m.trunk_w2 = glorot(m.hidden_dim, m.hidden_dim, rng);
    m.trunk_b2 = Tensor::zeros({1, m.hidden_dim}, true);

    m.attn_wq = glorot(m.hidden_dim, m.attn_dim, rng);
    m.attn_wk = glorot(m.embed_dim, m.attn_dim, rng);
    m.attn_wv = glorot(m.embed_dim, m.hidden_dim, rng);

    m.head_w = glorot(m.hidden_dim, m.data_dim, rng);
    m.head_b = Tensor::zeros({1, m.data_dim}, true);
    return m;
}

std::vector<Param> DenoiserModel::all_params() {
    std::vector<Param> ps = denoiser_params();
    ps.push_back({"embedding", embedding});
    ps.push_back({"enc_w1", enc_w1});
    ps.push_back({"enc_b1", enc_b1});
    ps.push_back({"enc_w2", enc_w2});
    ps.push_back({"enc_b2", enc_b2});
    return ps;
}

std::vector<Param> DenoiserModel::denoiser_params() {
    std::vector<Param> ps = attention_params();
    ps.push_back({"trunk_w1", trunk_w1});
    ps.push_back({"trunk_b1", trunk_b1});
    ps.push_back({"trunk_w2", trunk_w2});
    ps.push_back({"trunk_b2", trunk_b2});
    ps.push_back({"head_w", head_w});
    ps.push_back({"head_b", head_b});
    return ps;
}

std::vector<Param> DenoiserModel::attention_params() {
    return {{"attn_wq", attn_wq}, {"attn_wk", attn_wk}, {"attn_wv", attn_wv}};
}

std::vector<std::pair<std::string, Tensor*>> DenoiserModel::named_tensors() {
    return {{"embedding", &embedding}, {"enc_w1", &enc_w1},     {"enc_b1", &enc_b1},
            {"enc_w2", &enc_w2},       {"enc_b2", &enc_b2},     {"trunk_w1", &trunk_w1},
            {"trunk_b1", &trunk_b1},   {"trunk_w2", &trunk_w2}, {"trunk_b2", &trunk_b2},
            {"attn_wq", &attn_wq},     {"attn_wk", &attn_wk},   {"attn_wv", &attn_wv},
            {"head_w", &head_w},       {"head_b", &head_b}};
}

std::vector<std::pair<std::string, const Tensor*>> DenoiserModel::named_tensors() const {
    auto mut = const_cast<DenoiserModel*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) out.emplace_back(name, t);
    return out;
}

DenoiserModel DenoiserModel::clone() const {
    DenoiserModel c = *this;
    for (auto& [name, t] : c.named_tensors()) *t = t->clone_detached(t->requires_grad);
    return c;
}

std::uint64_t DenoiserModel::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : named_tensors()) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(t->data->data(), t->size(), h);
    }
    return h;
}

void DenoiserModel::set_requires_grad(bool enabled) {
    for (auto& [name, t] : named_tensors()) {
        t->requires_grad = enabled;
        if (enabled) t->ensure_grad();
    }
}

int DenoiserModel::token_index(const std::string& token) const {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i] == token) return static_cast<int>(i);
    }
    throw std::invalid_argument("updm: unknown token '" + token + "'");
}

Tensor time_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        v[static_cast<std::size_t>(i)] = std::sin(t * freq);
        v[static_cast<std::size_t>(half + i)] = std::cos(t * freq);
    }
    return Tensor::from_values({1, dim}, std::move(v));
}

std::vector<Tensor> encode_tokens(const DenoiserModel& model, const PromptSpec& prompt) {
    if (prompt.placeholder_slot.has_value() != prompt.bound_embedding.has_value()) {
        throw std::invalid_argument(
            "updm: placeholder slot and bound embedding must be provided together");
    }
    if (prompt.placeholder_slot) {
        const int slot = *prompt.placeholder_slot;
        if (slot < 0 || slot >= static_cast<int>(prompt.tokens.size()) ||
            prompt.tokens[static_cast<std::size_t>(slot)] != ConceptWorld::kPlaceholderToken) {
            throw std::invalid_argument("updm: placeholder slot must point at " +
                                        std::string(ConceptWorld::kPlaceholderToken));
        }
        if (prompt.bound_embedding->cols() != model.embed_dim ||
            prompt.bound_embedding->rows() != 1) {
            throw std::invalid_argument("updm: bound embedding must be [1x" +
                                        std::to_string(model.embed_dim) + "], got " +
                                        prompt.bound_embedding->shape_str());
        }
    }
    std::vector<Tensor> context;
    context.reserve(prompt.tokens.size());
    for (std::size_t i = 0; i < prompt.tokens.size(); ++i) {
        Tensor e;
        if (prompt.placeholder_slot && static_cast<int>(i) == *prompt.placeholder_slot) {
            e = *prompt.bound_embedding;
        } else {
            e = take_row(model.embedding, model.token_index(prompt.tokens[i]));
        }
        Tensor h = silu(add(matmul(e, model.enc_w1), model.enc_b1));
        context.push_back(add(matmul(h, model.enc_w2), model.enc_b2));
    }
    return context;
}

std::pair<Tensor, Tensor> cross_attention(const Tensor& hidden, const std::vector<Tensor>& context,
                                          const Tensor& wq, const Tensor& wk, const Tensor& wv) {
    if (context.empty()) throw std::invalid_argument("updm: cross_attention needs a non-empty context");
    const Tensor ctx = stack_rows(context);
    const Tensor q = matmul(hidden, wq);                       // [1 x attn]
    const Tensor keys = matmul(ctx, wk);                       // [n x attn]
    const Tensor values = matmul(ctx, wv);                     // [n x hidden]
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(wq.shape[1]));
    const Tensor scores = scale(matmul(q, transpose(keys)), inv_sqrt_dk);  // [1 x n]
    const Tensor attn = softmax_rows(scores);
    const Tensor out = add(hidden, matmul(attn, values));
    return {out, attn};
}

DenoiserOutput denoiser_forward(const DenoiserModel& model, const Tensor& zt,
                                const PromptSpec& prompt, int t) {
    const Tensor input = concat_cols(zt, time_embedding(t, model.time_dim));
    Tensor h = silu(add(matmul(input, model.trunk_w1), model.trunk_b1));
    h = silu(add(matmul(h, model.trunk_w2), model.trunk_b2));
    const std::vector<Tensor> context = encode_tokens(model, prompt);
    auto [attended, attn] = cross_attention(h, context, model.attn_wq, model.attn_wk, model.attn_wv);
    DenoiserOutput out;
    out.eps_hat = add(matmul(attended, model.head_w), model.head_b);
    out.attention = attn;
    return out;
}

}  // namespace updm
