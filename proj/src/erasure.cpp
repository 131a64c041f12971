#include "updm/erasure.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

std::string erasure_method_name(ErasureMethod m) {
    switch (m) {
        case ErasureMethod::esd: return "esd";
        case ErasureMethod::ca: return "ca";
        case ErasureMethod::fmn: return "fmn";
        case ErasureMethod::uce: return "uce";
    }
    return "?";
}

ErasureMethod erasure_method_from_name(const std::string& name) {
    if (name == "esd") return ErasureMethod::esd;
    if (name == "ca") return ErasureMethod::ca;
    if (name == "fmn") return ErasureMethod::fmn;
    if (name == "uce") return ErasureMethod::uce;
    throw std::invalid_argument("updm: unknown erasure method '" + name + "'");
}

ErasureSpec ErasureSpec::defaults(ErasureMethod m, int target) {
    ErasureSpec s;
    s.method = m;
    s.target = target;
    switch (m) {
        case ErasureMethod::esd: s.steps = 400; break;
        case ErasureMethod::ca: s.steps = 400; break;
        case ErasureMethod::fmn: s.steps = 150; break;
        case ErasureMethod::uce: s.steps = 0; break;
    }
    return s;
}

namespace {

void check_target(const ConceptWorld& world, const ErasureSpec& spec) {
    if (spec.target < 0 || spec.target >= world.num_concepts) {
        throw std::invalid_argument("updm: erasure target out of range");
    }
}

Tensor draw_target_point(const ConceptWorld& world, int concept, RandomStream& rng) {
    const auto& points = world.train_sets[static_cast<std::size_t>(concept)];
    return data_point_tensor(points[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(points.size()) - 1))]);
}

UnlearnedModel make_unlearned(DenoiserModel&& tuned, const DenoiserModel& base,
                              const ErasureSpec& spec, std::uint64_t seed) {
    UnlearnedModel u;
    u.model = std::move(tuned);
    u.spec = spec;
    u.base_checksum = base.checksum();
    u.seed = seed;
    u.model.set_requires_grad(false);
    return u;
}

}  // namespace

UnlearnedModel erase_esd(const DenoiserModel& base, const ConceptWorld& world,
                         const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed) {
    if (spec.method != ErasureMethod::esd) throw std::invalid_argument("updm: spec is not esd");
    check_target(world, spec);

    DenoiserModel tuned = base.clone();
    if (spec.steps > 0) {
        DenoiserModel frozen = base.clone();
        frozen.set_requires_grad(false);
        tuned.set_requires_grad(true);
        std::vector<Param> params =
            spec.attention_only ? tuned.attention_params() : tuned.denoiser_params();
        Optimizer opt(OptKind::adam, spec.learning_rate, 0.0, params);
        RandomStream rng(derive_seed(seed, 0x657364ULL));

        const PromptSpec target_prompt = PromptSpec::concept_prompt(world, spec.target);
        const PromptSpec neutral = PromptSpec::neutral();
        const double eta = spec.negative_guidance;

        for (int step = 0; step < spec.steps; ++step) {
            const Tensor z0 = draw_target_point(world, spec.target, rng);
            const int t = rng.uniform_int(1, sched.T);
            const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
            const Tensor zt = q_sample(z0, t, eps, sched);

            Tensor guided;
            {
                NoGradGuard ng;
                const Tensor e_neutral = denoiser_forward(frozen, zt, neutral, t).eps_hat;
                const Tensor e_target = denoiser_forward(frozen, zt, target_prompt, t).eps_hat;
                guided = sub(e_neutral, scale(sub(e_target, e_neutral), eta));
            }
            const Tensor pred = denoiser_forward(tuned, zt, target_prompt, t).eps_hat;
            const Tensor loss = mse(pred, guided);
            backward(loss);
            opt.step();
            opt.zero_grad();
        }
    }
    return make_unlearned(std::move(tuned), base, spec, seed);
}

UnlearnedModel erase_ca(const DenoiserModel& base, const ConceptWorld& world,
                        const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed) {
    if (spec.method != ErasureMethod::ca) throw std::invalid_argument("updm: spec is not ca");
    check_target(world, spec);
    const int anchor =
        spec.anchor >= 0 ? spec.anchor : world.anchor_map[static_cast<std::size_t>(spec.target)];
    if (anchor == spec.target) {
        throw std::invalid_argument("updm: ca anchor must differ from the target");
    }

    DenoiserModel tuned = base.clone();
    if (spec.steps > 0) {
        tuned.set_requires_grad(true);
        Optimizer opt(OptKind::adam, spec.learning_rate, 0.0, tuned.attention_params());
        RandomStream rng(derive_seed(seed, 0x6361ULL));

        const PromptSpec target_prompt = PromptSpec::concept_prompt(world, spec.target);
        const PromptSpec anchor_prompt = PromptSpec::concept_prompt(world, anchor);

        for (int step = 0; step < spec.steps; ++step) {
            const Tensor z0 = draw_target_point(world, anchor, rng);  // anchor-concept data
            const int t = rng.uniform_int(1, sched.T);
            const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
            const Tensor zt = q_sample(z0, t, eps, sched);

            const Tensor anchor_pred =
                stop_gradient(denoiser_forward(tuned, zt, anchor_prompt, t).eps_hat);
            const Tensor pred = denoiser_forward(tuned, zt, target_prompt, t).eps_hat;
            const Tensor loss = mse(pred, anchor_pred);
            backward(loss);
            opt.step();
            opt.zero_grad();
        }
    }
    return make_unlearned(std::move(tuned), base, spec, seed);
}

UnlearnedModel erase_fmn(const DenoiserModel& base, const ConceptWorld& world,
                         const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed) {
    if (spec.method != ErasureMethod::fmn) throw std::invalid_argument("updm: spec is not fmn");
    check_target(world, spec);

    DenoiserModel tuned = base.clone();
    if (spec.steps > 0) {
        tuned.set_requires_grad(true);
        Optimizer opt(OptKind::adam, spec.learning_rate, 0.0, tuned.attention_params());
        RandomStream rng(derive_seed(seed, 0x666d6eULL));

        const PromptSpec target_prompt = PromptSpec::concept_prompt(world, spec.target);
        const int slot = 1;  // [NEUTRAL, c_target]
        Tensor mask = Tensor::zeros({1, 2});
        mask.mut(0, slot) = 1.0;

        for (int step = 0; step < spec.steps; ++step) {
            const Tensor z0 = draw_target_point(world, spec.target, rng);
            const int t = rng.uniform_int(1, sched.T);
            const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
            const Tensor zt = q_sample(z0, t, eps, sched);

            const DenoiserOutput out = denoiser_forward(tuned, zt, target_prompt, t);
            const Tensor masked = mul(out.attention, mask);
            const Tensor loss = sum(mul(masked, masked));  // squared mass on the target slot
            backward(loss);
            opt.step();
            opt.zero_grad();
        }
    }
    return make_unlearned(std::move(tuned), base, spec, seed);
}

Tensor uce_solve(const Tensor& w_old, const std::vector<Tensor>& edit_inputs,
                 const std::vector<Tensor>& edit_targets,
                 const std::vector<Tensor>& preserve_inputs, double ridge) {
    if (edit_inputs.size() != edit_targets.size()) {
        throw std::invalid_argument("updm: uce edit inputs/targets size mismatch");
    }
    if (edit_inputs.empty()) return w_old.clone_detached();

    const int n = w_old.shape[0];  // encoding dim
    const int d = w_old.shape[1];  // output dim

    // normal matrix A = sum_e c c^T + sum_p c_p c_p^T + ridge I,
    // right-hand side B = sum_e c v^T + sum_p c_p (c_p^T W_old)
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> b(static_cast<std::size_t>(n) * d, 0.0);
    auto add_outer = [&](const Tensor& c) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a[static_cast<std::size_t>(i) * n + j] += c.at(0, i) * c.at(0, j);
    };
    auto add_rhs = [&](const Tensor& c, const std::vector<double>& image) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                b[static_cast<std::size_t>(i) * d + j] += c.at(0, i) * image[static_cast<std::size_t>(j)];
    };

    for (std::size_t e = 0; e < edit_inputs.size(); ++e) {
        const Tensor& c = edit_inputs[e];
        const Tensor& v = edit_targets[e];
        if (c.rows() != 1 || c.cols() != n || v.rows() != 1 || v.cols() != d) {
            throw std::invalid_argument("updm: uce edit pair has wrong shape");
        }
        add_outer(c);
        std::vector<double> image(v.data->begin(), v.data->end());
        add_rhs(c, image);
    }
    for (const Tensor& c : preserve_inputs) {
        if (c.rows() != 1 || c.cols() != n) {
            throw std::invalid_argument("updm: uce preserve vector has wrong shape");
        }
        add_outer(c);
        std::vector<double> image(static_cast<std::size_t>(d), 0.0);
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += c.at(0, i) * w_old.at(i, j);
            image[static_cast<std::size_t>(j)] = s;
        }
        add_rhs(c, image);
    }
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] += ridge;

    const std::vector<double> w = cholesky_solve(a, n, b, d);
    return Tensor::from_values({n, d}, w);
}

UnlearnedModel edit_uce(const DenoiserModel& base, const ConceptWorld& world,
                        const ErasureSpec& spec) {
    if (spec.method != ErasureMethod::uce) throw std::invalid_argument("updm: spec is not uce");
    check_target(world, spec);

    DenoiserModel tuned = base.clone();
    tuned.set_requires_grad(false);

    // token encodings are context-free (shared per-token encoder)
    NoGradGuard ng;
    auto encode_one = [&](int token_index) {
        PromptSpec p;
        p.tokens = {base.vocab[static_cast<std::size_t>(token_index)]};
        return encode_tokens(base, p)[0];
    };
    const Tensor c_target = encode_one(world.concept_token_index(spec.target));
    const Tensor c_neutral = encode_one(world.neutral_index());
    std::vector<Tensor> preserve = {c_neutral};
    for (int k = 0; k < world.num_concepts; ++k) {
        if (k != spec.target) preserve.push_back(encode_one(world.concept_token_index(k)));
    }

    // map the target token to the neutral token's images under both projections
    auto image_of = [&](const Tensor& c, const Tensor& w) {
        const int n = w.shape[0], d = w.shape[1];
        std::vector<double> img(static_cast<std::size_t>(d), 0.0);
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += c.at(0, i) * w.at(i, j);
            img[static_cast<std::size_t>(j)] = s;
        }
        return Tensor::from_values({1, d}, std::move(img));
    };
    tuned.attn_wk = uce_solve(base.attn_wk, {c_target}, {image_of(c_neutral, base.attn_wk)},
                              preserve, spec.ridge);
    tuned.attn_wv = uce_solve(base.attn_wv, {c_target}, {image_of(c_neutral, base.attn_wv)},
                              preserve, spec.ridge);
    return make_unlearned(std::move(tuned), base, spec, 0);
}

UnlearnedModel run_erasure(const DenoiserModel& base, const ConceptWorld& world,
                           const NoiseSchedule& sched, const ErasureSpec& spec, std::uint64_t seed) {
    switch (spec.method) {
        case ErasureMethod::esd: return erase_esd(base, world, sched, spec, seed);
        case ErasureMethod::ca: return erase_ca(base, world, sched, spec, seed);
        case ErasureMethod::fmn: return erase_fmn(base, world, sched, spec, seed);
        case ErasureMethod::uce: return edit_uce(base, world, spec);
    }
    throw std::invalid_argument("updm: unknown erasure method");
}

double mean_target_attention(const DenoiserModel& model, const ConceptWorld& world,
                             const NoiseSchedule& sched, int target, int draws,
                             std::uint64_t seed) {
    NoGradGuard ng;
    RandomStream rng(derive_seed(seed, 0x6174746eULL));
    const PromptSpec prompt = PromptSpec::concept_prompt(world, target);
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
        const Tensor z0 = data_point_tensor(world.sample_point(target, rng));
        const int t = rng.uniform_int(1, sched.T);
        const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
        const Tensor zt = q_sample(z0, t, eps, sched);
        acc += denoiser_forward(model, zt, prompt, t).attention.at(0, 1);
    }
    return acc / draws;
}

}  // namespace updm
