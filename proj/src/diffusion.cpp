#include "updm/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

Tensor data_point_tensor(const std::array<double, 2>& p) {
    return Tensor::from_values({1, 2}, {p[0], p[1]});
}

Tensor denoise_loss(const DenoiserModel& model, const Tensor& z0, const PromptSpec& prompt, int t,
                    const Tensor& eps, const NoiseSchedule& sched) {
    const Tensor zt = q_sample(z0, t, eps, sched);
    const DenoiserOutput out = denoiser_forward(model, zt, prompt, t);
    return mse(eps, out.eps_hat);
}

TrainingReport train_denoiser(DenoiserModel& model, const ConceptWorld& world,
                              const NoiseSchedule& sched, const TrainConfig& cfg,
                              std::uint64_t seed) {
    if (world.num_concepts < 1 || world.train_sets.empty()) {
        throw std::invalid_argument("updm: cannot train on an empty world");
    }
    TrainingReport report;
    if (cfg.steps <= 0) return report;

    model.set_requires_grad(true);
    Optimizer opt(OptKind::adam, cfg.learning_rate, cfg.weight_decay, model.all_params());
    RandomStream rng(derive_seed(seed, 0x747261696eULL));

    for (int step = 0; step < cfg.steps; ++step) {
        const int concept = rng.uniform_int(0, world.num_concepts - 1);
        const auto& points = world.train_sets[static_cast<std::size_t>(concept)];
        const Tensor z0 = data_point_tensor(points[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(points.size()) - 1))]);
        const bool neutral = rng.uniform() < cfg.neutral_fraction;
        const PromptSpec prompt =
            neutral ? PromptSpec::neutral() : PromptSpec::concept_prompt(world, concept);
        const int t = rng.uniform_int(1, sched.T);
        const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);

        const Tensor loss = denoise_loss(model, z0, prompt, t, eps, sched);
        backward(loss);
        opt.step();
        opt.zero_grad();
        report.loss_trace.push_back(loss.value());
    }
    return report;
}

namespace {

Tensor predict_eps(const DenoiserModel& model, const Tensor& zt, const PromptSpec& prompt, int t) {
    return denoiser_forward(model, zt, prompt, t).eps_hat;
}

}  // namespace

std::vector<Tensor> ddpm_sample(const DenoiserModel& model, const PromptSpec& prompt, int n,
                                const NoiseSchedule& sched, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("updm: sample count must be positive");
    NoGradGuard ng;
    std::vector<Tensor> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        RandomStream rng(derive_seed(seed, 0x6464706dULL, static_cast<std::uint64_t>(s)));
        Tensor z = Tensor::gaussian({1, 2}, 1.0, rng);
        for (int t = sched.T; t >= 1; --t) {
            const double beta = sched.beta_at(t);
            const double alpha = 1.0 - beta;
            const double ab = sched.alpha_bar_at(t);
            const Tensor eps_hat = predict_eps(model, z, prompt, t);
            Tensor mean = scale(sub(z, scale(eps_hat, beta / std::sqrt(1.0 - ab))),
                                1.0 / std::sqrt(alpha));
            if (t > 1) {
                mean = add(mean, Tensor::gaussian({1, 2}, std::sqrt(beta), rng));
            }
            z = mean;
        }
        samples.push_back(z);
    }
    return samples;
}

std::vector<Tensor> ddim_sample(const DenoiserModel& model, const PromptSpec& prompt, int n,
                                const NoiseSchedule& sched, int stride, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("updm: sample count must be positive");
    if (stride < 1 || sched.T % stride != 0) {
        throw std::invalid_argument("updm: ddim stride must divide T");
    }
    NoGradGuard ng;
    std::vector<Tensor> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        RandomStream rng(derive_seed(seed, 0x6464696dULL, static_cast<std::uint64_t>(s)));
        Tensor z = Tensor::gaussian({1, 2}, 1.0, rng);
        for (int t = sched.T; t >= stride; t -= stride) {
            const int t_prev = t - stride;
            const double ab = sched.alpha_bar_at(t);
            const double ab_prev = t_prev >= 1 ? sched.alpha_bar_at(t_prev) : 1.0;
            const Tensor eps_hat = predict_eps(model, z, prompt, t);
            const Tensor x0_pred =
                scale(sub(z, scale(eps_hat, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
            z = add(scale(x0_pred, std::sqrt(ab_prev)),
                    scale(eps_hat, std::sqrt(1.0 - ab_prev)));
        }
        samples.push_back(z);
    }
    return samples;
}

}  // namespace updm
