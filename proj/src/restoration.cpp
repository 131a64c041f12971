#include "updm/restoration.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

std::string v0_policy_name(V0Policy p) {
    return p == V0Policy::table_mean ? "table_mean" : "target_token";
}

V0Policy v0_policy_from_name(const std::string& name) {
    if (name == "table_mean") return V0Policy::table_mean;
    if (name == "target_token") return V0Policy::target_token;
    throw std::invalid_argument("updm: unknown v0 policy '" + name + "'");
}

void ASConfig::validate() const {
    if (epochs < 1 || embed_iters < 1 || param_iters < 1 || update_freq < 1) {
        throw std::invalid_argument("updm: AS config requires E, I_v, I_theta, f >= 1");
    }
    if (lr_embed <= 0.0 || lr_params <= 0.0 || wd_embed < 0.0) {
        throw std::invalid_argument("updm: AS config rates must be positive");
    }
}

double RelaxationWitness::dist_eps_pred() const {
    double s = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps.at(i) - pred.at(i);
        s += d * d;
    }
    return std::sqrt(s);
}

double RelaxationWitness::dist_pred_tilde() const {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.at(i) - eps_tilde.at(i);
        s += d * d;
    }
    return std::sqrt(s);
}

double RelaxationWitness::bound_slack() const {
    return dist_eps_pred() - (d - dist_pred_tilde());
}

Tensor initial_embedding(const DenoiserModel& model, const ConceptWorld& world, V0Policy policy,
                         int target, std::uint64_t seed) {
    if (policy == V0Policy::target_token) {
        return take_row(model.embedding, world.concept_token_index(target))
            .clone_detached(true);
    }
    const int rows = model.embedding.shape[0];
    const int dim = model.embed_dim;
    Tensor v = Tensor::zeros({1, dim}, true);
    for (int j = 0; j < dim; ++j) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += model.embedding.at(r, j);
        v.mut(0, j) = s / rows;
    }
    RandomStream rng(derive_seed(seed, 0x7630ULL));
    for (int j = 0; j < dim; ++j) v.mut(0, j) += 0.02 * rng.gaussian();
    return v;
}

namespace {

double inversion_step(const DenoiserModel& model, const Tensor& v, const Tensor& z0,
                      const NoiseSchedule& sched, RandomStream& rng, Optimizer& opt,
                      const WitnessSink& witness_sink) {
    const int t = rng.uniform_int(1, sched.T);
    const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
    const Tensor zt = q_sample(z0, t, eps, sched);
    const DenoiserOutput out = denoiser_forward(model, zt, PromptSpec::adversarial(v), t);
    const Tensor loss = mse(eps, out.eps_hat);
    backward(loss);
    opt.step();
    opt.zero_grad();
    if (witness_sink) {
        NoGradGuard ng;
        RelaxationWitness w;
        w.eps = eps;
        w.pred = out.eps_hat.clone_detached();
        w.eps_tilde = denoiser_forward(model, zt, PromptSpec::neutral(), t).eps_hat.clone_detached();
        double s = 0.0;
        for (std::size_t i = 0; i < w.eps.size(); ++i) {
            const double d = w.eps.at(i) - w.eps_tilde.at(i);
            s += d * d;
        }
        w.d = std::sqrt(s);
        witness_sink(w);
    }
    return loss.value();
}

}  // namespace

Tensor textual_inversion(const DenoiserModel& target_model, const ConceptWorld& world,
                         const NoiseSchedule& sched, int target, int iters, double lr, double wd,
                         std::uint64_t seed, V0Policy policy, int policy_target) {
    if (target < 0 || target >= world.num_concepts) {
        throw std::invalid_argument("updm: inversion target out of range");
    }
    const auto& points = world.train_sets[static_cast<std::size_t>(target)];
    if (points.empty()) throw std::invalid_argument("updm: inversion needs training data");

    DenoiserModel frozen = target_model.clone();
    frozen.set_requires_grad(false);
    Tensor v = initial_embedding(frozen, world, policy,
                                 policy_target >= 0 ? policy_target : target, seed);
    if (iters <= 0) return v;

    Optimizer opt(OptKind::adam, lr, wd, {{"v", v}});
    RandomStream rng(derive_seed(seed, 0x7469ULL));
    for (int i = 0; i < iters; ++i) {
        const Tensor z0 = data_point_tensor(points[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(points.size()) - 1))]);
        inversion_step(frozen, v, z0, sched, rng, opt, nullptr);
    }
    return v;
}

Tensor erase_step_loss(const DenoiserModel& surrogate, const Tensor& v, const Tensor& z0, int t,
                       const Tensor& eps, const NoiseSchedule& sched) {
    const Tensor zt = q_sample(z0, t, eps, sched);
    const Tensor neutral_pred = denoiser_forward(surrogate, zt, PromptSpec::neutral(), t).eps_hat;
    const Tensor pred = denoiser_forward(surrogate, zt, PromptSpec::adversarial(v), t).eps_hat;
    return mse(pred, stop_gradient(neutral_pred));
}

Tensor erase_step_loss_original(const DenoiserModel& surrogate, const DenoiserModel& original,
                                const Tensor& v, const Tensor& z0, int t, const Tensor& eps,
                                const NoiseSchedule& sched) {
    const Tensor zt = q_sample(z0, t, eps, sched);
    Tensor reference;
    {
        NoGradGuard ng;
        reference = denoiser_forward(original, zt, PromptSpec::neutral(), t).eps_hat.clone_detached();
    }
    const Tensor pred = denoiser_forward(surrogate, zt, PromptSpec::adversarial(v), t).eps_hat;
    return mse(pred, reference);
}

CandidateSet adversarial_search(const DenoiserModel& surrogate_base, const ConceptWorld& world,
                                const NoiseSchedule& sched, int target, const ASConfig& cfg,
                                std::uint64_t seed, const WitnessSink& witness_sink,
                                const EpochCallback& epoch_callback) {
    cfg.validate();
    if (target < 0 || target >= world.num_concepts) {
        throw std::invalid_argument("updm: search target out of range");
    }

    CandidateSet result;
    result.config = cfg;
    result.target = target;
    result.seed = seed;
    result.surrogate_base_checksum = surrogate_base.checksum();

    DenoiserModel surrogate = surrogate_base.clone();
    surrogate.set_requires_grad(true);
    DenoiserModel original;  // only materialized for the divergence diagnostic
    if (cfg.track_original_reference) {
        original = surrogate_base.clone();
        original.set_requires_grad(false);
    }

    Tensor v = initial_embedding(surrogate, world, cfg.v0_policy, target, seed);
    Optimizer opt_v(OptKind::adam, cfg.lr_embed, cfg.wd_embed, {{"v", v}});
    Optimizer opt_theta(OptKind::adam, cfg.lr_params, 0.0, surrogate.denoiser_params());

    RandomStream rng(derive_seed(seed, 0x6173ULL));
    const auto& points = world.train_sets[static_cast<std::size_t>(target)];

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // one reference image per epoch, shared by both phases
        const Tensor z0 = data_point_tensor(points[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(points.size()) - 1))]);

        // embedding phase: theta frozen so no stray gradients accumulate
        surrogate.set_requires_grad(false);
        double last_loss = 0.0;
        for (int i = 0; i < cfg.embed_iters; ++i) {
            last_loss = inversion_step(surrogate, v, z0, sched, rng, opt_v, witness_sink);
        }
        result.entries.push_back({epoch, v.clone_detached(), last_loss});
        if (epoch_callback) epoch_callback(epoch, result.entries.back().embedding);

        if (epoch % cfg.update_freq == 0) {
            result.update_epochs.push_back(epoch);
            if (cfg.param_updates_enabled) {
                surrogate.set_requires_grad(true);
                const Tensor v_fixed = v.clone_detached(false);  // v held fixed
                for (int i = 0; i < cfg.param_iters; ++i) {
                    const int t = rng.uniform_int(1, sched.T);
                    const Tensor eps = Tensor::gaussian({1, 2}, 1.0, rng);
                    const Tensor loss = erase_step_loss(surrogate, v_fixed, z0, t, eps, sched);
                    if (cfg.track_original_reference) {
                        NoGradGuard ng;
                        const double ref =
                            erase_step_loss_original(surrogate, original, v_fixed, z0, t, eps, sched)
                                .value();
                        result.reference_divergence.push_back(std::abs(loss.value() - ref));
                    }
                    if (witness_sink) {
                        NoGradGuard ng;
                        const Tensor zt = q_sample(z0, t, eps, sched);
                        RelaxationWitness w;
                        w.eps = eps;
                        w.eps_tilde = denoiser_forward(surrogate, zt, PromptSpec::neutral(), t)
                                          .eps_hat.clone_detached();
                        w.pred = denoiser_forward(surrogate, zt, PromptSpec::adversarial(v_fixed), t)
                                     .eps_hat.clone_detached();
                        double s = 0.0;
                        for (std::size_t j = 0; j < w.eps.size(); ++j) {
                            const double d = w.eps.at(j) - w.eps_tilde.at(j);
                            s += d * d;
                        }
                        w.d = std::sqrt(s);
                        witness_sink(w);
                    }
                    backward(loss);
                    opt_theta.step();
                    opt_theta.zero_grad();
                }
                // embedding table / encoder grads from the neutral branch are
                // never applied; drop them so nothing leaks across phases
                for (auto& [name, tp] : surrogate.named_tensors()) tp->zero_grad();
            }
        }
    }
    return result;
}

CandidateSelection select_final_loss(const CandidateSet& candidates) {
    if (candidates.entries.empty()) throw std::invalid_argument("updm: empty candidate set");
    const int e = static_cast<int>(candidates.entries.size());
    const int f = candidates.config.update_freq;
    const int window = std::min(e, (e + f - 1) / f);  // last ceil(E/f) snapshots
    int best = e - window;
    for (int i = e - window; i < e; ++i) {
        if (candidates.entries[static_cast<std::size_t>(i)].loss <
            candidates.entries[static_cast<std::size_t>(best)].loss) {
            best = i;
        }
    }
    CandidateSelection sel;
    sel.index = best;
    sel.embedding = candidates.entries[static_cast<std::size_t>(best)].embedding;
    sel.score = candidates.entries[static_cast<std::size_t>(best)].loss;
    return sel;
}

std::map<std::string, CandidateSelection> select_best_of_v(
    const CandidateSet& candidates, const std::vector<std::string>& model_ids,
    const std::function<double(const Tensor& v, const std::string& model_id)>& score) {
    if (candidates.entries.empty()) throw std::invalid_argument("updm: empty candidate set");
    if (model_ids.empty()) throw std::invalid_argument("updm: best_of_v needs target models");
    std::map<std::string, CandidateSelection> out;
    for (const std::string& id : model_ids) {
        CandidateSelection best;
        for (std::size_t i = 0; i < candidates.entries.size(); ++i) {
            const double s = score(candidates.entries[i].embedding, id);
            if (best.index < 0 || s > best.score) {
                best.index = static_cast<int>(i);
                best.embedding = candidates.entries[i].embedding;
                best.score = s;
            }
        }
        out.emplace(id, std::move(best));
    }
    return out;
}

}  // namespace updm
