#pragma once

#include <vector>

#include "updm/tensor.hpp"

namespace updm {

// Variance schedule: beta[i] and alpha_bar[i] correspond to step t = i + 1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;

    double beta_at(int t) const;       // t in [1, T]
    double alpha_bar_at(int t) const;  // t in [1, T]
};

// Linear beta interpolation, alpha_bar as the cumulative product of (1 - beta).
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// A forward-noised training sample; zt keeps the reconstruction identity
// zt == sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps exactly.
struct DiffusionSample {
    Tensor z0;
    int t = 0;
    Tensor eps;
    Tensor zt;
};

Tensor q_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched);

DiffusionSample draw_diffusion_sample(const Tensor& z0, const NoiseSchedule& sched,
                                      RandomStream& rng);

}  // namespace updm
