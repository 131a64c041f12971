#include "updm/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace updm {

double NoiseSchedule::beta_at(int t) const {
    if (t < 1 || t > T) throw std::invalid_argument("updm: step t=" + std::to_string(t) +
                                                    " outside [1, " + std::to_string(T) + "]");
    return beta[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 1 || t > T) throw std::invalid_argument("updm: step t=" + std::to_string(t) +
                                                    " outside [1, " + std::to_string(T) + "]");
    return alpha_bar[static_cast<std::size_t>(t) - 1];
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw std::invalid_argument("updm: schedule needs T >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("updm: schedule requires 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
        s.beta[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
        prod *= 1.0 - s.beta[static_cast<std::size_t>(i)];
        s.alpha_bar[static_cast<std::size_t>(i)] = prod;
    }
    return s;
}

Tensor q_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar_at(t);
    if (eps.shape != z0.shape) {
        throw std::invalid_argument("updm: q_sample eps shape " + eps.shape_str() +
                                    " does not match z0 shape " + z0.shape_str());
    }
    return add(scale(z0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

DiffusionSample draw_diffusion_sample(const Tensor& z0, const NoiseSchedule& sched,
                                      RandomStream& rng) {
    DiffusionSample s;
    s.z0 = z0;
    s.t = rng.uniform_int(1, sched.T);
    s.eps = Tensor::gaussian(z0.shape, 1.0, rng);
    s.zt = q_sample(s.z0, s.t, s.eps, sched);
    return s;
}

}  // namespace updm
