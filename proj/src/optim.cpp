#include "updm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

Optimizer::Optimizer(OptKind kind, double learning_rate, double weight_decay,
                     std::vector<Param> params)
    : kind_(kind), lr_(learning_rate), weight_decay_(weight_decay), params_(std::move(params)) {
    if (lr_ <= 0.0) throw std::invalid_argument("updm: learning rate must be positive");
    if (weight_decay_ < 0.0) throw std::invalid_argument("updm: weight decay must be non-negative");
    if (kind_ == OptKind::adam) {
        for (const Param& p : params_) {
            m_.emplace_back(p.tensor.size(), 0.0);
            v_.emplace_back(p.tensor.size(), 0.0);
        }
    }
}

void Optimizer::step() {
    ++step_count_;
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Param& p = params_[pi];
        if (!p.tensor.grad) {
            throw std::runtime_error("updm: optimizer step with missing gradient for parameter '" +
                                     p.name + "'");
        }
        std::vector<double>& w = *p.tensor.data;
        const std::vector<double>& g = *p.tensor.grad;
        if (kind_ == OptKind::sgd) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= lr_ * (g[i] + weight_decay_ * w[i]);
            }
        } else {
            const double bc1 = 1.0 - std::pow(kBeta1, step_count_);
            const double bc2 = 1.0 - std::pow(kBeta2, step_count_);
            std::vector<double>& m = m_[pi];
            std::vector<double>& v = v_[pi];
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr_ * (mhat / (std::sqrt(vhat) + kEps) + weight_decay_ * w[i]);
            }
        }
        for (double x : w) {
            if (!std::isfinite(x)) {
                throw std::runtime_error("updm: non-finite parameter after step for '" + p.name + "'");
            }
        }
    }
}

void Optimizer::zero_grad() { zero_grads(params_); }

void zero_grads(std::vector<Param>& params) {
    for (Param& p : params) p.tensor.zero_grad();
}

}  // namespace updm
