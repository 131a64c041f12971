#pragma once

#include <string>
#include <vector>

#include "updm/tensor.hpp"

namespace updm {

enum class OptKind { sgd, adam };

struct Param {
    std::string name;
    Tensor tensor;  // shares storage with the owning model
};

// First-order optimizer with decoupled weight decay. Gradients are not zeroed
// by step(); callers zero after consuming them.
class Optimizer {
  public:
    Optimizer(OptKind kind, double learning_rate, double weight_decay, std::vector<Param> params);

    void step();
    void zero_grad();
    int step_count() const { return step_count_; }
    const std::vector<Param>& params() const { return params_; }

  private:
    OptKind kind_;
    double lr_;
    double weight_decay_;
    int step_count_ = 0;
    std::vector<Param> params_;
    std::vector<std::vector<double>> m_;  // adam first moments
    std::vector<std::vector<double>> v_;  // adam second moments

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
};

void zero_grads(std::vector<Param>& params);

}  // namespace updm
