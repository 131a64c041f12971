#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "updm/rng.hpp"

namespace updm {

struct Tensor;

// One record of the reverse-mode graph. `backward` reads the output's grad
// buffer and accumulates into the parents' grad buffers.
struct Node {
    std::vector<Tensor> parents;
    std::function<void(const Tensor& out)> backward;
};

// Dense row-major 64-bit tensor. data/grad are shared buffers, so copying a
// Tensor is a cheap view onto the same storage; parameters stay live inside
// optimizer param lists and graph nodes through these shared pointers.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    std::shared_ptr<std::vector<double>> grad;  // null until backward touches it
    std::shared_ptr<Node> node;                 // null for leaves and constants
    bool requires_grad = false;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor gaussian(std::vector<int> shape, double stddev, RandomStream& rng,
                           bool requires_grad = false);

    std::size_t size() const { return data ? data->size() : 0; }
    bool defined() const { return static_cast<bool>(data); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double value() const;             // scalar tensors only
    double at(std::size_t i) const { return (*data)[i]; }
    double at(int r, int c) const { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }
    double& mut(std::size_t i) { return (*data)[i]; }
    double& mut(int r, int c) { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }

    // deep copy of values; detached from any graph
    Tensor clone_detached(bool requires_grad = false) const;

    void ensure_grad();
    void zero_grad();
    double grad_at(std::size_t i) const { return grad ? (*grad)[i] : 0.0; }

    std::string shape_str() const;
};

// Thread-local switch that disables graph construction; used by sampling and
// evaluation so read-only forwards stay allocation-light and thread-safe.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

bool grad_enabled();

// --- ops -------------------------------------------------------------------
// No broadcasting except a [1] or [1x1] scalar against any shape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor silu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);     // scalar: mean squared difference
Tensor sum(const Tensor& x);                      // scalar
Tensor transpose(const Tensor& x);                // 2-D
Tensor concat_cols(const Tensor& a, const Tensor& b);  // [1xp],[1xq] -> [1x(p+q)]
Tensor stack_rows(const std::vector<Tensor>& rows);    // n x [1xd] -> [nxd]
Tensor take_row(const Tensor& x, int row);             // [mxd] -> [1xd], grad scatters
Tensor cross_entropy(const Tensor& logits, int label); // [1xK] -> scalar, stable
Tensor stop_gradient(const Tensor& x);

// Accumulates grads in reverse topological order. Repeated calls without
// zeroing accumulate additively.
void backward(const Tensor& loss);

// fnv1a-64 over the raw little-endian bytes of a double sequence
std::uint64_t fnv1a64(const double* values, std::size_t count, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const void* bytes, std::size_t count, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace updm
