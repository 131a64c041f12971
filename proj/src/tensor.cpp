#include "updm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace updm {

namespace {

thread_local bool g_grad_enabled = true;

// Backward runs with pass-local adjoints for interior tensors so that a
// repeated backward() call contributes exactly one more copy of each gradient
// (the accumulation contract). The redirect map sends writes that would hit an
// interior tensor's persistent grad buffer into the pass buffer instead;
// leaves accumulate straight into their persistent buffers.
struct BackwardContext {
    std::unordered_map<const std::vector<double>*, std::vector<double>*> redirect;
};
thread_local BackwardContext* g_bctx = nullptr;

std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("updm: tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

bool is_scalar(const Tensor& t) { return t.size() == 1; }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string("updm: ") + op + " shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
    }
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : *t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("updm: non-finite value produced by ") + op);
        }
    }
}

Tensor make_result(std::vector<int> shape, std::vector<double> values, const char* op,
                   std::vector<Tensor> parents,
                   std::function<void(const Tensor&)> backward_fn) {
    Tensor out;
    out.shape = std::move(shape);
    out.data = std::make_shared<std::vector<double>>(std::move(values));
    check_finite(out, op);
    bool needs_grad = false;
    if (g_grad_enabled) {
        for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad;
    }
    if (needs_grad) {
        out.requires_grad = true;
        out.ensure_grad();
        out.node = std::make_shared<Node>();
        out.node->parents = std::move(parents);
        out.node->backward = std::move(backward_fn);
    }
    return out;
}

void accumulate(Tensor& t, std::size_t i, double v) {
    if (!t.requires_grad) return;
    t.ensure_grad();
    std::vector<double>* buf = t.grad.get();
    if (g_bctx) {
        auto it = g_bctx->redirect.find(buf);
        if (it != g_bctx->redirect.end()) buf = it->second;
    }
    (*buf)[i] += v;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    std::size_t n = numel(shape);
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(n, 0.0);
    t.requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
    if (numel(shape) != values.size()) {
        throw std::invalid_argument("updm: value count does not match shape");
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

Tensor Tensor::gaussian(std::vector<int> shape, double stddev, RandomStream& rng,
                        bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : *t.data) v = stddev * rng.gaussian();
    return t;
}

double Tensor::value() const {
    if (size() != 1) throw std::invalid_argument("updm: value() requires a scalar, got " + shape_str());
    return (*data)[0];
}

Tensor Tensor::clone_detached(bool requires_grad) const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(*data);
    t.requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
}

void Tensor::ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<double>>(size(), 0.0);
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0]) {
        throw std::invalid_argument("updm: matmul shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = a.at(i, p);
            for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += aip * b.at(p, j);
        }
    }
    return make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](const Tensor& c) {
        Tensor pa = c.node->parents[0];
        Tensor pb = c.node->parents[1];
        // dA = dC * B^T, dB = A^T * dC
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += c.grad_at(static_cast<std::size_t>(i) * n + j) * pb.at(p, j);
                accumulate(pa, static_cast<std::size_t>(i) * k + p, acc);
            }
        }
        for (int p = 0; p < k; ++p) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += pa.at(i, p) * c.grad_at(static_cast<std::size_t>(i) * n + j);
                accumulate(pb, static_cast<std::size_t>(p) * n + j, acc);
            }
        }
    });
}

namespace {

enum class EwKind { add, sub, mul };

// shared elementwise kernel with scalar broadcast on either side
Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
    const bool a_scalar = is_scalar(a), b_scalar = is_scalar(b);
    if (!a_scalar && !b_scalar) check_same_shape(a, b, name);
    const Tensor& shaped = a_scalar ? b : a;
    const std::size_t n = shaped.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.at(a_scalar ? 0 : i);
        const double y = b.at(b_scalar ? 0 : i);
        out[i] = kind == EwKind::add ? x + y : kind == EwKind::sub ? x - y : x * y;
    }
    return make_result(shaped.shape, std::move(out), name, {a, b},
                       [kind, a_scalar, b_scalar, n](const Tensor& c) {
                           Tensor pa = c.node->parents[0];
                           Tensor pb = c.node->parents[1];
                           for (std::size_t i = 0; i < n; ++i) {
                               const double g = c.grad_at(i);
                               double da = 0.0, db = 0.0;
                               switch (kind) {
                                   case EwKind::add: da = g; db = g; break;
                                   case EwKind::sub: da = g; db = -g; break;
                                   case EwKind::mul:
                                       da = g * pb.at(b_scalar ? 0 : i);
                                       db = g * pa.at(a_scalar ? 0 : i);
                                       break;
                               }
                               accumulate(pa, a_scalar ? 0 : i, da);
                               accumulate(pb, b_scalar ? 0 : i, db);
                           }
                       });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::mul, "mul"); }

Tensor scale(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }

Tensor silu(const Tensor& x) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.at(i);
        out[i] = v / (1.0 + std::exp(-v));
    }
    return make_result(x.shape, std::move(out), "silu", {x}, [n](const Tensor& c) {
        Tensor p = c.node->parents[0];
        for (std::size_t i = 0; i < n; ++i) {
            const double v = p.at(i);
            const double s = 1.0 / (1.0 + std::exp(-v));
            accumulate(p, i, c.grad_at(i) * s * (1.0 + v * (1.0 - s)));
        }
    });
}

Tensor softmax_rows(const Tensor& x) {
    if (x.shape.size() != 2) throw std::invalid_argument("updm: softmax_rows needs a 2-D tensor");
    const int m = x.shape[0], n = x.shape[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double mx = x.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out[static_cast<std::size_t>(i) * n + j] = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] /= z;
    }
    return make_result({m, n}, std::move(out), "softmax_rows", {x}, [m, n](const Tensor& c) {
        Tensor p = c.node->parents[0];
        // dx_ij = y_ij * (dy_ij - sum_k dy_ik y_ik)
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j)
                dot += c.grad_at(static_cast<std::size_t>(i) * n + j) * c.at(i, j);
            for (int j = 0; j < n; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * n + j;
                accumulate(p, idx, c.at(i, j) * (c.grad_at(idx) - dot));
            }
        }
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    const std::size_t n = a.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.at(i) - b.at(i);
        acc += d * d;
    }
    return make_result({1}, {acc / static_cast<double>(n)}, "mse", {a, b}, [n](const Tensor& c) {
        Tensor pa = c.node->parents[0];
        Tensor pb = c.node->parents[1];
        const double g = 2.0 * c.grad_at(0) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pa.at(i) - pb.at(i);
            accumulate(pa, i, g * d);
            accumulate(pb, i, -g * d);
        }
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : *x.data) acc += v;
    const std::size_t n = x.size();
    return make_result({1}, {acc}, "sum", {x}, [n](const Tensor& c) {
        Tensor p = c.node->parents[0];
        for (std::size_t i = 0; i < n; ++i) accumulate(p, i, c.grad_at(0));
    });
}

Tensor transpose(const Tensor& x) {
    if (x.shape.size() != 2) throw std::invalid_argument("updm: transpose needs a 2-D tensor");
    const int m = x.shape[0], n = x.shape[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = x.at(i, j);
    return make_result({n, m}, std::move(out), "transpose", {x}, [m, n](const Tensor& c) {
        Tensor p = c.node->parents[0];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                accumulate(p, static_cast<std::size_t>(i) * n + j,
                           c.grad_at(static_cast<std::size_t>(j) * m + i));
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[0] != 1 || b.shape[0] != 1) {
        throw std::invalid_argument("updm: concat_cols expects row vectors, got " + a.shape_str() +
                                    " and " + b.shape_str());
    }
    const int p = a.shape[1], q = b.shape[1];
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p) + q);
    out.insert(out.end(), a.data->begin(), a.data->end());
    out.insert(out.end(), b.data->begin(), b.data->end());
    return make_result({1, p + q}, std::move(out), "concat_cols", {a, b}, [p, q](const Tensor& c) {
        Tensor pa = c.node->parents[0];
        Tensor pb = c.node->parents[1];
        for (int i = 0; i < p; ++i) accumulate(pa, i, c.grad_at(i));
        for (int i = 0; i < q; ++i) accumulate(pb, i, c.grad_at(static_cast<std::size_t>(p) + i));
    });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("updm: stack_rows needs at least one row");
    const int d = rows[0].cols();
    for (const Tensor& r : rows) {
        if (r.shape.size() != 2 || r.shape[0] != 1 || r.shape[1] != d) {
            throw std::invalid_argument("updm: stack_rows rows must all be [1x" +
                                        std::to_string(d) + "], got " + r.shape_str());
        }
    }
    const int m = static_cast<int>(rows.size());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m) * d);
    for (const Tensor& r : rows) out.insert(out.end(), r.data->begin(), r.data->end());
    return make_result({m, d}, std::move(out), "stack_rows", rows, [m, d](const Tensor& c) {
        for (int i = 0; i < m; ++i) {
            Tensor p = c.node->parents[i];
            for (int j = 0; j < d; ++j)
                accumulate(p, j, c.grad_at(static_cast<std::size_t>(i) * d + j));
        }
    });
}

Tensor take_row(const Tensor& x, int row) {
    if (x.shape.size() != 2 || row < 0 || row >= x.shape[0]) {
        throw std::invalid_argument("updm: take_row index " + std::to_string(row) +
                                    " out of range for " + x.shape_str());
    }
    const int d = x.shape[1];
    std::vector<double> out(x.data->begin() + static_cast<std::size_t>(row) * d,
                            x.data->begin() + static_cast<std::size_t>(row + 1) * d);
    return make_result({1, d}, std::move(out), "take_row", {x}, [row, d](const Tensor& c) {
        Tensor p = c.node->parents[0];
        for (int j = 0; j < d; ++j)
            accumulate(p, static_cast<std::size_t>(row) * d + j, c.grad_at(j));
    });
}

Tensor cross_entropy(const Tensor& logits, int label) {
    if (logits.shape.size() != 2 || logits.shape[0] != 1) {
        throw std::invalid_argument("updm: cross_entropy expects [1xK] logits");
    }
    const int k = logits.shape[1];
    if (label < 0 || label >= k) throw std::invalid_argument("updm: cross_entropy label out of range");
    double mx = logits.at(0);
    for (int j = 1; j < k; ++j) mx = std::max(mx, logits.at(static_cast<std::size_t>(j)));
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(logits.at(static_cast<std::size_t>(j)) - mx);
    const double loss = std::log(z) + mx - logits.at(static_cast<std::size_t>(label));
    return make_result({1}, {loss}, "cross_entropy", {logits}, [label, k, mx, z](const Tensor& c) {
        Tensor p = c.node->parents[0];
        const double g = c.grad_at(0);
        for (int j = 0; j < k; ++j) {
            const double soft = std::exp(p.at(static_cast<std::size_t>(j)) - mx) / z;
            accumulate(p, static_cast<std::size_t>(j), g * (soft - (j == label ? 1.0 : 0.0)));
        }
    });
}

Tensor stop_gradient(const Tensor& x) {
    Tensor t;
    t.shape = x.shape;
    t.data = x.data;  // value-identical, shares storage, carries no graph
    t.requires_grad = false;
    return t;
}

void backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw std::invalid_argument("updm: backward requires a scalar loss, got " + loss.shape_str());
    }
    if (!loss.node) return;  // constant loss: nothing reachable

    // post-order DFS; deterministic given graph construction order
    std::unordered_map<Node*, Tensor> outs;
    outs.emplace(loss.node.get(), loss);
    std::vector<Node*> order;
    std::unordered_set<Node*> visited{loss.node.get()};
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node.get(), 0);
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            const Tensor& p = top.first->parents[top.second++];
            if (p.node) {
                Node* child = p.node.get();
                if (!outs.count(child)) outs.emplace(child, p);
                if (!visited.count(child)) {
                    visited.insert(child);
                    stack.emplace_back(child, 0);
                }
            }
        } else {
            order.push_back(top.first);
            stack.pop_back();
        }
    }

    // pass-local adjoints for every interior tensor
    BackwardContext ctx;
    std::unordered_map<Node*, std::shared_ptr<std::vector<double>>> pass;
    pass.reserve(order.size());
    for (auto& [node, out] : outs) {
        auto buf = std::make_shared<std::vector<double>>(out.size(), 0.0);
        ctx.redirect.emplace(out.grad.get(), buf.get());
        pass.emplace(node, std::move(buf));
    }
    (*pass.at(loss.node.get()))[0] = 1.0;

    g_bctx = &ctx;
    // reverse post-order: loss first, inputs last
    for (std::size_t i = order.size(); i-- > 0;) {
        Node* node = order[i];
        Tensor shell = outs.at(node);
        shell.grad = pass.at(node);  // closures read the pass-local adjoint
        node->backward(shell);
    }
    g_bctx = nullptr;

    // fold pass-local adjoints into the persistent grads
    for (auto& [node, out] : outs) {
        Tensor t = out;
        t.ensure_grad();
        const std::vector<double>& src = *pass.at(node);
        for (std::size_t i = 0; i < src.size(); ++i) (*t.grad)[i] += src[i];
    }
}

std::uint64_t fnv1a64(const void* bytes, std::size_t count, std::uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < count; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const double* values, std::size_t count, std::uint64_t h) {
    return fnv1a64(static_cast<const void*>(values), count * sizeof(double), h);
}

}  // namespace updm
