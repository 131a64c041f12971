#include "updm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace updm {

std::vector<double> cholesky_solve(const std::vector<double>& a, int n,
                                   const std::vector<double>& b, int m) {
    if (a.size() != static_cast<std::size_t>(n) * n || b.size() != static_cast<std::size_t>(n) * m) {
        throw std::invalid_argument("updm: cholesky_solve dimension mismatch");
    }
    std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= l[static_cast<std::size_t>(i) * n + k] * l[static_cast<std::size_t>(j) * n + k];
            if (i == j) {
                if (s <= 0.0) {
                    throw std::runtime_error(
                        "updm: matrix not positive definite; add a ridge term to regularize");
                }
                l[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
            } else {
                l[static_cast<std::size_t>(i) * n + j] = s / l[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
    // forward then back substitution, column by column of B
    std::vector<double> x(b);
    for (int c = 0; c < m; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = x[static_cast<std::size_t>(i) * m + c];
            for (int k = 0; k < i; ++k)
                s -= l[static_cast<std::size_t>(i) * n + k] * x[static_cast<std::size_t>(k) * m + c];
            x[static_cast<std::size_t>(i) * m + c] = s / l[static_cast<std::size_t>(i) * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = x[static_cast<std::size_t>(i) * m + c];
            for (int k = i + 1; k < n; ++k)
                s -= l[static_cast<std::size_t>(k) * n + i] * x[static_cast<std::size_t>(k) * m + c];
            x[static_cast<std::size_t>(i) * m + c] = s / l[static_cast<std::size_t>(i) * n + i];
        }
    }
    return x;
}

void jacobi_eigen_sym(const std::vector<double>& a, int n, std::vector<double>& values,
                      std::vector<double>& vectors) {
    if (a.size() != static_cast<std::size_t>(n) * n) {
        throw std::invalid_argument("updm: jacobi_eigen_sym dimension mismatch");
    }
    std::vector<double> m(a);
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto at = [n](std::vector<double>& buf, int r, int c) -> double& {
        return buf[static_cast<std::size_t>(r) * n + c];
    };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(m, p, q) * at(m, p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(m, p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = at(m, p, p);
                const double aqq = at(m, q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = at(m, k, p), mkq = at(m, k, q);
                    at(m, k, p) = c * mkp - s * mkq;
                    at(m, k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = at(m, p, k), mqk = at(m, q, k);
                    at(m, p, k) = c * mpk - s * mqk;
                    at(m, q, k) = s * mpk + c * mqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(v, k, p), vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = at(m, i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return diag[static_cast<std::size_t>(x)] > diag[static_cast<std::size_t>(y)]; });

    values.assign(static_cast<std::size_t>(n), 0.0);
    vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int r = 0; r < n; ++r) {
        const int src = order[static_cast<std::size_t>(r)];
        values[static_cast<std::size_t>(r)] = diag[static_cast<std::size_t>(src)];
        int arg = 0;
        double best = 0.0;
        for (int k = 0; k < n; ++k) {
            const double x = at(v, k, src);
            vectors[static_cast<std::size_t>(r) * n + k] = x;
            if (std::abs(x) > best) {
                best = std::abs(x);
                arg = k;
            }
        }
        if (vectors[static_cast<std::size_t>(r) * n + arg] < 0.0) {
            for (int k = 0; k < n; ++k) vectors[static_cast<std::size_t>(r) * n + k] *= -1.0;
        }
    }
}

}  // namespace updm
