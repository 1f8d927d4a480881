#pragma once
// Test-only oracles, independent of the library implementations they check:
// central finite differences, a Jacobi eigensolver, brute-force kNN/RkNN,
// and a straight-line evaluation of the B formula.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rocbf/linalg.hpp"

namespace oracles {

using rocbf::Mat;
using rocbf::Vec;

inline Vec central_diff(const std::function<double(const Vec&)>& f,
                        const Vec& x, double step) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        g[i] = (f(xp) - f(xm)) / (2.0 * step);
    }
    return g;
}

// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_max_eigenvalue(Mat a, int sweeps = 50) {
    const std::size_t n = a.rows;
    for (int s = 0; s < sweeps; ++s) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += a.at(p, q) * a.at(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - sn * akq;
                    a.at(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - sn * aqk;
                    a.at(q, k) = sn * apk + c * aqk;
                }
            }
        }
    }
    double best = a.at(0, 0);
    for (std::size_t i = 1; i < n; ++i) best = std::max(best, a.at(i, i));
    return best;
}

// O(N^2) reference kNN with the same conventions as the implementation:
// self excluded, ties by ascending index.
inline std::vector<std::vector<std::uint32_t>> brute_knn(
    const std::vector<Vec>& pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::vector<std::uint32_t>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::uint32_t>> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double acc = 0.0;
            for (std::size_t c = 0; c < pts[i].size(); ++c) {
                const double t = pts[i][c] - pts[j][c];
                acc += t * t;
            }
            d.push_back({acc, static_cast<std::uint32_t>(j)});
        }
        std::sort(d.begin(), d.end());
        for (std::size_t j = 0; j < k; ++j) out[i].push_back(d[j].second);
        std::sort(out[i].begin(), out[i].end());
    }
    return out;
}

inline std::vector<std::uint32_t> brute_rknn(
    const std::vector<std::vector<std::uint32_t>>& knn) {
    std::vector<std::uint32_t> counts(knn.size(), 0);
    for (const auto& nbrs : knn)
        for (const auto j : nbrs) ++counts[j];
    return counts;
}

}  // namespace oracles
