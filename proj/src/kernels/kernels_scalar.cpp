// Scalar reference kernels. These define the numerical contract: the AVX2
// variants must reproduce them bit-for-bit, which is why every accumulation
// uses std::fma and the dot product keeps four interleaved accumulators.

#include "rocbf/kernels.hpp"

#include <cmath>

#include "kernel_core.hpp"

namespace rocbf::kernels {
namespace {

void sincos_scalar(const double* z, double* s, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) detail::sincos_one(z[i], &s[i], &c[i]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 = std::fma(a[i + 0], b[i + 0], a0);
        a1 = std::fma(a[i + 1], b[i + 1], a1);
        a2 = std::fma(a[i + 2], b[i + 2], a2);
        a3 = std::fma(a[i + 3], b[i + 3], a3);
    }
    double acc = (a0 + a2) + (a1 + a3);
    for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void sq_dists_scalar(const double* pts, std::size_t n_points, std::size_t dim,
                     const double* x, double* out) {
    for (std::size_t j = 0; j < n_points; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double t = pts[d * n_points + j] - x[d];
            acc = std::fma(t, t, acc);
        }
        out[j] = acc;
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", sincos_scalar, dot_scalar, axpy_scalar,
                         sq_dists_scalar};
    return ops;
}

}  // namespace rocbf::kernels
