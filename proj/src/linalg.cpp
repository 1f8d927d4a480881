#include "rocbf/linalg.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>

#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"

namespace rocbf {

double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    return kernels::active().dot(a.data(), b.data(), a.size());
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

void axpy(double a, const Vec& x, Vec& y) {
    assert(x.size() == y.size());
    kernels::active().axpy(a, x.data(), y.data(), x.size());
}

Vec matvec(const Mat& m, const Vec& x) {
    assert(x.size() == m.cols);
    Vec out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[c];
        out[r] = acc;
    }
    return out;
}

Vec matvec_t(const Mat& m, const Vec& x) {
    assert(x.size() == m.rows);
    Vec out(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += m.at(r, c) * x[r];
    return out;
}

double spectral_norm(const Mat& m, double tol, int max_iters) {
    const std::size_t n = m.cols;
    if (n == 0 || m.rows == 0) return 0.0;

    // Gram matrix m^T m, n x n (n is small everywhere this is used).
    Mat gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < m.rows; ++r)
                acc += m.at(r, i) * m.at(r, j);
            gram.at(i, j) = acc;
            gram.at(j, i) = acc;
        }
    }
    return spectral_norm_gram(gram, tol, max_iters);
}

double spectral_norm_gram(const Mat& gram, double tol, int max_iters) {
    const std::size_t n = gram.cols;
    if (n == 0) return 0.0;

    // Deterministic start, slightly skewed so it is not orthogonal to the
    // leading eigenvector of typical inputs.
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * double(i);
    double nv = norm2(v);
    for (auto& e : v) e /= nv;

    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vec w = matvec(gram, v);
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;  // zero matrix (or v in the null space)
        for (auto& e : w) e /= nw;
        const double lambda_new = nw;
        const bool converged =
            std::fabs(lambda_new - lambda) <= tol * std::max(1.0, lambda_new);
        lambda = lambda_new;
        v = std::move(w);
        if (converged && it > 0) return std::sqrt(lambda);
    }
    throw NumericalError("power iteration did not converge", max_iters);
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    double r = std::fmod(a + 3.14159265358979323846, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - 3.14159265358979323846;
}

bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace rocbf
