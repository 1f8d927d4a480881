#pragma once
// Small dense linear algebra on std::vector<double>, routed through the
// dispatched kernels. Dimensions in this project are tiny (n=4 states,
// m=1 inputs) except the feature count, which is where the kernels pay off.

#include <cstddef>
#include <vector>

namespace rocbf {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0, cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm_inf(const Vec& a);
// y += a * x
void axpy(double a, const Vec& x, Vec& y);

Vec matvec(const Mat& m, const Vec& x);    // m * x
Vec matvec_t(const Mat& m, const Vec& x);  // m^T * x

// Largest singular value via power iteration on m^T m. Throws NumericalError
// when not converged within max_iters.
double spectral_norm(const Mat& m, double tol = 1e-10, int max_iters = 1000);

// Power iteration directly on a symmetric PSD Gram matrix; returns
// sqrt(lambda_max).
double spectral_norm_gram(const Mat& gram, double tol = 1e-10,
                          int max_iters = 1000);

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

bool all_finite(const Vec& a);

}  // namespace rocbf
