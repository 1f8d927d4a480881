#include "rocbf/barrier.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"
#include "rocbf/rng.hpp"

namespace rocbf {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void require_dims(const RffBarrier& bar, const Vec& x) {
    if (x.size() != bar.n)
        throw std::invalid_argument("barrier input dimension mismatch");
}

}  // namespace

RffBarrier RffBarrier::sample(std::size_t n, std::size_t ell, double sigma2,
                              double alpha_slope, std::uint64_t seed) {
    if (ell < 1) throw std::invalid_argument("feature count must be >= 1");
    if (sigma2 <= 0.0 || alpha_slope <= 0.0)
        throw std::invalid_argument("sigma2 and alpha_slope must be positive");
    RffBarrier bar;
    bar.n = n;
    bar.ell = ell;
    bar.sigma2 = sigma2;
    bar.alpha_slope = alpha_slope;
    bar.w_cols.resize(ell * n);
    bar.phases.resize(ell);
    bar.theta.assign(ell, 0.0);
    Rng rng(seed);
    const double sd = std::sqrt(sigma2);
    // Row-major draw order so the frequencies of a feature are contiguous in
    // the sampling stream regardless of storage layout.
    for (std::size_t i = 0; i < ell; ++i)
        for (std::size_t d = 0; d < n; ++d)
            bar.w_cols[d * ell + i] = sd * rng.normal();
    for (std::size_t i = 0; i < ell; ++i)
        bar.phases[i] = rng.uniform(0.0, kTwoPi);
    return bar;
}

double RffBarrier::scale() const {
    return std::sqrt(2.0 / static_cast<double>(ell));
}

void rff_trig(const RffBarrier& bar, const Vec& x, RffScratch& ws) {
    require_dims(bar, x);
    ws.z = bar.phases;
    const auto& ops = kernels::active();
    for (std::size_t d = 0; d < bar.n; ++d)
        ops.axpy(x[d], bar.col(d), ws.z.data(), bar.ell);
    ws.s.resize(bar.ell);
    ws.c.resize(bar.ell);
    ops.sincos(ws.z.data(), ws.s.data(), ws.c.data(), bar.ell);
}

Vec features(const RffBarrier& bar, const Vec& x) {
    RffScratch ws;
    rff_trig(bar, x, ws);
    const double sc = bar.scale();
    Vec phi(bar.ell);
    for (std::size_t i = 0; i < bar.ell; ++i) phi[i] = sc * ws.c[i];
    return phi;
}

double eval_h(const RffBarrier& bar, const Vec& x) {
    RffScratch ws;
    rff_trig(bar, x, ws);
    const double sc = bar.scale();
    // <phi, theta> with phi folded into the dot via the constant scale.
    return sc * kernels::active().dot(ws.c.data(), bar.theta.data(), bar.ell);
}

void eval_h_grad(const RffBarrier& bar, RffScratch& ws, double* h, Vec* grad) {
    const auto& ops = kernels::active();
    const double sc = bar.scale();
    if (h) *h = sc * ops.dot(ws.c.data(), bar.theta.data(), bar.ell);
    if (grad) {
        // grad_d = -scale * sum_i theta_i sin(z_i) W_id
        ws.t1.resize(bar.ell);
        for (std::size_t i = 0; i < bar.ell; ++i)
            ws.t1[i] = bar.theta[i] * ws.s[i];
        grad->assign(bar.n, 0.0);
        for (std::size_t d = 0; d < bar.n; ++d)
            (*grad)[d] = -sc * ops.dot(bar.col(d), ws.t1.data(), bar.ell);
    }
}

Vec grad_h(const RffBarrier& bar, const Vec& x) {
    RffScratch ws;
    rff_trig(bar, x, ws);
    Vec g;
    eval_h_grad(bar, ws, nullptr, &g);
    return g;
}

BTerms compute_b_terms(const RffBarrier& bar, const Vec& x, double t,
                       const SystemModel& sys, RffScratch& ws) {
    if (sys.n != bar.n)
        throw std::invalid_argument("system/barrier dimension mismatch");
    rff_trig(bar, x, ws);
    double h = 0.0;
    Vec g;
    eval_h_grad(bar, ws, &h, &g);
    const double gn = norm2(g);

    BTerms bt;
    bt.b1 = dot(g, sys.fhat(x, t)) + bar.alpha_slope * h -
            gn * sys.delta_f(x, t);
    bt.b2 = matvec_t(sys.ghat(x, t), g);
    bt.b3 = -gn * sys.delta_g(x, t);
    return bt;
}

BTerms compute_b_terms(const RffBarrier& bar, const Vec& x, double t,
                       const SystemModel& sys) {
    RffScratch ws;
    return compute_b_terms(bar, x, t, sys, ws);
}

double eval_q(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
              const SystemModel& sys, const MeasurementModel& meas,
              const RobustnessConsts& consts, RffScratch& ws) {
    const Vec xh = meas.xhat(y);
    const BTerms bt = compute_b_terms(bar, xh, t, sys, ws);
    const double un = norm2(u);
    const double penalty =
        (consts.lbar1 + (consts.lbar2 + consts.lbar3) * un) * meas.delta_x(y);
    return bt.b1 + dot(bt.b2, u) + bt.b3 * un - penalty;
}

double eval_q(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
              const SystemModel& sys, const MeasurementModel& meas,
              const RobustnessConsts& consts) {
    RffScratch ws;
    return eval_q(bar, u, y, t, sys, meas, consts, ws);
}

Vec grad_q_theta(const RffBarrier& bar, const Vec& u, const Vec& y, double t,
                 const SystemModel& sys, const MeasurementModel& meas,
                 const RobustnessConsts& /*consts*/) {
    const Vec xh = meas.xhat(y);
    if (sys.n != bar.n)
        throw std::invalid_argument("system/barrier dimension mismatch");
    RffScratch ws;
    rff_trig(bar, xh, ws);
    Vec g;
    eval_h_grad(bar, ws, nullptr, &g);
    const double gn = norm2(g);

    // d/dtheta [ <grad h, c> + a*h - c1*||grad h|| ] with c = F + G u and
    // c1 = Delta_F + Delta_G * ||u||. The measurement penalty does not
    // depend on theta. Both <grad h, c> and ||grad h|| reduce to the matrix
    // Dphi applied to a fixed direction v.
    Vec c = sys.fhat(xh, t);
    const Vec gu = matvec(sys.ghat(xh, t), u);
    for (std::size_t d = 0; d < bar.n; ++d) c[d] += gu[d];
    const double c1 = sys.delta_f(xh, t) + sys.delta_g(xh, t) * norm2(u);
    if (gn > 0.0) {
        const double f = c1 / gn;
        for (std::size_t d = 0; d < bar.n; ++d) c[d] -= f * g[d];
    }  // at the kink the zero subgradient convention drops the norm term

    // (W c)_i accumulated column-wise, then scaled by -scale*sin(z_i),
    // plus the a*phi term.
    const auto& ops = kernels::active();
    ws.t2.assign(bar.ell, 0.0);
    for (std::size_t d = 0; d < bar.n; ++d)
        ops.axpy(c[d], bar.col(d), ws.t2.data(), bar.ell);
    const double sc = bar.scale();
    Vec out(bar.ell);
    for (std::size_t i = 0; i < bar.ell; ++i)
        out[i] = -sc * ws.s[i] * ws.t2[i] + bar.alpha_slope * sc * ws.c[i];
    return out;
}

void save_barrier(const RffBarrier& bar, const RobustnessConsts& consts,
                  const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write barrier file: " + path);
    std::fprintf(f, "rocbf-barrier 1\n");
    std::fprintf(f, "n %zu\n", bar.n);
    std::fprintf(f, "ell %zu\n", bar.ell);
    std::fprintf(f, "sigma2 %a\n", bar.sigma2);
    std::fprintf(f, "alpha_slope %a\n", bar.alpha_slope);
    std::fprintf(f, "lbar1 %a\n", consts.lbar1);
    std::fprintf(f, "lbar2 %a\n", consts.lbar2);
    std::fprintf(f, "lbar3 %a\n", consts.lbar3);
    std::fprintf(f, "W\n");
    for (std::size_t i = 0; i < bar.ell; ++i) {
        for (std::size_t d = 0; d < bar.n; ++d)
            std::fprintf(f, "%s%a", d ? " " : "", bar.w_at(i, d));
        std::fprintf(f, "\n");
    }
    std::fprintf(f, "b\n");
    for (std::size_t i = 0; i < bar.ell; ++i)
        std::fprintf(f, "%a\n", bar.phases[i]);
    std::fprintf(f, "theta\n");
    for (std::size_t i = 0; i < bar.ell; ++i)
        std::fprintf(f, "%a\n", bar.theta[i]);
    std::fclose(f);
}

std::pair<RffBarrier, RobustnessConsts> load_barrier(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw DataError("cannot open barrier file: " + path);
    auto fail = [&](const char* what) -> void {
        std::fclose(f);
        throw DataError(std::string("barrier file ") + path + ": " + what);
    };

    char tag[64];
    int version = 0;
    if (std::fscanf(f, "%63s %d", tag, &version) != 2 ||
        std::string(tag) != "rocbf-barrier" || version != 1)
        fail("bad header");

    RffBarrier bar;
    RobustnessConsts consts;
    std::size_t n = 0, ell = 0;
    if (std::fscanf(f, " n %zu ell %zu", &n, &ell) != 2) fail("bad dims");
    double sigma2, alpha, l1, l2, l3;
    if (std::fscanf(f, " sigma2 %la alpha_slope %la lbar1 %la lbar2 %la lbar3 %la",
                    &sigma2, &alpha, &l1, &l2, &l3) != 5)
        fail("bad scalars");
    bar.n = n;
    bar.ell = ell;
    bar.sigma2 = sigma2;
    bar.alpha_slope = alpha;
    consts = {l1, l2, l3};

    if (std::fscanf(f, " W") != 0) fail("missing W");
    bar.w_cols.resize(ell * n);
    for (std::size_t i = 0; i < ell; ++i)
        for (std::size_t d = 0; d < n; ++d) {
            double v;
            if (std::fscanf(f, "%la", &v) != 1) fail("short W");
            bar.w_cols[d * ell + i] = v;
        }
    if (std::fscanf(f, " b") != 0) fail("missing b");
    bar.phases.resize(ell);
    for (std::size_t i = 0; i < ell; ++i)
        if (std::fscanf(f, "%la", &bar.phases[i]) != 1) fail("short b");
    if (std::fscanf(f, " theta") != 0) fail("missing theta");
    bar.theta.resize(ell);
    for (std::size_t i = 0; i < ell; ++i)
        if (std::fscanf(f, "%la", &bar.theta[i]) != 1) fail("short theta");
    std::fclose(f);
    return {std::move(bar), consts};
}

}  // namespace rocbf
