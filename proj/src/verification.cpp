#include "rocbf/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"

namespace rocbf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double w_spectral_norm(const RffBarrier& bar) {
    // Gram of W from column dots; power iteration on the small n x n matrix.
    Mat gram(bar.n, bar.n);
    const auto& ops = kernels::active();
    for (std::size_t i = 0; i < bar.n; ++i)
        for (std::size_t j = i; j < bar.n; ++j) {
            const double v = ops.dot(bar.col(i), bar.col(j), bar.ell);
            gram.at(i, j) = v;
            gram.at(j, i) = v;
        }
    return spectral_norm_gram(gram);
}

// Uniform draw from a Euclidean ball.
Vec sample_ball(const Vec& center, double radius, Rng& rng) {
    const std::size_t p = center.size();
    Vec dir(p);
    double nrm = 0.0;
    do {
        for (auto& v : dir) v = rng.normal();
        nrm = norm2(dir);
    } while (nrm < 1e-12);
    const double r =
        radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
    Vec out(p);
    for (std::size_t d = 0; d < p; ++d)
        out[d] = center[d] + r * dir[d] / nrm;
    return out;
}

double sanitize(double v) {
    if (std::isnan(v)) return 0.0;
    if (v > 1e300) return 1e300;
    if (v < -1e300) return -1e300;
    return v;
}

}  // namespace

VerifyConfig VerifyConfig::from_config(const Config& cfg) {
    VerifyConfig v;
    v.lip_pairs = static_cast<int>(cfg.get_int("verify.lip_pairs"));
    v.inflation = cfg.get_double("verify.inflation");
    v.max_demos = static_cast<int>(cfg.get_int("verify.max_demos"));
    v.lbar_pairs = static_cast<int>(cfg.get_int("verify.lbar_pairs"));
    v.bndq_samples = static_cast<int>(cfg.get_int("verify.bndq_samples"));
    v.bndq_horizon = cfg.get_double("verify.bndq_horizon");
    v.seed = static_cast<std::uint64_t>(cfg.get_int("verify.seed"));
    return v;
}

double rff_lip_h_bound(const RffBarrier& bar) {
    return bar.scale() * w_spectral_norm(bar) * norm2(bar.theta);
}

double rff_lip_grad_h_bound(const RffBarrier& bar) {
    const double w = w_spectral_norm(bar);
    return bar.scale() * norm_inf(bar.theta) * w * w;
}

double rff_lip_h_bound_prob(const RffBarrier& bar, double delta) {
    const double n = static_cast<double>(bar.n);
    const double ell = static_cast<double>(bar.ell);
    return std::sqrt(2.0 * bar.sigma2) *
           (1.0 + std::sqrt(n / ell) +
            std::sqrt(2.0 / ell * std::log(1.0 / delta))) *
           norm2(bar.theta);
}

double empirical_lip_q(const RffBarrier& bar, const SystemModel& sys,
                       const MeasurementModel& meas,
                       const RobustnessConsts& consts, const DemoRecord& demo,
                       double radius, int samples, double inflation,
                       Rng& rng) {
    if (radius <= 0.0)
        throw std::invalid_argument("empirical_lip_q: radius must be positive");
    RffScratch ws;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec y1 = sample_ball(demo.y, radius, rng);
        const Vec y2 = sample_ball(demo.y, radius, rng);
        Vec diff(y1.size());
        for (std::size_t d = 0; d < y1.size(); ++d) diff[d] = y1[d] - y2[d];
        const double dist = norm2(diff);
        if (dist < 1e-12) continue;
        const double q1 = eval_q(bar, demo.u, y1, demo.t, sys, meas, consts, ws);
        const double q2 = eval_q(bar, demo.u, y2, demo.t, sys, meas, consts, ws);
        worst = std::max(worst, std::fabs(q1 - q2) / dist);
    }
    return inflation * worst;
}

double estimate_bnd_q(const RffBarrier& bar, const SystemModel& sys,
                      const MeasurementModel& meas,
                      const RobustnessConsts& consts, const DemoRecord& demo,
                      double radius, int samples, double horizon,
                      double inflation, Rng& rng) {
    if (sys.time_invariant) return 0.0;
    RffScratch ws;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec yb = sample_ball(demo.y, radius, rng);
        const double t1 = rng.uniform(0.0, horizon);
        const double t2 = rng.uniform(0.0, horizon);
        const double q1 = eval_q(bar, demo.u, yb, t1, sys, meas, consts, ws);
        const double q2 = eval_q(bar, demo.u, yb, t2, sys, meas, consts, ws);
        worst = std::max(worst, std::fabs(q1 - q2));
    }
    return inflation * worst;
}

ConditionRecord check_prop1(const LipschitzBounds& bounds,
                            const DatasetBundle& bundle, double gamma_unsafe) {
    ConditionRecord rec;
    rec.name = "unsafe-margin";
    rec.value = bundle.eps_n;
    rec.threshold = bounds.lip_h > 0.0 ? gamma_unsafe / bounds.lip_h : kInf;
    rec.margin = rec.threshold - rec.value;
    rec.pass = rec.value < rec.threshold;  // strict
    return rec;
}

ConditionRecord check_prop2(const LipschitzBounds& bounds,
                            const DatasetBundle& bundle, double gamma_safe) {
    ConditionRecord rec;
    rec.name = "safe-margin";
    rec.value = bundle.eps;
    rec.threshold = bounds.lip_h > 0.0 ? gamma_safe / bounds.lip_h : kInf;
    rec.margin = rec.threshold - rec.value;
    rec.pass = rec.value <= rec.threshold;  // non-strict
    return rec;
}

DomainBox DomainBox::around(const DatasetBundle& bundle, double pad) {
    DomainBox box;
    const auto grow = [&](const std::vector<Vec>& pts) {
        for (const auto& x : pts) {
            if (box.lo.empty()) {
                box.lo = x;
                box.hi = x;
                continue;
            }
            for (std::size_t d = 0; d < x.size(); ++d) {
                box.lo[d] = std::min(box.lo[d], x[d]);
                box.hi[d] = std::max(box.hi[d], x[d]);
            }
        }
    };
    grow(bundle.z_safe);
    grow(bundle.z_unsafe);
    if (box.lo.empty()) throw DataError("cannot build a domain box: no states");
    for (std::size_t d = 0; d < box.lo.size(); ++d) {
        box.lo[d] -= pad;
        box.hi[d] += pad;
    }
    return box;
}

Vec DomainBox::sample(Rng& rng) const {
    Vec x(lo.size());
    for (std::size_t d = 0; d < x.size(); ++d)
        x[d] = rng.uniform(lo[d], hi[d]);
    return x;
}

std::array<ConditionRecord, 3> check_lbar(const RffBarrier& bar,
                                          const SystemModel& sys,
                                          const DomainBox& box,
                                          const RobustnessConsts& consts,
                                          const VerifyConfig& vcfg, Rng& rng) {
    double est1 = 0.0, est2 = 0.0, est3 = 0.0;
    RffScratch ws;
    for (int s = 0; s < vcfg.lbar_pairs; ++s) {
        const Vec x1 = box.sample(rng);
        const Vec x2 = box.sample(rng);
        Vec diff(x1.size());
        for (std::size_t d = 0; d < x1.size(); ++d) diff[d] = x1[d] - x2[d];
        const double dist = norm2(diff);
        if (dist < 1e-12) continue;
        const double t =
            sys.time_invariant ? 0.0 : rng.uniform(0.0, vcfg.bndq_horizon);
        const BTerms bt1 = compute_b_terms(bar, x1, t, sys, ws);
        const BTerms bt2 = compute_b_terms(bar, x2, t, sys, ws);
        est1 = std::max(est1, std::fabs(bt1.b1 - bt2.b1) / dist);
        Vec db2(bt1.b2.size());
        for (std::size_t d = 0; d < db2.size(); ++d)
            db2[d] = bt1.b2[d] - bt2.b2[d];
        est2 = std::max(est2, norm2(db2) / dist);
        est3 = std::max(est3, std::fabs(bt1.b3 - bt2.b3) / dist);
    }
    est1 *= vcfg.inflation;
    est2 *= vcfg.inflation;
    est3 *= vcfg.inflation;

    const auto make = [](const char* name, double lbar,
                         double est) {
        ConditionRecord rec;
        rec.name = name;
        rec.threshold = lbar;  // declared constant must dominate the estimate
        rec.value = est;
        rec.margin = lbar - est;
        rec.pass = lbar >= est;
        return rec;
    };
    return {make("lbar1", consts.lbar1, est1), make("lbar2", consts.lbar2, est2),
            make("lbar3", consts.lbar3, est3)};
}

VerificationReport verify(const RffBarrier& bar, const DatasetBundle& bundle,
                          const SystemModel& sys, const MeasurementModel& meas,
                          const RobustnessConsts& consts,
                          const TrainConfig& tcfg, const VerifyConfig& vcfg) {
    VerificationReport rep;
    rep.inflation = vcfg.inflation;
    rep.bounds.w_spectral = w_spectral_norm(bar);
    rep.bounds.lip_h = rff_lip_h_bound(bar);
    rep.bounds.lip_grad_h = rff_lip_grad_h_bound(bar);

    rep.cond_unsafe = check_prop1(rep.bounds, bundle, tcfg.gamma_unsafe);
    rep.cond_safe = check_prop2(rep.bounds, bundle, tcfg.gamma_safe);

    // Prop. 3 over a deterministic demo subset (stride-sampled when capped).
    const std::size_t n_dyn = bundle.z_dyn.size();
    std::size_t stride = 1;
    if (vcfg.max_demos > 0 &&
        n_dyn > static_cast<std::size_t>(vcfg.max_demos))
        stride = n_dyn / static_cast<std::size_t>(vcfg.max_demos);
    ConditionRecord dyn;
    dyn.name = "dyn-margin";
    dyn.value = bundle.eps_bar;
    dyn.threshold = kInf;
    dyn.pass = true;
    Rng root(vcfg.seed);
    std::size_t checked = 0;
    for (std::size_t j = 0; j < n_dyn; j += stride) {
        Rng rng = root.fork(j);
        const DemoRecord& demo = bundle.z_dyn[j];
        const double bnd =
            sys.time_invariant
                ? 0.0
                : estimate_bnd_q(bar, sys, meas, consts, demo, bundle.eps_bar,
                                 vcfg.bndq_samples, vcfg.bndq_horizon,
                                 vcfg.inflation, rng);
        const double lipq =
            empirical_lip_q(bar, sys, meas, consts, demo, bundle.eps_bar,
                            vcfg.lip_pairs, vcfg.inflation, rng);
        rep.bounds.empirical_lip_q = std::max(rep.bounds.empirical_lip_q, lipq);
        rep.bounds.bnd_q = std::max(rep.bounds.bnd_q, bnd);
        const double num = tcfg.gamma_dyn - bnd;
        double thr;
        if (num <= 0.0)
            thr = -kInf;  // gamma_dyn exhausted by the time-variation bound
        else
            thr = lipq > 0.0 ? num / lipq : kInf;
        if (thr < dyn.threshold) dyn.threshold = thr;
        ++checked;
    }
    dyn.margin = dyn.threshold - dyn.value;
    dyn.pass = checked > 0 && dyn.value <= dyn.threshold;
    rep.cond_dyn = dyn;
    rep.demos_checked = checked;

    double dx_bar = 0.0;
    for (const auto& rec : bundle.z_dyn)
        dx_bar = std::max(dx_bar, meas.delta_x(rec.y));
    const DomainBox box =
        DomainBox::around(bundle, bundle.eps + 2.0 * dx_bar);
    Rng lbar_rng = root.fork(1u << 20);
    rep.lbar_checks = check_lbar(bar, sys, box, consts, vcfg, lbar_rng);

    rep.overall = rep.cond_unsafe.pass && rep.cond_safe.pass &&
                  rep.cond_dyn.pass && rep.lbar_checks[0].pass &&
                  rep.lbar_checks[1].pass && rep.lbar_checks[2].pass;
    return rep;
}

namespace {

void print_record(std::FILE* f, const ConditionRecord& rec, bool last) {
    std::fprintf(f,
                 "    {\"name\": \"%s\", \"threshold\": %.17g, \"value\": "
                 "%.17g, \"margin\": %.17g, \"pass\": %s}%s\n",
                 rec.name.c_str(), sanitize(rec.threshold), sanitize(rec.value),
                 sanitize(rec.margin), rec.pass ? "true" : "false",
                 last ? "" : ",");
}

}  // namespace

void save_verification_report(const VerificationReport& rep,
                              const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write verification report: " + path);
    std::fprintf(f, "{\n  \"overall\": %s,\n", rep.overall ? "true" : "false");
    std::fprintf(f, "  \"demos_checked\": %zu,\n", rep.demos_checked);
    std::fprintf(f, "  \"inflation\": %.17g,\n", rep.inflation);
    std::fprintf(f,
                 "  \"bounds\": {\"lip_h\": %.17g, \"lip_grad_h\": %.17g, "
                 "\"w_spectral\": %.17g, \"empirical_lip_q\": %.17g, "
                 "\"bnd_q\": %.17g},\n",
                 sanitize(rep.bounds.lip_h), sanitize(rep.bounds.lip_grad_h),
                 sanitize(rep.bounds.w_spectral),
                 sanitize(rep.bounds.empirical_lip_q),
                 sanitize(rep.bounds.bnd_q));
    std::fprintf(f, "  \"conditions\": [\n");
    print_record(f, rep.cond_unsafe, false);
    print_record(f, rep.cond_safe, false);
    print_record(f, rep.cond_dyn, false);
    print_record(f, rep.lbar_checks[0], false);
    print_record(f, rep.lbar_checks[1], false);
    print_record(f, rep.lbar_checks[2], true);
    std::fprintf(f, "  ]\n}\n");
    std::fclose(f);
}

void print_verification_table(const VerificationReport& rep) {
    std::printf("%-14s %14s %14s %14s  %s\n", "condition", "threshold",
                "value", "margin", "result");
    const auto row = [](const ConditionRecord& rec) {
        std::printf("%-14s %14.6g %14.6g %14.6g  %s\n", rec.name.c_str(),
                    rec.threshold, rec.value, rec.margin,
                    rec.pass ? "pass" : "FAIL");
    };
    row(rep.cond_unsafe);
    row(rep.cond_safe);
    row(rep.cond_dyn);
    for (const auto& rec : rep.lbar_checks) row(rec);
    std::printf("overall: %s (demos checked: %zu, inflation %.2f)\n",
                rep.overall ? "PASS" : "FAIL", rep.demos_checked,
                rep.inflation);
}

}  // namespace rocbf
