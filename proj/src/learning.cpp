#include "rocbf/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"
#include "rocbf/rng.hpp"

namespace rocbf {
namespace {

inline double hinge(double r) { return r > 0.0 ? r : 0.0; }

// Precomputed evaluator for the relaxed objective. The sample sites are
// fixed during training, so the trig front end runs once per point; each
// iteration only pays dot products against theta.
class RelaxedLoss {
  public:
    RelaxedLoss(const DatasetBundle& bundle, const SystemModel& sys,
                const MeasurementModel& meas, const RffBarrier& bar,
                const RobustnessConsts& consts, const TrainConfig& cfg)
        : bar_(bar), cfg_(cfg) {
        if (sys.n != bar.n)
            throw std::invalid_argument("system/barrier dimension mismatch");
        ell_ = bar.ell;
        n_ = bar.n;

        const auto fill_phi = [&](const std::vector<Vec>& pts, Vec& out) {
            out.resize(pts.size() * ell_);
            RffScratch ws;
            const double sc = bar.scale();
            for (std::size_t j = 0; j < pts.size(); ++j) {
                rff_trig(bar, pts[j], ws);
                double* dst = out.data() + j * ell_;
                for (std::size_t i = 0; i < ell_; ++i) dst[i] = sc * ws.c[i];
            }
        };
        fill_phi(bundle.z_safe_buffered, phi_safe_);
        fill_phi(bundle.z_unsafe, phi_unsafe_);
        n_safe_ = bundle.z_safe_buffered.size();
        n_unsafe_ = bundle.z_unsafe.size();

        n_dyn_ = bundle.z_dyn.size();
        phi_dyn_.resize(n_dyn_ * ell_);
        sin_dyn_.resize(n_dyn_ * ell_);
        lin_dyn_.resize(n_dyn_ * ell_);
        c1_.resize(n_dyn_);
        pen_.resize(n_dyn_);
        if (cfg.sup_ball_mode) ghat_dyn_.resize(n_dyn_);

        RffScratch ws;
        const double sc = bar.scale();
        Vec wc(ell_);
        for (std::size_t j = 0; j < n_dyn_; ++j) {
            const DemoRecord& rec = bundle.z_dyn[j];
            const Vec xh = meas.xhat(rec.y);
            const double t = rec.t;
            rff_trig(bar, xh, ws);
            double* phi = phi_dyn_.data() + j * ell_;
            double* sins = sin_dyn_.data() + j * ell_;
            for (std::size_t i = 0; i < ell_; ++i) {
                phi[i] = sc * ws.c[i];
                sins[i] = -sc * ws.s[i];  // common factor of the Dphi rows
            }

            const double un = norm2(rec.u);
            const double df = sys.delta_f(xh, t);
            const double dg = sys.delta_g(xh, t);
            const double dx = meas.delta_x(rec.y);
            if (cfg.sup_ball_mode && (df != 0.0 || dg != 0.0 || dx != 0.0))
                throw std::invalid_argument(
                    "sup_ball_mode requires all Delta terms to vanish");

            // c = F + G u (sup-ball mode drops the input term; the supremum
            // replaces it with ||B2||).
            Vec c = sys.fhat(xh, t);
            const Mat g = sys.ghat(xh, t);
            if (!cfg.sup_ball_mode) {
                const Vec gu = matvec(g, rec.u);
                for (std::size_t d = 0; d < n_; ++d) c[d] += gu[d];
            } else {
                ghat_dyn_[j] = g;
            }
            // lin_i = sin_i * <w_i, c>, so <grad h, c> = <theta, lin>.
            wc.assign(ell_, 0.0);
            const auto& ops = kernels::active();
            for (std::size_t d = 0; d < n_; ++d)
                ops.axpy(c[d], bar.col(d), wc.data(), ell_);
            double* lin = lin_dyn_.data() + j * ell_;
            for (std::size_t i = 0; i < ell_; ++i) lin[i] = sins[i] * wc[i];

            c1_[j] = df + dg * un;
            pen_[j] =
                (consts.lbar1 + (consts.lbar2 + consts.lbar3) * un) * dx;
        }
    }

    std::size_t n_safe() const { return n_safe_; }
    std::size_t n_unsafe() const { return n_unsafe_; }
    std::size_t n_dyn() const { return n_dyn_; }

    double safe_h(const Vec& theta, std::size_t j) const {
        return kernels::active().dot(phi_safe_.data() + j * ell_,
                                     theta.data(), ell_);
    }
    double unsafe_h(const Vec& theta, std::size_t j) const {
        return kernels::active().dot(phi_unsafe_.data() + j * ell_,
                                     theta.data(), ell_);
    }

    // q at demo j. When grad is non-null and the dyn hinge is active
    // (q < gamma_dyn), adds scale * dq/dtheta into grad.
    double dyn_q(const Vec& theta, std::size_t j, Vec* grad = nullptr,
                 double scale = 0.0) const {
        const auto& ops = kernels::active();
        const double* phi = phi_dyn_.data() + j * ell_;
        const double* sins = sin_dyn_.data() + j * ell_;
        const double* lin = lin_dyn_.data() + j * ell_;

        const double h = ops.dot(phi, theta.data(), ell_);
        const double lin_term = ops.dot(lin, theta.data(), ell_);

        // grad h = sum_i theta_i sin_i w_i, assembled column-wise.
        Vec t1(ell_);
        for (std::size_t i = 0; i < ell_; ++i) t1[i] = theta[i] * sins[i];
        Vec gh(n_);
        for (std::size_t d = 0; d < n_; ++d)
            gh[d] = ops.dot(bar_.col(d), t1.data(), ell_);
        const double gn = norm2(gh);

        double q = lin_term + bar_.alpha_slope * h - c1_[j] * gn - pen_[j];

        Vec b2;
        double b2n = 0.0;
        if (cfg_.sup_ball_mode) {
            b2 = matvec_t(ghat_dyn_[j], gh);
            b2n = norm2(b2);
            q += b2n;
        }

        if (grad && q < cfg_.gamma_dyn) {
            // dq_i = lin_i + a*phi_i - c1 * sin_i <w_i, gh/||gh||>
            //        (+ sin_i <w_i, G b2/||b2||> in sup-ball mode)
            Vec dir(n_, 0.0);
            bool have_dir = false;
            if (c1_[j] != 0.0 && gn > 0.0) {
                for (std::size_t d = 0; d < n_; ++d)
                    dir[d] -= (c1_[j] / gn) * gh[d];
                have_dir = true;
            }
            if (cfg_.sup_ball_mode && b2n > 0.0) {
                Vec b2u = b2;
                for (auto& v : b2u) v /= b2n;
                const Vec gb2 = matvec(ghat_dyn_[j], b2u);
                for (std::size_t d = 0; d < n_; ++d) dir[d] += gb2[d];
                have_dir = true;
            }
            Vec wd;
            if (have_dir) {
                wd.assign(ell_, 0.0);
                for (std::size_t d = 0; d < n_; ++d)
                    ops.axpy(dir[d], bar_.col(d), wd.data(), ell_);
            }
            const double a = bar_.alpha_slope;
            for (std::size_t i = 0; i < ell_; ++i) {
                double dq = lin[i] + a * phi[i];
                if (have_dir) dq += sins[i] * wd[i];
                (*grad)[i] += scale * dq;
            }
        }
        return q;
    }

    // Full-batch objective; when grad is non-null it receives a subgradient.
    double value(const Vec& theta, Vec* grad) const {
        if (theta.size() != ell_)
            throw std::invalid_argument("theta length mismatch");
        if (grad) {
            grad->assign(ell_, 0.0);
            for (std::size_t i = 0; i < ell_; ++i)
                (*grad)[i] = 2.0 * theta[i];
        }
        double total = dot(theta, theta);

        const auto& ops = kernels::active();
        for (std::size_t j = 0; j < n_safe_; ++j) {
            const double r = cfg_.gamma_safe - safe_h(theta, j);
            if (r > 0.0) {
                total += cfg_.lambda_s * r;
                if (grad)
                    ops.axpy(-cfg_.lambda_s, phi_safe_.data() + j * ell_,
                             grad->data(), ell_);
            }
        }
        for (std::size_t j = 0; j < n_unsafe_; ++j) {
            const double r = unsafe_h(theta, j) + cfg_.gamma_unsafe;
            if (r > 0.0) {
                total += cfg_.lambda_u * r;
                if (grad)
                    ops.axpy(cfg_.lambda_u, phi_unsafe_.data() + j * ell_,
                             grad->data(), ell_);
            }
        }
        for (std::size_t j = 0; j < n_dyn_; ++j) {
            const double q = dyn_q(theta, j, grad, -cfg_.lambda_d);
            const double r = cfg_.gamma_dyn - q;
            if (r > 0.0) total += cfg_.lambda_d * r;
        }
        return total;
    }

    // Minibatch variant: uniform with-replacement draws per family, scaled
    // to keep the expectation equal to the full objective.
    double value_minibatch(const Vec& theta, Vec* grad, int batch,
                           Rng& rng) const {
        if (grad) {
            grad->assign(ell_, 0.0);
            for (std::size_t i = 0; i < ell_; ++i)
                (*grad)[i] = 2.0 * theta[i];
        }
        double total = dot(theta, theta);
        const auto& ops = kernels::active();
        const auto nb = static_cast<std::size_t>(batch);

        if (n_safe_) {
            const double w =
                static_cast<double>(n_safe_) / static_cast<double>(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                const std::size_t j = rng.below(n_safe_);
                const double r = cfg_.gamma_safe - safe_h(theta, j);
                if (r > 0.0) {
                    total += w * cfg_.lambda_s * r;
                    if (grad)
                        ops.axpy(-w * cfg_.lambda_s,
                                 phi_safe_.data() + j * ell_, grad->data(),
                                 ell_);
                }
            }
        }
        if (n_unsafe_) {
            const double w =
                static_cast<double>(n_unsafe_) / static_cast<double>(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                const std::size_t j = rng.below(n_unsafe_);
                const double r = unsafe_h(theta, j) + cfg_.gamma_unsafe;
                if (r > 0.0) {
                    total += w * cfg_.lambda_u * r;
                    if (grad)
                        ops.axpy(w * cfg_.lambda_u,
                                 phi_unsafe_.data() + j * ell_, grad->data(),
                                 ell_);
                }
            }
        }
        if (n_dyn_) {
            const double w =
                static_cast<double>(n_dyn_) / static_cast<double>(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                const std::size_t j = rng.below(n_dyn_);
                const double q = dyn_q(theta, j, grad, -w * cfg_.lambda_d);
                const double r = cfg_.gamma_dyn - q;
                if (r > 0.0) total += w * cfg_.lambda_d * r;
            }
        }
        return total;
    }

  private:
    const RffBarrier& bar_;
    const TrainConfig& cfg_;
    std::size_t ell_ = 0, n_ = 0;
    std::size_t n_safe_ = 0, n_unsafe_ = 0, n_dyn_ = 0;
    Vec phi_safe_, phi_unsafe_;
    Vec phi_dyn_, sin_dyn_, lin_dyn_;
    Vec c1_, pen_;
    std::vector<Mat> ghat_dyn_;
};

}  // namespace

TrainConfig TrainConfig::from_config(const Config& cfg) {
    TrainConfig t;
    t.gamma_safe = cfg.get_double("train.gamma_safe");
    t.gamma_unsafe = cfg.get_double("train.gamma_unsafe");
    t.gamma_dyn = cfg.get_double("train.gamma_dyn");
    if (t.gamma_safe <= 0.0 || t.gamma_unsafe <= 0.0 || t.gamma_dyn <= 0.0)
        throw ConfigError("margins gamma_* must be positive");
    t.lambda_s = cfg.get_double("train.lambda_s");
    t.lambda_u = cfg.get_double("train.lambda_u");
    t.lambda_d = cfg.get_double("train.lambda_d");
    t.optimizer = cfg.get_string("train.optimizer");
    t.step = cfg.get_double("train.step");
    t.step_decay = cfg.get_string("train.step_decay");
    t.beta1 = cfg.get_double("train.beta1");
    t.beta2 = cfg.get_double("train.beta2");
    t.eps_adam = cfg.get_double("train.eps_adam");
    t.max_iters = static_cast<int>(cfg.get_int("train.max_iters"));
    t.batch = static_cast<int>(cfg.get_int("train.batch"));
    t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
    t.stop_tol = cfg.get_double("train.stop_tol");
    t.stop_window = static_cast<int>(cfg.get_int("train.stop_window"));
    t.sup_ball_mode = cfg.get_bool("train.sup_ball_mode");
    return t;
}

double loss(const Vec& theta, const RffBarrier& bar_template,
            const DatasetBundle& bundle, const SystemModel& sys,
            const MeasurementModel& meas, const RobustnessConsts& consts,
            const TrainConfig& cfg) {
    RelaxedLoss f(bundle, sys, meas, bar_template, consts, cfg);
    return f.value(theta, nullptr);
}

Vec loss_subgradient(const Vec& theta, const RffBarrier& bar_template,
                     const DatasetBundle& bundle, const SystemModel& sys,
                     const MeasurementModel& meas,
                     const RobustnessConsts& consts, const TrainConfig& cfg) {
    RelaxedLoss f(bundle, sys, meas, bar_template, consts, cfg);
    Vec g(theta.size());
    f.value(theta, &g);
    return g;
}

std::pair<RffBarrier, TrainReport> train(const DatasetBundle& bundle,
                                         const SystemModel& sys,
                                         const MeasurementModel& meas,
                                         const RffBarrier& bar_init,
                                         const RobustnessConsts& consts,
                                         const TrainConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    RelaxedLoss f(bundle, sys, meas, bar_init, consts, cfg);

    const std::size_t ell = bar_init.ell;
    Vec theta = bar_init.theta;
    Vec g(ell), m(ell, 0.0), v(ell, 0.0);
    Rng rng(cfg.seed);

    TrainReport report;
    report.loss_trace.reserve(static_cast<std::size_t>(cfg.max_iters));

    Vec last_finite = theta;
    double last_finite_loss = f.value(theta, nullptr);
    const bool adam = cfg.optimizer == "adam";
    if (!adam && cfg.optimizer != "gd")
        throw ConfigError("train.optimizer must be 'adam' or 'gd'");

    int it = 0;
    double b1t = 1.0, b2t = 1.0;
    double best_loss = last_finite_loss;
    int last_improve = 0;
    for (; it < cfg.max_iters; ++it) {
        double cur;
        if (cfg.batch > 0) {
            cur = f.value_minibatch(theta, &g, cfg.batch, rng);
            // Stopping and the trace use periodic full-batch evaluations.
            if (it % 50 == 0) cur = f.value(theta, nullptr);
        } else {
            cur = f.value(theta, &g);
        }

        if (!std::isfinite(cur) || cur > 1e12)
            throw TrainingDivergedError("training diverged", last_finite_loss,
                                        last_finite);
        last_finite = theta;
        last_finite_loss = cur;
        report.loss_trace.push_back(cur);

        double step = cfg.step;
        if (cfg.step_decay == "sqrt")
            step /= std::sqrt(1.0 + static_cast<double>(it) / 200.0);
        if (adam) {
            b1t *= cfg.beta1;
            b2t *= cfg.beta2;
            for (std::size_t i = 0; i < ell; ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double mh = m[i] / (1.0 - b1t);
                const double vh = v[i] / (1.0 - b2t);
                theta[i] -= step * mh / (std::sqrt(vh) + cfg.eps_adam);
            }
        } else {
            for (std::size_t i = 0; i < ell; ++i)
                theta[i] -= step * g[i];
        }

        // Patience rule: stop once the best loss has not improved by
        // stop_tol for stop_window consecutive iterations.
        if (cur < best_loss - cfg.stop_tol) {
            best_loss = cur;
            last_improve = it;
        }
        if (cfg.stop_window > 0 && it - last_improve >= cfg.stop_window) {
            ++it;
            break;
        }
    }

    RffBarrier bar = bar_init;
    bar.theta = std::move(theta);
    report.iters = it;
    report.final_loss = f.value(bar.theta, nullptr);
    report.constraints = check_constraints(bar, bundle, sys, meas, consts, cfg);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return {std::move(bar), std::move(report)};
}

ConstraintCounts check_constraints(const RffBarrier& bar,
                                   const DatasetBundle& bundle,
                                   const SystemModel& sys,
                                   const MeasurementModel& meas,
                                   const RobustnessConsts& consts,
                                   const TrainConfig& cfg) {
    ConstraintCounts out;
    out.n_safe = bundle.z_safe_buffered.size();
    out.n_unsafe = bundle.z_unsafe.size();
    out.n_dyn = bundle.z_dyn.size();

    for (const auto& x : bundle.z_safe_buffered) {
        const double margin = eval_h(bar, x) - cfg.gamma_safe;
        if (margin < 0.0) {
            ++out.viol_safe;
            out.worst_safe = std::min(out.worst_safe, margin);
        }
    }
    for (const auto& x : bundle.z_unsafe) {
        const double margin = -cfg.gamma_unsafe - eval_h(bar, x);
        if (margin < 0.0) {
            ++out.viol_unsafe;
            out.worst_unsafe = std::min(out.worst_unsafe, margin);
        }
    }
    RelaxedLoss f(bundle, sys, meas, bar, consts, cfg);
    for (std::size_t j = 0; j < out.n_dyn; ++j) {
        const double margin = f.dyn_q(bar.theta, j) - cfg.gamma_dyn;
        if (margin < 0.0) {
            ++out.viol_dyn;
            out.worst_dyn = std::min(out.worst_dyn, margin);
        }
    }
    return out;
}

void save_train_report(const TrainReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write train report: " + path);
    std::fprintf(f, "{\n");
    std::fprintf(f, "  \"final_loss\": %.17g,\n", report.final_loss);
    std::fprintf(f, "  \"iters\": %d,\n", report.iters);
    std::fprintf(f, "  \"wall_seconds\": %.3f,\n", report.wall_seconds);
    const auto& c = report.constraints;
    std::fprintf(f, "  \"n_safe\": %zu, \"viol_safe\": %zu, \"worst_safe\": %.17g,\n",
                 c.n_safe, c.viol_safe, c.worst_safe);
    std::fprintf(f,
                 "  \"n_unsafe\": %zu, \"viol_unsafe\": %zu, \"worst_unsafe\": %.17g,\n",
                 c.n_unsafe, c.viol_unsafe, c.worst_unsafe);
    std::fprintf(f, "  \"n_dyn\": %zu, \"viol_dyn\": %zu, \"worst_dyn\": %.17g,\n",
                 c.n_dyn, c.viol_dyn, c.worst_dyn);
    std::fprintf(f, "  \"viol_frac_max\": %.17g\n", c.frac_max());
    std::fprintf(f, "}\n");
    std::fclose(f);
}

void save_loss_trace(const TrainReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write loss trace: " + path);
    std::fprintf(f, "# iter loss\n");
    for (std::size_t i = 0; i < report.loss_trace.size(); ++i)
        std::fprintf(f, "%zu %.17g\n", i, report.loss_trace[i]);
    std::fclose(f);
}

}  // namespace rocbf
