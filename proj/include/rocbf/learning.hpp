#pragma once
// The unconstrained hinge relaxation of the barrier-learning problem and its
// first-order optimizer:
//
//   ||theta||^2 + lambda_s * sum [gamma_safe - h(x)]_+   over buffered safe
//              + lambda_u * sum [h(x) + gamma_unsafe]_+  over as-unsafe
//              + lambda_d * sum [gamma_dyn - q(u,y,t)]_+ over demonstrations
//
// With the linear class-K and the RFF class the problem is convex in theta.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rocbf/barrier.hpp"
#include "rocbf/config.hpp"
#include "rocbf/datasets.hpp"
#include "rocbf/errors.hpp"

namespace rocbf {

struct TrainConfig {
    double gamma_safe = 0.05;
    double gamma_unsafe = 0.05;
    double gamma_dyn = 0.01;
    double lambda_s = 100.0;
    double lambda_u = 100.0;
    double lambda_d = 100.0;
    std::string optimizer = "adam";  // "adam" | "gd"
    double step = 0.02;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    int max_iters = 20000;
    int batch = 0;  // 0 = full batch
    // "none" keeps the step fixed; "sqrt" decays it as 1/sqrt(1 + t/200),
    // the usual schedule for nonsmooth convex objectives.
    std::string step_decay = "none";
    std::uint64_t seed = 0;
    double stop_tol = 1e-10;
    int stop_window = 200;
    // Closed-form supremum over a unit input-norm ball; only valid when all
    // Delta terms vanish. Replaces <B2, u_i> with ||B2|| in the dyn family.
    bool sup_ball_mode = false;

    static TrainConfig from_config(const Config& cfg);
};

struct ConstraintCounts {
    std::size_t n_safe = 0, n_unsafe = 0, n_dyn = 0;
    std::size_t viol_safe = 0, viol_unsafe = 0, viol_dyn = 0;
    // Most negative margin per family; 0 when the family has no violation.
    double worst_safe = 0.0, worst_unsafe = 0.0, worst_dyn = 0.0;

    double frac_safe() const {
        return n_safe ? double(viol_safe) / double(n_safe) : 0.0;
    }
    double frac_unsafe() const {
        return n_unsafe ? double(viol_unsafe) / double(n_unsafe) : 0.0;
    }
    double frac_dyn() const {
        return n_dyn ? double(viol_dyn) / double(n_dyn) : 0.0;
    }
    double frac_max() const {
        double f = frac_safe();
        f = f > frac_unsafe() ? f : frac_unsafe();
        return f > frac_dyn() ? f : frac_dyn();
    }
};

struct TrainReport {
    double final_loss = 0.0;
    int iters = 0;
    double wall_seconds = 0.0;
    ConstraintCounts constraints;
    std::vector<double> loss_trace;  // full-batch loss per recorded iteration
};

double loss(const Vec& theta, const RffBarrier& bar_template,
            const DatasetBundle& bundle, const SystemModel& sys,
            const MeasurementModel& meas, const RobustnessConsts& consts,
            const TrainConfig& cfg);

Vec loss_subgradient(const Vec& theta, const RffBarrier& bar_template,
                     const DatasetBundle& bundle, const SystemModel& sys,
                     const MeasurementModel& meas,
                     const RobustnessConsts& consts, const TrainConfig& cfg);

// Runs the optimizer from bar_init (frozen W, b; theta as given). Throws
// TrainingDivergedError when the loss becomes non-finite or exceeds 1e12.
std::pair<RffBarrier, TrainReport> train(const DatasetBundle& bundle,
                                         const SystemModel& sys,
                                         const MeasurementModel& meas,
                                         const RffBarrier& bar_init,
                                         const RobustnessConsts& consts,
                                         const TrainConfig& cfg);

// Exact recount of the three constraint families for a trained barrier.
ConstraintCounts check_constraints(const RffBarrier& bar,
                                   const DatasetBundle& bundle,
                                   const SystemModel& sys,
                                   const MeasurementModel& meas,
                                   const RobustnessConsts& consts,
                                   const TrainConfig& cfg);

void save_train_report(const TrainReport& report, const std::string& path);
void save_loss_trace(const TrainReport& report, const std::string& path);

}  // namespace rocbf
