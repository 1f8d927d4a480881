#pragma once
// Analytic RFF Lipschitz/Hessian bounds, sampled Lipschitz estimation for q
// and the B_j terms, and the validity-condition checks that decide whether
// the learned function is a usable barrier.

#include <array>
#include <string>

#include "rocbf/barrier.hpp"
#include "rocbf/config.hpp"
#include "rocbf/datasets.hpp"
#include "rocbf/learning.hpp"
#include "rocbf/rng.hpp"

namespace rocbf {

struct LipschitzBounds {
    double lip_h = 0.0;       // sqrt(2/ell) ||W|| ||theta||_2
    double lip_grad_h = 0.0;  // sqrt(2/ell) ||theta||_inf ||W||^2
    double w_spectral = 0.0;
    double empirical_lip_q = 0.0;  // worst sampled Lip_q over checked demos
    double bnd_q = 0.0;            // time-variation bound; 0 if time-invariant
};

struct ConditionRecord {
    std::string name;
    double threshold = 0.0;  // largest admissible value
    double value = 0.0;
    double margin = 0.0;  // threshold - value
    bool pass = false;
};

struct VerificationReport {
    ConditionRecord cond_unsafe;  // eps_N < gamma_unsafe / Lip_h (strict)
    ConditionRecord cond_safe;    // eps <= gamma_safe / Lip_h
    ConditionRecord cond_dyn;     // worst demo: eps_bar <= (g_dyn-Bnd_q)/Lip_q
    std::array<ConditionRecord, 3> lbar_checks;
    bool overall = false;
    LipschitzBounds bounds;
    std::size_t demos_checked = 0;
    double inflation = 1.5;
};

struct VerifyConfig {
    int lip_pairs = 20000;   // sampled pairs per demo ball
    double inflation = 1.5;  // safety factor on sampled estimates
    int max_demos = 256;     // 0 = all demos
    int lbar_pairs = 20000;
    int bndq_samples = 2000;
    double bndq_horizon = 30.0;
    std::uint64_t seed = 17;

    static VerifyConfig from_config(const Config& cfg);
};

// Deterministic spectral-norm bound sqrt(2/ell)*||W||*||theta||_2; the
// spectral norm comes from power iteration.
double rff_lip_h_bound(const RffBarrier& bar);

// Hessian bound sqrt(2/ell)*||theta||_inf*||W||^2.
double rff_lip_grad_h_bound(const RffBarrier& bar);

// Probability-(1-delta) closed form from random-matrix concentration;
// display value only, the checks gate on the deterministic bound.
double rff_lip_h_bound_prob(const RffBarrier& bar, double delta);

// Sampled local Lipschitz estimate of q(u_i, . , t_i) over a radius ball
// around y_i, inflated by the declared safety factor.
double empirical_lip_q(const RffBarrier& bar, const SystemModel& sys,
                       const MeasurementModel& meas,
                       const RobustnessConsts& consts, const DemoRecord& demo,
                       double radius, int samples, double inflation, Rng& rng);

// Time-variation bound of q; zero for time-invariant systems, otherwise a
// sampled estimate over the configured horizon.
double estimate_bnd_q(const RffBarrier& bar, const SystemModel& sys,
                      const MeasurementModel& meas,
                      const RobustnessConsts& consts, const DemoRecord& demo,
                      double radius, int samples, double horizon,
                      double inflation, Rng& rng);

ConditionRecord check_prop1(const LipschitzBounds& bounds,
                            const DatasetBundle& bundle, double gamma_unsafe);
ConditionRecord check_prop2(const LipschitzBounds& bounds,
                            const DatasetBundle& bundle, double gamma_safe);

// Axis-aligned sampling box for the enlarged admissible domain.
struct DomainBox {
    Vec lo, hi;
    static DomainBox around(const DatasetBundle& bundle, double pad);
    Vec sample(Rng& rng) const;
};

std::array<ConditionRecord, 3> check_lbar(const RffBarrier& bar,
                                          const SystemModel& sys,
                                          const DomainBox& box,
                                          const RobustnessConsts& consts,
                                          const VerifyConfig& vcfg, Rng& rng);

VerificationReport verify(const RffBarrier& bar, const DatasetBundle& bundle,
                          const SystemModel& sys, const MeasurementModel& meas,
                          const RobustnessConsts& consts,
                          const TrainConfig& tcfg, const VerifyConfig& vcfg);

void save_verification_report(const VerificationReport& report,
                              const std::string& path);
void print_verification_table(const VerificationReport& report);

}  // namespace rocbf
