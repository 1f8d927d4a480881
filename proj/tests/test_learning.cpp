#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rocbf/learning.hpp"
#include "rocbf/rng.hpp"

using namespace rocbf;

namespace {

Vec random_state(Rng& rng, std::size_t n, double span = 1.5) {
    Vec x(n);
    for (auto& v : x) v = rng.uniform(-span, span);
    return x;
}

SystemModel affine_system(Rng& rng, std::size_t n, std::size_t m, double df,
                          double dg) {
    Mat a(n, n), g(n, m);
    Vec c(n);
    for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : g.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : c) v = rng.uniform(-1.0, 1.0);
    SystemModel sys;
    sys.n = n;
    sys.m = m;
    sys.fhat = [a, c](const Vec& x, double) {
        Vec f = matvec(a, x);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += c[i];
        return f;
    };
    sys.ghat = [g](const Vec&, double) { return g; };
    sys.delta_f = [df](const Vec&, double) { return df; };
    sys.delta_g = [dg](const Vec&, double) { return dg; };
    return sys;
}

struct Fixture {
    RffBarrier bar;
    SystemModel sys;
    MeasurementModel meas;
    RobustnessConsts consts{1.0, 0.5, 0.5};
    DatasetBundle bundle;
    TrainConfig cfg;
};

// Small random lane-shaped instance (n=4, synthetic measurements).
Fixture small_instance(std::uint64_t seed, std::size_t ell = 16) {
    Rng rng(seed);
    Fixture f;
    f.bar = RffBarrier::sample(4, ell, 0.8, 1.0, rng.next_u64());
    for (auto& t : f.bar.theta) t = rng.uniform(-0.5, 0.5);
    f.sys = affine_system(rng, 4, 1, 0.1, 0.1);
    f.meas = make_synthetic_measurement(0.1, 0.1, 2.7);
    for (int i = 0; i < 5; ++i)
        f.bundle.z_safe_buffered.push_back(random_state(rng, 4));
    for (int i = 0; i < 4; ++i)
        f.bundle.z_unsafe.push_back(random_state(rng, 4));
    for (int i = 0; i < 6; ++i)
        f.bundle.z_dyn.push_back({0.1 * i,
                                  {rng.uniform(-0.5, 0.5)},
                                  f.meas.y_true(random_state(rng, 4))});
    f.cfg.lambda_s = 10.0;
    f.cfg.lambda_u = 10.0;
    f.cfg.lambda_d = 10.0;
    return f;
}

// Straight-line evaluation of the relaxed objective, formula as written.
double reference_loss(const Fixture& f, const Vec& theta) {
    RffBarrier bar = f.bar;
    bar.theta = theta;
    double total = 0.0;
    for (const double t : theta) total += t * t;
    for (const auto& x : f.bundle.z_safe_buffered)
        total += f.cfg.lambda_s *
                 std::max(0.0, f.cfg.gamma_safe - eval_h(bar, x));
    for (const auto& x : f.bundle.z_unsafe)
        total += f.cfg.lambda_u *
                 std::max(0.0, eval_h(bar, x) + f.cfg.gamma_unsafe);
    for (const auto& rec : f.bundle.z_dyn)
        total += f.cfg.lambda_d *
                 std::max(0.0, f.cfg.gamma_dyn -
                                   eval_q(bar, rec.u, rec.y, rec.t, f.sys,
                                          f.meas, f.consts));
    return total;
}

// Distance of the instance from the nearest hinge kink or gradient kink;
// FD checks skip points closer than a tolerance.
double kink_distance(const Fixture& f, const Vec& theta) {
    RffBarrier bar = f.bar;
    bar.theta = theta;
    double dist = 1e300;
    for (const auto& x : f.bundle.z_safe_buffered)
        dist = std::min(dist, std::fabs(f.cfg.gamma_safe - eval_h(bar, x)));
    for (const auto& x : f.bundle.z_unsafe)
        dist = std::min(dist, std::fabs(eval_h(bar, x) + f.cfg.gamma_unsafe));
    for (const auto& rec : f.bundle.z_dyn) {
        dist = std::min(dist, std::fabs(f.cfg.gamma_dyn -
                                        eval_q(bar, rec.u, rec.y, rec.t, f.sys,
                                               f.meas, f.consts)));
        dist = std::min(dist, norm2(grad_h(bar, f.meas.xhat(rec.y))));
    }
    return dist;
}

}  // namespace

TEST_CASE("loss basics") {
    SUBCASE("empty datasets leave only the ridge") {
        Fixture f = small_instance(1);
        f.bundle.z_safe_buffered.clear();
        f.bundle.z_unsafe.clear();
        f.bundle.z_dyn.clear();
        Rng rng(2);
        const Vec theta = random_state(rng, f.bar.ell);
        CHECK(loss(theta, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg) ==
              doctest::Approx(dot(theta, theta)).epsilon(1e-14));
    }
    SUBCASE("zero weights pay the full margins") {
        Fixture f = small_instance(3);
        f.bundle.z_dyn.clear();  // dyn hinge at theta=0 depends on the system
        const Vec theta(f.bar.ell, 0.0);
        const double expect =
            f.cfg.lambda_s * f.cfg.gamma_safe * f.bundle.z_safe_buffered.size() +
            f.cfg.lambda_u * f.cfg.gamma_unsafe * f.bundle.z_unsafe.size();
        CHECK(loss(theta, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg) ==
              doctest::Approx(expect).epsilon(1e-13));
    }
    SUBCASE("matches the straight-line formula") {
        for (std::uint64_t seed = 10; seed < 20; ++seed) {
            Fixture f = small_instance(seed);
            Rng rng(seed * 7 + 1);
            const Vec theta = random_state(rng, f.bar.ell);
            const double a =
                loss(theta, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            const double b = reference_loss(f, theta);
            CHECK(a == doctest::Approx(b).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss subgradient") {
    SUBCASE("no active hinges gives exactly 2*theta") {
        Fixture f = small_instance(5);
        f.bundle.z_safe_buffered.clear();
        f.bundle.z_unsafe.clear();
        f.bundle.z_dyn.clear();
        Rng rng(6);
        const Vec theta = random_state(rng, f.bar.ell);
        const Vec g = loss_subgradient(theta, f.bar, f.bundle, f.sys, f.meas,
                                       f.consts, f.cfg);
        for (std::size_t i = 0; i < theta.size(); ++i)
            CHECK(g[i] == doctest::Approx(2.0 * theta[i]).epsilon(1e-14));
    }
    SUBCASE("theta=0 with only safe hinges active") {
        Fixture f = small_instance(7);
        f.bundle.z_unsafe.clear();
        f.bundle.z_dyn.clear();
        const Vec theta(f.bar.ell, 0.0);
        const Vec g = loss_subgradient(theta, f.bar, f.bundle, f.sys, f.meas,
                                       f.consts, f.cfg);
        Vec expect(f.bar.ell, 0.0);
        for (const auto& x : f.bundle.z_safe_buffered) {
            const Vec phi = features(f.bar, x);
            for (std::size_t i = 0; i < phi.size(); ++i)
                expect[i] -= f.cfg.lambda_s * phi[i];
        }
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(g[i] == doctest::Approx(expect[i])
                              .epsilon(1e-12)
                              .scale(std::max(1.0, std::fabs(expect[i]))));
    }
    SUBCASE("finite differences away from kinks") {
        int checked = 0;
        for (std::uint64_t seed = 30; seed < 90 && checked < 25; ++seed) {
            Fixture f = small_instance(seed, 12);
            Rng rng(seed + 1000);
            const Vec theta = random_state(rng, f.bar.ell, 0.8);
            if (kink_distance(f, theta) < 1e-3) continue;
            ++checked;
            const Vec g = loss_subgradient(theta, f.bar, f.bundle, f.sys,
                                           f.meas, f.consts, f.cfg);
            const Vec fd = oracles::central_diff(
                [&](const Vec& th) {
                    return loss(th, f.bar, f.bundle, f.sys, f.meas, f.consts,
                                f.cfg);
                },
                theta, 1e-7);
            for (std::size_t i = 0; i < g.size(); ++i)
                CHECK(g[i] == doctest::Approx(fd[i])
                                  .epsilon(1e-5)
                                  .scale(std::max(1.0, std::fabs(fd[i]))));
        }
        CHECK(checked >= 25);
    }
}

TEST_CASE("convexity of the relaxed objective") {
    Fixture f = small_instance(100);
    Rng rng(101);
    SUBCASE("midpoint inequality") {
        for (int rep = 0; rep < 100; ++rep) {
            const Vec a = random_state(rng, f.bar.ell);
            const Vec b = random_state(rng, f.bar.ell);
            Vec mid(a.size());
            for (std::size_t i = 0; i < a.size(); ++i)
                mid[i] = 0.5 * (a[i] + b[i]);
            const double la =
                loss(a, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            const double lb =
                loss(b, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            const double lm =
                loss(mid, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            CHECK(lm <= 0.5 * (la + lb) + 1e-9);
        }
    }
    SUBCASE("subgradient lower bound") {
        for (int rep = 0; rep < 100; ++rep) {
            const Vec a = random_state(rng, f.bar.ell);
            const Vec b = random_state(rng, f.bar.ell);
            const double la =
                loss(a, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            const double lb =
                loss(b, f.bar, f.bundle, f.sys, f.meas, f.consts, f.cfg);
            const Vec g = loss_subgradient(a, f.bar, f.bundle, f.sys, f.meas,
                                           f.consts, f.cfg);
            Vec diff(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];
            CHECK(lb >= la + dot(g, diff) - 1e-9);
        }
    }
}

TEST_CASE("training") {
    SUBCASE("pure ridge drives theta to zero") {
        Fixture f = small_instance(200);
        f.cfg.lambda_s = f.cfg.lambda_u = f.cfg.lambda_d = 0.0;
        f.cfg.max_iters = 3000;
        f.cfg.step = 0.05;
        auto [bar, report] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        CHECK(norm2(bar.theta) <= 1e-2);
        CHECK(report.final_loss <= 1e-4);
    }
    SUBCASE("1D toy: inward-pushing expert yields a sign-correct barrier") {
        // Single integrator xdot = u, exact 1D measurements.
        Fixture f;
        f.bar = RffBarrier::sample(1, 32, 1.0, 1.0, 17);
        SystemModel sys;
        sys.n = 1;
        sys.m = 1;
        sys.fhat = [](const Vec&, double) { return Vec{0.0}; };
        sys.ghat = [](const Vec&, double) {
            Mat g(1, 1);
            g.at(0, 0) = 1.0;
            return g;
        };
        sys.delta_f = [](const Vec&, double) { return 0.0; };
        sys.delta_g = [](const Vec&, double) { return 0.0; };
        f.sys = sys;
        f.meas = make_exact_measurement(1);
        for (double x = -0.5; x <= 0.5 + 1e-9; x += 0.1)
            f.bundle.z_safe_buffered.push_back({x});
        f.bundle.z_unsafe = {{-1.0}, {1.0}};
        for (double x = -0.8; x <= 0.8 + 1e-9; x += 0.1)
            f.bundle.z_dyn.push_back({0.0, {x >= 0 ? -0.6 : 0.6}, {x}});
        f.cfg.lambda_s = f.cfg.lambda_u = f.cfg.lambda_d = 100.0;
        f.cfg.step = 0.01;
        f.cfg.max_iters = 4000;
        auto [bar, report] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        for (const auto& x : f.bundle.z_safe_buffered)
            CHECK(eval_h(bar, x) > 0.0);
        for (const auto& x : f.bundle.z_unsafe) CHECK(eval_h(bar, x) < 0.0);
        CHECK(report.constraints.frac_max() <= 0.05);
    }
    SUBCASE("deterministic given the seed") {
        Fixture f = small_instance(202);
        f.cfg.max_iters = 200;
        auto [bar1, rep1] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        auto [bar2, rep2] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        REQUIRE(bar1.theta.size() == bar2.theta.size());
        for (std::size_t i = 0; i < bar1.theta.size(); ++i)
            CHECK(bar1.theta[i] == bar2.theta[i]);
        CHECK(rep1.final_loss == rep2.final_loss);
        CHECK(rep1.loss_trace == rep2.loss_trace);
    }
    SUBCASE("divergence raises with the last finite state") {
        Fixture f = small_instance(203);
        f.cfg.optimizer = "gd";
        f.cfg.step = 1e8;  // catastrophic step on a convex objective
        f.cfg.max_iters = 50;
        CHECK_THROWS_AS(train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg),
                        TrainingDivergedError);
    }
    SUBCASE("monotone descent on the smooth ridge with step <= 1/L") {
        Fixture f = small_instance(204);
        f.cfg.lambda_s = f.cfg.lambda_u = f.cfg.lambda_d = 0.0;
        f.cfg.optimizer = "gd";
        f.cfg.step = 0.5;  // loss = ||theta||^2 has smoothness L = 2
        f.cfg.max_iters = 200;
        f.cfg.stop_window = 0;
        auto [bar, report] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        for (std::size_t i = 1; i < report.loss_trace.size(); ++i)
            CHECK(report.loss_trace[i] <= report.loss_trace[i - 1] + 1e-12);
    }
    SUBCASE("monotone descent with hinges while no kink is crossed") {
        // Fixed-step subgradient descent is only a descent method between
        // hinge crossings; keep the step small enough that none occurs
        // inside the observation window.
        Fixture f = small_instance(204);
        f.cfg.optimizer = "gd";
        f.cfg.step = 1e-7;
        f.cfg.max_iters = 50;
        f.cfg.stop_window = 0;
        auto [bar, report] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        for (std::size_t i = 1; i < report.loss_trace.size(); ++i)
            CHECK(report.loss_trace[i] <= report.loss_trace[i - 1] + 1e-12);
        CHECK(report.loss_trace.back() < report.loss_trace.front());
    }
    SUBCASE("the trace minimum lives in the trailing window") {
        Fixture f = small_instance(205);
        f.cfg.max_iters = 1500;
        auto [bar, report] =
            train(f.bundle, f.sys, f.meas, f.bar, f.consts, f.cfg);
        const auto& tr = report.loss_trace;
        REQUIRE(tr.size() >= 50);
        const double tail_min = *std::min_element(tr.end() - 50, tr.end());
        const double global_min = *std::min_element(tr.begin(), tr.end());
        CHECK(tail_min <= global_min + 1e-9);
        CHECK(report.final_loss <= tr.front() + 1e-12);
    }
}

TEST_CASE("constraint recount") {
    SUBCASE("zero weights violate both margin families exactly") {
        Fixture f = small_instance(300);
        RffBarrier bar = f.bar;
        std::fill(bar.theta.begin(), bar.theta.end(), 0.0);
        const ConstraintCounts c = check_constraints(bar, f.bundle, f.sys,
                                                     f.meas, f.consts, f.cfg);
        CHECK(c.viol_safe == f.bundle.z_safe_buffered.size());
        CHECK(c.viol_unsafe == f.bundle.z_unsafe.size());
        CHECK(c.worst_safe == doctest::Approx(-f.cfg.gamma_safe));
        CHECK(c.worst_unsafe == doctest::Approx(-f.cfg.gamma_unsafe));
    }
    SUBCASE("hand-built separating barrier clears both margin families") {
        Fixture f = small_instance(301);
        f.bundle.z_safe_buffered = {{0, 0, 0, 0}, {0.1, 0, 0, 0}};
        f.bundle.z_unsafe = {{3, 3, 3, 3}};
        f.bundle.z_dyn.clear();
        // Two features: a pi/12-frequency cosine (safe points sit at phase
        // ~0, the unsafe point at phase pi) and an unused second feature.
        RffBarrier bar = RffBarrier::sample(4, 2, 1.0, 1.0, 5);
        const double w = 0.2617993877991494;  // pi/12
        bar.w_cols = {w, 0.0, w, 0.0, w, 0.0, w, 0.0};
        bar.phases = {0.0, 0.0};
        bar.theta = {0.5 / bar.scale(), 0.0};
        // h(safe) ~ +0.5, h(unsafe) = -0.5 by construction.
        REQUIRE(eval_h(bar, f.bundle.z_safe_buffered[0]) ==
                doctest::Approx(0.5).epsilon(1e-12));
        REQUIRE(eval_h(bar, f.bundle.z_unsafe[0]) ==
                doctest::Approx(-0.5).epsilon(1e-10));
        const ConstraintCounts c = check_constraints(bar, f.bundle, f.sys,
                                                     f.meas, f.consts, f.cfg);
        CHECK(c.viol_safe == 0);
        CHECK(c.viol_unsafe == 0);
    }
    SUBCASE("counts are permutation-invariant") {
        Fixture f = small_instance(302);
        const ConstraintCounts a = check_constraints(f.bar, f.bundle, f.sys,
                                                     f.meas, f.consts, f.cfg);
        Fixture g = small_instance(302);
        std::reverse(g.bundle.z_safe_buffered.begin(),
                     g.bundle.z_safe_buffered.end());
        std::reverse(g.bundle.z_unsafe.begin(), g.bundle.z_unsafe.end());
        std::reverse(g.bundle.z_dyn.begin(), g.bundle.z_dyn.end());
        const ConstraintCounts b = check_constraints(f.bar, g.bundle, g.sys,
                                                     g.meas, f.consts, f.cfg);
        CHECK(a.viol_safe == b.viol_safe);
        CHECK(a.viol_unsafe == b.viol_unsafe);
        CHECK(a.viol_dyn == b.viol_dyn);
    }
}

TEST_CASE("closed-form supremum mode") {
    Fixture f = small_instance(400);
    // Rebuild the instance without uncertainty (required by the mode).
    Rng rng(401);
    f.sys = affine_system(rng, 4, 1, 0.0, 0.0);
    f.meas = make_exact_measurement(4);
    for (auto& rec : f.bundle.z_dyn) rec.y.resize(4);
    f.cfg.sup_ball_mode = true;

    SUBCASE("dyn margin uses B1 + ||B2||") {
        const ConstraintCounts c = check_constraints(f.bar, f.bundle, f.sys,
                                                     f.meas, f.consts, f.cfg);
        std::size_t expect_viol = 0;
        double expect_worst = 0.0;
        for (const auto& rec : f.bundle.z_dyn) {
            const BTerms bt = compute_b_terms(f.bar, rec.y, rec.t, f.sys);
            const double margin = bt.b1 + norm2(bt.b2) - f.cfg.gamma_dyn;
            if (margin < 0.0) {
                ++expect_viol;
                expect_worst = std::min(expect_worst, margin);
            }
        }
        CHECK(c.viol_dyn == expect_viol);
        CHECK(c.worst_dyn == doctest::Approx(expect_worst).epsilon(1e-12));
    }
    SUBCASE("subgradient still passes finite differences") {
        Rng prng(402);
        const Vec theta = random_state(prng, f.bar.ell, 0.8);
        Fixture* fp = &f;
        const Vec g = loss_subgradient(theta, f.bar, f.bundle, f.sys, f.meas,
                                       f.consts, f.cfg);
        const Vec fd = oracles::central_diff(
            [fp](const Vec& th) {
                return loss(th, fp->bar, fp->bundle, fp->sys, fp->meas,
                            fp->consts, fp->cfg);
            },
            theta, 1e-7);
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(g[i] == doctest::Approx(fd[i])
                              .epsilon(1e-4)
                              .scale(std::max(1.0, std::fabs(fd[i]))));
    }
    SUBCASE("rejected when any uncertainty is present") {
        Fixture g = small_instance(402);
        g.cfg.sup_ball_mode = true;  // synthetic measurement has delta_x > 0
        CHECK_THROWS_AS(loss(g.bar.theta, g.bar, g.bundle, g.sys, g.meas,
                             g.consts, g.cfg),
                        std::invalid_argument);
    }
}
