#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rocbf/pipeline.hpp"

using namespace rocbf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small, fast configuration for end-to-end plumbing tests.
Config tiny_config() {
    Config cfg = Config::defaults();
    cfg.set("collect.n_rollouts", "4");
    cfg.set("collect.horizon", "6.0");
    cfg.set("datasets.stride", "3");
    cfg.set("datasets.k", "40");
    cfg.set("barrier.ell", "64");
    cfg.set("train.max_iters", "600");
    cfg.set("train.stop_window", "100");
    cfg.set("verify.max_demos", "8");
    cfg.set("verify.lip_pairs", "500");
    cfg.set("verify.lbar_pairs", "500");
    cfg.set("compare.n_ce", "2");
    cfg.set("compare.n_theta", "2");
    cfg.set("rollout.horizon", "5.0");
    return cfg;
}

struct TmpDir {
    std::string path;
    explicit TmpDir(const std::string& name) : path("tmp_" + name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("sections, comments, overrides") {
        const Config cfg = Config::from_string(
            "# comment\n"
            "[train]\n"
            "gamma_safe = 0.07  ; trailing comment\n"
            "\n"
            "[barrier]\n"
            "ell = 128\n");
        CHECK(cfg.get_double("train.gamma_safe") == 0.07);
        CHECK(cfg.get_int("barrier.ell") == 128);
        // untouched keys keep their defaults
        CHECK(cfg.get_double("train.gamma_unsafe") == 0.05);
    }
    SUBCASE("malformed lines raise ConfigError") {
        CHECK_THROWS_AS(Config::from_string("[train\nx=1\n"), ConfigError);
        CHECK_THROWS_AS(Config::from_string("justakey\n"), ConfigError);
        CHECK_THROWS_AS(Config::from_file("no_such_file.ini"), ConfigError);
    }
    SUBCASE("typed getters validate") {
        Config cfg = Config::defaults();
        cfg.set("train.step", "abc");
        CHECK_THROWS_AS(cfg.get_double("train.step"), ConfigError);
        CHECK_THROWS_AS(cfg.get_double("no.such.key"), ConfigError);
        cfg.set("pipeline.require_verification", "maybe");
        CHECK_THROWS_AS(cfg.get_bool("pipeline.require_verification"),
                        ConfigError);
    }
    SUBCASE("hash is stable and sensitive") {
        const Config a = Config::defaults();
        Config b = Config::defaults();
        CHECK(a.hash() == b.hash());
        b.set("train.seed", "4");
        CHECK(a.hash() != b.hash());
    }
    SUBCASE("defaults cover every consumer") {
        const Config cfg = Config::defaults();
        CHECK_NOTHROW(VehicleParams::from_config(cfg));
        CHECK_NOTHROW(TrainConfig::from_config(cfg));
        CHECK_NOTHROW(VerifyConfig::from_config(cfg));
        CHECK_NOTHROW(RolloutConfig::from_config(cfg));
        CHECK_NOTHROW(measurement_from_config(cfg));
        CHECK_NOTHROW(system_from_config(cfg, 0.02));
        CHECK_NOTHROW(track_from_config(cfg));
    }
}

TEST_CASE("stage plumbing end to end") {
    const Config cfg = tiny_config();
    TmpDir dir("pipeline");
    const StagePaths paths = StagePaths::in(dir.path);

    run_collect(cfg, dir.path);
    REQUIRE(fs::exists(paths.demos));
    {
        // 4 rollouts x 6 s / 0.02 s = 1200 records (all rollouts accepted
        // under the defaults) -> 1 header line + 1200 rows.
        std::ifstream in(paths.demos);
        int lines = 0;
        std::string line;
        while (std::getline(in, line)) ++lines;
        CHECK(lines == 1 + 4 * 300);
    }

    SUBCASE("collect is deterministic byte for byte") {
        const std::string first = slurp(paths.demos);
        run_collect(cfg, dir.path);
        CHECK(slurp(paths.demos) == first);
    }

    run_datasets(cfg, dir.path);
    REQUIRE(fs::exists(paths.bundle));
    const DatasetBundle bundle = load_bundle(paths.bundle);
    CHECK(bundle.z_dyn.size() == 400);  // stride 3
    CHECK(!bundle.z_unsafe.empty());
    CHECK(!bundle.z_safe_buffered.empty());
    CHECK(bundle.eps > 0.0);

    run_train(cfg, dir.path);
    REQUIRE(fs::exists(paths.barrier));
    REQUIRE(fs::exists(paths.train_report));
    REQUIRE(fs::exists(paths.loss_trace));

    const VerificationReport vrep = run_verify(cfg, dir.path);
    REQUIRE(fs::exists(paths.verify_report));
    CHECK(vrep.overall == (vrep.cond_unsafe.pass && vrep.cond_safe.pass &&
                           vrep.cond_dyn.pass && vrep.lbar_checks[0].pass &&
                           vrep.lbar_checks[1].pass &&
                           vrep.lbar_checks[2].pass));

    SUBCASE("verification rerun reproduces the report byte for byte") {
        const std::string first = slurp(paths.verify_report);
        run_verify(cfg, dir.path);
        CHECK(slurp(paths.verify_report) == first);
    }

    SUBCASE("rollout and compare artifacts") {
        const RolloutTrace tr =
            run_rollout(cfg, dir.path, "rocbf", 0.2, 0.0, "trace_rocbf.txt");
        CHECK(fs::exists(dir.path + "/trace_rocbf.txt"));
        CHECK(tr.steps.size() == 250);
        run_compare(cfg, dir.path);
        std::ifstream in(paths.compare_grid);
        int lines = 0;
        std::string line;
        while (std::getline(in, line)) ++lines;
        CHECK(lines == 1 + 4);  // header + 2x2 grid
    }

    SUBCASE("manifest lists only existing artifacts") {
        REQUIRE(fs::exists(paths.manifest));
        const std::string manifest = slurp(paths.manifest);
        CHECK(manifest.find("config_hash") != std::string::npos);
        CHECK(manifest.find(paths.demos) != std::string::npos);
        CHECK(manifest.find(paths.bundle) != std::string::npos);
    }
}

TEST_CASE("pipeline gates") {
    TmpDir dir("gates");
    SUBCASE("unsatisfiable margin trips the violation gate") {
        Config cfg = tiny_config();
        cfg.set("train.gamma_dyn", "10.0");
        cfg.set("train.max_iters", "300");
        const PipelineOutcome out = run_pipeline(cfg, dir.path);
        CHECK(out.exit_code == kConstraintViolations);
        CHECK(out.message.find("(opt_3)") != std::string::npos);
    }
    SUBCASE("config errors surface before any stage runs") {
        Config cfg = tiny_config();
        cfg.set("train.gamma_safe", "-1");
        CHECK_THROWS_AS(run_pipeline(cfg, dir.path), ConfigError);
    }
}
