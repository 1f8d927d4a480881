#pragma once
// Stage orchestration shared by the CLI and the acceptance suite:
// collect -> datasets -> train -> verify -> rollout/compare, with artifact
// persistence and a run manifest.

#include <string>

#include "rocbf/config.hpp"
#include "rocbf/learning.hpp"
#include "rocbf/sim.hpp"
#include "rocbf/verification.hpp"

namespace rocbf {

inline constexpr const char* kToolVersion = "1.0.0";

// Exit codes, one per failure class.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kDataError = 3,
    kTrainingDiverged = 4,
    kVerificationFailed = 5,
    kSimulationDiverged = 6,
    kConstraintViolations = 7,
};

struct StagePaths {
    std::string demos, bundle, barrier, train_report, loss_trace,
        verify_report, manifest, compare_grid;
    static StagePaths in(const std::string& outdir);
};

struct PipelineOutcome {
    int exit_code = kOk;
    std::string message;
    ConstraintCounts constraints;
    bool verify_overall = false;
    bool fractions_ok = false;
};

Track track_from_config(const Config& cfg);
// Curvature the model folds into F_hat (the first segment's; the default
// track is a single constant-curvature loop).
double model_curvature(const Config& cfg);

void run_collect(const Config& cfg, const std::string& outdir);
void run_datasets(const Config& cfg, const std::string& outdir);
void run_train(const Config& cfg, const std::string& outdir);
VerificationReport run_verify(const Config& cfg, const std::string& outdir);
// Single rollout under the chosen controller; writes a trace file and
// returns it.
RolloutTrace run_rollout(const Config& cfg, const std::string& outdir,
                         const std::string& controller, double ce0,
                         double theta0, const std::string& trace_name);
void run_compare(const Config& cfg, const std::string& outdir);
PipelineOutcome run_pipeline(const Config& cfg, const std::string& outdir);

}  // namespace rocbf
