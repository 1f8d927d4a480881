#pragma once
// Dataset construction: projection of demonstrations into the state domain,
// boundary point detection by reverse k-nearest neighbors, the buffered safe
// subset, and the covering-radius estimates feeding the validity conditions.

#include <cstdint>
#include <string>
#include <vector>

#include "rocbf/config.hpp"
#include "rocbf/linalg.hpp"
#include "rocbf/model.hpp"
#include "rocbf/rng.hpp"

namespace rocbf {

struct DemoRecord {
    double t = 0.0;
    Vec u;
    Vec y;
};

struct BpdConfig {
    std::size_t k = 200;
    // When use_fraction is set, eta is chosen as the smallest integer for
    // which at least `fraction` of the points are flagged.
    bool use_fraction = true;
    double fraction = 0.40;
    double eta = 0.0;
};

struct BpdResult {
    std::vector<char> mask;  // 1 = boundary point
    std::vector<std::uint32_t> rknn;
    double eta_used = 0.0;
};

struct DatasetBundle {
    std::vector<DemoRecord> z_dyn;
    std::vector<Vec> z_safe;           // post-BPD interior points
    std::vector<Vec> z_unsafe;         // boundary points (+ augmentation)
    std::vector<Vec> z_safe_buffered;  // buffered subset of z_safe
    double eps = 0.0;
    double eps_n = 0.0;
    double sigma_layer = 0.0;
    double eps_bar = 0.0;
};

std::vector<Vec> project_safe(const std::vector<DemoRecord>& demos,
                              const MeasurementModel& meas);

// k nearest neighbors of each point. A point is not its own neighbor;
// distance ties break by ascending point index.
std::vector<std::vector<std::uint32_t>> knn_indices(
    const std::vector<Vec>& pts, std::size_t k);

BpdResult boundary_point_detection(const std::vector<Vec>& pts,
                                   const BpdConfig& cfg);

// Densify the as-unsafe set: for each flagged point, `copies` jittered
// copies displaced outward along the mean offset from its k neighbors,
// magnitude uniform in (0, sigma_layer].
std::vector<Vec> augment_unsafe(
    const std::vector<Vec>& pts,
    const std::vector<std::vector<std::uint32_t>>& knn,
    const std::vector<char>& mask, int copies, double sigma_layer, Rng& rng);

// Keep safe points whose distance to the unsafe set is at least
// (gamma_safe + gamma_unsafe) / l_h.
std::vector<Vec> build_buffered_safe(const std::vector<Vec>& safe,
                                     const std::vector<Vec>& unsafe,
                                     double gamma_safe, double gamma_unsafe,
                                     double l_h);

// Covering-radius proxy: max over points of the nearest-other-point
// distance. The mean variant is informational.
double estimate_eps(const std::vector<Vec>& pts);
double estimate_eps_mean(const std::vector<Vec>& pts);

// eps_bar = lip_y_bound * (eps + sup of Delta_X over the demo outputs).
double compute_eps_bar(double eps, const MeasurementModel& meas,
                       const std::vector<DemoRecord>& demos);

// Alg. 1 lines 3-6 plus the radius estimates, driven by config.
DatasetBundle build_bundle(const std::vector<DemoRecord>& demos,
                           const MeasurementModel& meas, const Config& cfg);

void save_demos(const std::vector<DemoRecord>& demos, const std::string& path);
std::vector<DemoRecord> load_demos(const std::string& path);

void save_bundle(const DatasetBundle& b, const std::string& path);
DatasetBundle load_bundle(const std::string& path);

}  // namespace rocbf
