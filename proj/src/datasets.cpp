#include "rocbf/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "parallel.hpp"
#include "rocbf/errors.hpp"
#include "rocbf/kernels.hpp"

namespace rocbf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dim-major copy of a point set for the sq_dists kernel.
struct Planar {
    std::size_t count = 0, dim = 0;
    Vec data;
};

Planar planarize(const std::vector<Vec>& pts) {
    Planar p;
    p.count = pts.size();
    if (pts.empty()) return p;
    p.dim = pts[0].size();
    p.data.resize(p.count * p.dim);
    for (std::size_t j = 0; j < p.count; ++j) {
        if (pts[j].size() != p.dim)
            throw std::invalid_argument("point dimensions are inconsistent");
        for (std::size_t d = 0; d < p.dim; ++d)
            p.data[d * p.count + j] = pts[j][d];
    }
    return p;
}

std::vector<std::vector<std::uint32_t>> knn_from_planar(
    const Planar& pl, const std::vector<Vec>& pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::vector<std::uint32_t>> result(n);
    detail::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Vec dist(n);
        std::vector<std::uint32_t> idx(n);
        for (std::size_t i = begin; i < end; ++i) {
            kernels::active().sq_dists(pl.data.data(), n, pl.dim,
                                       pts[i].data(), dist.data());
            dist[i] = kInf;  // a point is not its own neighbor
            std::iota(idx.begin(), idx.end(), 0u);
            const auto cmp = [&dist](std::uint32_t a, std::uint32_t b) {
                return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
            };
            std::nth_element(idx.begin(), idx.begin() + k, idx.end(), cmp);
            result[i].assign(idx.begin(), idx.begin() + k);
            std::sort(result[i].begin(), result[i].end());
        }
    });
    return result;
}

}  // namespace

std::vector<Vec> project_safe(const std::vector<DemoRecord>& demos,
                              const MeasurementModel& meas) {
    std::vector<Vec> out;
    out.reserve(demos.size());
    for (const auto& rec : demos) out.push_back(meas.xhat(rec.y));
    return out;
}

std::vector<std::vector<std::uint32_t>> knn_indices(
    const std::vector<Vec>& pts, std::size_t k) {
    if (k == 0) throw std::invalid_argument("k must be positive");
    if (pts.size() <= k)
        throw std::invalid_argument("k must be smaller than the point count");
    return knn_from_planar(planarize(pts), pts, k);
}

BpdResult boundary_point_detection(const std::vector<Vec>& pts,
                                   const BpdConfig& cfg) {
    const auto knn = knn_indices(pts, cfg.k);

    const std::size_t n = pts.size();
    BpdResult res;
    res.rknn.assign(n, 0);
    for (const auto& nbrs : knn)
        for (const std::uint32_t j : nbrs) ++res.rknn[j];

    double eta = cfg.eta;
    if (cfg.use_fraction) {
        if (cfg.fraction < 0.0 || cfg.fraction > 1.0)
            throw std::invalid_argument("boundary fraction must be in [0,1]");
        // Smallest integer threshold flagging at least the target fraction.
        const auto target = static_cast<std::size_t>(
            std::ceil(cfg.fraction * static_cast<double>(n)));
        std::vector<std::size_t> hist(n + 1, 0);
        for (const auto c : res.rknn) ++hist[c];
        std::size_t cum = 0;
        eta = static_cast<double>(n);
        for (std::size_t v = 0; v <= n; ++v) {
            cum += hist[v];
            if (cum >= target) {
                eta = static_cast<double>(v);
                break;
            }
        }
    }
    res.eta_used = eta;
    res.mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        res.mask[i] = static_cast<double>(res.rknn[i]) <= eta ? 1 : 0;
    return res;
}

std::vector<Vec> augment_unsafe(
    const std::vector<Vec>& pts,
    const std::vector<std::vector<std::uint32_t>>& knn,
    const std::vector<char>& mask, int copies, double sigma_layer, Rng& rng) {
    if (sigma_layer < 0.0)
        throw std::invalid_argument("sigma_layer must be nonnegative");
    std::vector<Vec> out;
    if (copies <= 0 || sigma_layer == 0.0) return out;
    const std::size_t dim = pts.empty() ? 0 : pts[0].size();
    Vec diff(dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!mask[i]) continue;
        // Local outward direction: offset of the point from its k-neighbor
        // centroid, compared against the neighborhood scale. Points whose
        // neighbors surround them have no outward direction and sire no
        // copies.
        Vec dir(dim, 0.0);
        double mean_dist = 0.0;
        for (const auto j : knn[i]) {
            for (std::size_t d = 0; d < dim; ++d) {
                dir[d] += pts[j][d];
                diff[d] = pts[j][d] - pts[i][d];
            }
            mean_dist += norm2(diff);
        }
        const double inv = 1.0 / static_cast<double>(knn[i].size());
        mean_dist *= inv;
        for (std::size_t d = 0; d < dim; ++d)
            dir[d] = pts[i][d] - dir[d] * inv;
        const double nrm = norm2(dir);
        if (nrm < 0.2 * mean_dist || nrm < 1e-12) continue;
        for (int c = 0; c < copies; ++c) {
            const double mag = sigma_layer * (1.0 - rng.uniform());  // (0, s]
            Vec p(dim);
            for (std::size_t d = 0; d < dim; ++d)
                p[d] = pts[i][d] + mag * dir[d] / nrm;
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<Vec> build_buffered_safe(const std::vector<Vec>& safe,
                                     const std::vector<Vec>& unsafe,
                                     double gamma_safe, double gamma_unsafe,
                                     double l_h) {
    if (l_h <= 0.0) throw std::invalid_argument("l_h must be positive");
    if (unsafe.empty()) return safe;
    const double thr = (gamma_safe + gamma_unsafe) / l_h;
    const double thr2 = thr * thr;
    const Planar pl = planarize(unsafe);

    std::vector<char> keep(safe.size(), 0);
    detail::parallel_for(safe.size(), [&](std::size_t begin, std::size_t end) {
        Vec dist(unsafe.size());
        for (std::size_t i = begin; i < end; ++i) {
            kernels::active().sq_dists(pl.data.data(), pl.count, pl.dim,
                                       safe[i].data(), dist.data());
            double dmin = kInf;
            for (const double d2 : dist) dmin = std::min(dmin, d2);
            keep[i] = dmin >= thr2 ? 1 : 0;
        }
    });
    std::vector<Vec> out;
    for (std::size_t i = 0; i < safe.size(); ++i)
        if (keep[i]) out.push_back(safe[i]);
    return out;
}

namespace {

double eps_estimate(const std::vector<Vec>& pts, bool mean) {
    if (pts.size() < 2)
        throw std::invalid_argument("need at least two points");
    const Planar pl = planarize(pts);
    const std::size_t n = pts.size();
    Vec nearest(n, kInf);
    detail::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Vec dist(n);
        for (std::size_t i = begin; i < end; ++i) {
            kernels::active().sq_dists(pl.data.data(), n, pl.dim,
                                       pts[i].data(), dist.data());
            dist[i] = kInf;
            double dmin = kInf;
            for (const double d2 : dist) dmin = std::min(dmin, d2);
            nearest[i] = std::sqrt(dmin);
        }
    });
    if (mean) {
        double acc = 0.0;
        for (const double d : nearest) acc += d;
        return acc / static_cast<double>(n);
    }
    double m = 0.0;
    for (const double d : nearest) m = std::max(m, d);
    return m;
}

}  // namespace

double estimate_eps(const std::vector<Vec>& pts) {
    return eps_estimate(pts, false);
}

double estimate_eps_mean(const std::vector<Vec>& pts) {
    return eps_estimate(pts, true);
}

double compute_eps_bar(double eps, const MeasurementModel& meas,
                       const std::vector<DemoRecord>& demos) {
    if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
    double dx_bar = 0.0;
    for (const auto& rec : demos)
        dx_bar = std::max(dx_bar, meas.delta_x(rec.y));
    return meas.lip_y_bound * (eps + dx_bar);
}

DatasetBundle build_bundle(const std::vector<DemoRecord>& demos,
                           const MeasurementModel& meas, const Config& cfg) {
    const auto stride = static_cast<std::size_t>(cfg.get_int("datasets.stride"));
    if (stride < 1) throw ConfigError("datasets.stride must be >= 1");

    DatasetBundle b;
    for (std::size_t i = 0; i < demos.size(); i += stride)
        b.z_dyn.push_back(demos[i]);
    if (b.z_dyn.empty()) throw DataError("no demonstrations after striding");

    const std::vector<Vec> z_all = project_safe(b.z_dyn, meas);

    BpdConfig bpd_cfg;
    bpd_cfg.k = static_cast<std::size_t>(cfg.get_int("datasets.k"));
    bpd_cfg.use_fraction = true;
    bpd_cfg.fraction = cfg.get_double("datasets.boundary_fraction");
    const auto knn = knn_indices(z_all, bpd_cfg.k);

    // Reuse the kNN lists for both the RkNN counts and the augmentation.
    BpdResult bpd;
    {
        const std::size_t n = z_all.size();
        bpd.rknn.assign(n, 0);
        for (const auto& nbrs : knn)
            for (const std::uint32_t j : nbrs) ++bpd.rknn[j];
        const auto target = static_cast<std::size_t>(
            std::ceil(bpd_cfg.fraction * static_cast<double>(n)));
        std::vector<std::size_t> hist(n + 1, 0);
        for (const auto c : bpd.rknn) ++hist[c];
        std::size_t cum = 0;
        bpd.eta_used = static_cast<double>(n);
        for (std::size_t v = 0; v <= n; ++v) {
            cum += hist[v];
            if (cum >= target) {
                bpd.eta_used = static_cast<double>(v);
                break;
            }
        }
        bpd.mask.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i)
            bpd.mask[i] =
                static_cast<double>(bpd.rknn[i]) <= bpd.eta_used ? 1 : 0;
    }

    for (std::size_t i = 0; i < z_all.size(); ++i)
        (bpd.mask[i] ? b.z_unsafe : b.z_safe).push_back(z_all[i]);

    b.sigma_layer = cfg.get_double("datasets.sigma_layer");
    Rng rng(static_cast<std::uint64_t>(cfg.get_int("datasets.seed")));
    auto extra = augment_unsafe(z_all, knn, bpd.mask,
                                static_cast<int>(cfg.get_int("datasets.augment_copies")),
                                b.sigma_layer, rng);
    for (auto& p : extra) b.z_unsafe.push_back(std::move(p));

    b.z_safe_buffered = build_buffered_safe(
        b.z_safe, b.z_unsafe, cfg.get_double("train.gamma_safe"),
        cfg.get_double("train.gamma_unsafe"), cfg.get_double("datasets.l_h"));

    const auto& eps_source =
        b.z_safe_buffered.size() >= 2 ? b.z_safe_buffered : b.z_safe;
    b.eps = estimate_eps(eps_source);
    b.eps_n = b.z_unsafe.size() >= 2 ? estimate_eps(b.z_unsafe) : 0.0;
    b.eps_bar = compute_eps_bar(b.eps, meas, b.z_dyn);
    return b;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void save_demos(const std::vector<DemoRecord>& demos, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write demo file: " + path);
    const std::size_t m = demos.empty() ? 0 : demos[0].u.size();
    const std::size_t p = demos.empty() ? 0 : demos[0].y.size();
    std::fprintf(f, "# rocbf-demos m=%zu p=%zu\n", m, p);
    for (const auto& rec : demos) {
        std::fprintf(f, "%.17g", rec.t);
        for (const double v : rec.u) std::fprintf(f, " %.17g", v);
        for (const double v : rec.y) std::fprintf(f, " %.17g", v);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

std::vector<DemoRecord> load_demos(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw DataError("cannot open demo file: " + path);
    std::size_t m = 0, p = 0;
    if (std::fscanf(f, "# rocbf-demos m=%zu p=%zu", &m, &p) != 2) {
        std::fclose(f);
        throw DataError("demo file " + path + ": bad header");
    }
    std::vector<DemoRecord> demos;
    while (true) {
        DemoRecord rec;
        if (std::fscanf(f, "%lg", &rec.t) != 1) break;
        rec.u.resize(m);
        rec.y.resize(p);
        bool ok = true;
        for (auto& v : rec.u) ok = ok && std::fscanf(f, "%lg", &v) == 1;
        for (auto& v : rec.y) ok = ok && std::fscanf(f, "%lg", &v) == 1;
        if (!ok) {
            std::fclose(f);
            throw DataError("demo file " + path + ": truncated record");
        }
        demos.push_back(std::move(rec));
    }
    std::fclose(f);
    return demos;
}

namespace {

void write_states(std::FILE* f, const char* name,
                  const std::vector<Vec>& pts) {
    const std::size_t dim = pts.empty() ? 0 : pts[0].size();
    std::fprintf(f, "%s %zu %zu\n", name, pts.size(), dim);
    for (const auto& x : pts) {
        for (std::size_t d = 0; d < dim; ++d)
            std::fprintf(f, "%s%.17g", d ? " " : "", x[d]);
        std::fprintf(f, "\n");
    }
}

std::vector<Vec> read_states(std::FILE* f, const char* name,
                             const std::string& path) {
    char tag[32];
    std::size_t count = 0, dim = 0;
    if (std::fscanf(f, "%31s %zu %zu", tag, &count, &dim) != 3 ||
        std::string(tag) != name)
        throw DataError("bundle file " + path + ": missing section " + name);
    std::vector<Vec> pts(count, Vec(dim));
    for (auto& x : pts)
        for (auto& v : x)
            if (std::fscanf(f, "%lg", &v) != 1)
                throw DataError("bundle file " + path + ": truncated section " +
                                name);
    return pts;
}

}  // namespace

void save_bundle(const DatasetBundle& b, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write bundle file: " + path);
    std::fprintf(f, "rocbf-bundle 1\n");
    std::fprintf(f, "eps %a\neps_n %a\nsigma_layer %a\neps_bar %a\n", b.eps,
                 b.eps_n, b.sigma_layer, b.eps_bar);
    const std::size_t m = b.z_dyn.empty() ? 0 : b.z_dyn[0].u.size();
    const std::size_t p = b.z_dyn.empty() ? 0 : b.z_dyn[0].y.size();
    std::fprintf(f, "demos %zu %zu %zu\n", b.z_dyn.size(), m, p);
    for (const auto& rec : b.z_dyn) {
        std::fprintf(f, "%.17g", rec.t);
        for (const double v : rec.u) std::fprintf(f, " %.17g", v);
        for (const double v : rec.y) std::fprintf(f, " %.17g", v);
        std::fprintf(f, "\n");
    }
    write_states(f, "safe", b.z_safe);
    write_states(f, "unsafe", b.z_unsafe);
    write_states(f, "buffered", b.z_safe_buffered);
    std::fclose(f);
}

DatasetBundle load_bundle(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw DataError("cannot open bundle file: " + path);
    auto guard = [&](bool ok, const char* what) {
        if (!ok) {
            std::fclose(f);
            throw DataError("bundle file " + path + ": " + what);
        }
    };
    char tag[32];
    int version = 0;
    guard(std::fscanf(f, "%31s %d", tag, &version) == 2 &&
              std::string(tag) == "rocbf-bundle" && version == 1,
          "bad header");
    DatasetBundle b;
    guard(std::fscanf(f, " eps %la eps_n %la sigma_layer %la eps_bar %la",
                      &b.eps, &b.eps_n, &b.sigma_layer, &b.eps_bar) == 4,
          "bad radii");
    std::size_t count = 0, m = 0, p = 0;
    guard(std::fscanf(f, " demos %zu %zu %zu", &count, &m, &p) == 3,
          "bad demos header");
    b.z_dyn.resize(count);
    for (auto& rec : b.z_dyn) {
        bool ok = std::fscanf(f, "%lg", &rec.t) == 1;
        rec.u.resize(m);
        rec.y.resize(p);
        for (auto& v : rec.u) ok = ok && std::fscanf(f, "%lg", &v) == 1;
        for (auto& v : rec.y) ok = ok && std::fscanf(f, "%lg", &v) == 1;
        guard(ok, "truncated demos");
    }
    try {
        b.z_safe = read_states(f, "safe", path);
        b.z_unsafe = read_states(f, "unsafe", path);
        b.z_safe_buffered = read_states(f, "buffered", path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return b;
}

}  // namespace rocbf
