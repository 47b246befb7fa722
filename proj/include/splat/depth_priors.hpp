#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "splat/image.hpp"
#include "splat/rng.hpp"
#include "splat/scene.hpp"
#include "splat/stereo.hpp"

namespace splat {

struct GaussianCloud;

enum class PriorSource { stereo_self, sfm_sparse, external_aligned };

// Per-view depth supervision target.
struct DepthPrior {
    Image depth;  // world units, > 0 where valid
    Mask valid;
    PriorSource source = PriorSource::stereo_self;
    int created_at = 0;
    double baseline_used = 0;  // stereo only
};

struct StereoPriorConfig {
    int depth_start_iter = 0;     // no prior is served before this step
    int refresh_interval = 100;   // cached entries expire after this many steps
    double baseline_min = 0;
    double baseline_max = 0;
    int d_max = 0;  // 0 selects width / 4
    int window = 9;
    int census_window = 7;
    double lr_tolerance = 1.0;
    double min_disparity = 0.5;  // floor before triangulation, caps depth
    Vec3 background;
};

// depth = fx * b / disparity on valid pixels; disparities below
// min_disparity are masked out (which also caps depth at fx*b/min_disparity).
DepthPrior depth_from_disparity(const DisparityMap& disparity, double fx, double baseline,
                                double min_disparity);

// Renders the view and its virtual right companion at the given baseline,
// matches them, and triangulates depth = fx * b / disparity. Pixels the
// matcher rejects or whose disparity falls below min_disparity are invalid.
// Throws empty_prior when the render has no opaque coverage at all.
DepthPrior stereo_prior(const GaussianCloud& cloud, const Camera& cam, double baseline, int iter,
                        const StereoPriorConfig& cfg);

// View-id keyed cache of stereo priors with a creation log for auditing the
// refresh schedule.
struct PriorCache {
    std::map<int, DepthPrior> entries;
    std::vector<std::pair<int, int>> creation_log;  // (view id, iteration)
};

// Serves the cached prior for a view, regenerating it with a freshly sampled
// baseline when the entry is missing or older than the refresh interval.
// Returns nullopt before the start step without touching the RNG.
std::optional<DepthPrior> get_prior(PriorCache& cache, int view_id, const GaussianCloud& cloud,
                                    const Camera& cam, const StereoPriorConfig& cfg, int iter,
                                    Rng& rng);

// Projects sparse points into the view; each hit pixel carries the nearest
// point's camera-space depth, everything else is invalid.
DepthPrior sparse_prior_from_points(const std::vector<SparsePoint>& points, const Camera& cam);

// Least-squares scale/shift fit of a relative depth map onto sparse metric
// samples; the result is dense and valid where the fitted depth is positive.
DepthPrior align_external_prior(const Image& pred, const DepthPrior& sparse);

// Uniform interface the trainer pulls supervision through.
class PriorProvider {
public:
    virtual ~PriorProvider() = default;
    virtual std::optional<DepthPrior> fetch(int view_id, const GaussianCloud& cloud,
                                            const Camera& cam, int iter, Rng& rng) = 0;
};

// Self-evolving stereo supervision (render, match, triangulate, cache).
class StereoSelfProvider : public PriorProvider {
public:
    explicit StereoSelfProvider(StereoPriorConfig cfg) : cfg_(std::move(cfg)) {}
    std::optional<DepthPrior> fetch(int view_id, const GaussianCloud& cloud, const Camera& cam,
                                    int iter, Rng& rng) override;
    const PriorCache& cache() const { return cache_; }
    const StereoPriorConfig& config() const { return cfg_; }

private:
    StereoPriorConfig cfg_;
    PriorCache cache_;
};

// Fixed per-view priors (SfM projections or aligned external maps), active
// from start_iter on.
class StaticPriorProvider : public PriorProvider {
public:
    StaticPriorProvider(std::map<int, DepthPrior> priors, int start_iter)
        : priors_(std::move(priors)), start_iter_(start_iter) {}
    std::optional<DepthPrior> fetch(int view_id, const GaussianCloud& cloud, const Camera& cam,
                                    int iter, Rng& rng) override;

private:
    std::map<int, DepthPrior> priors_;
    int start_iter_ = 0;
};

}  // namespace splat
