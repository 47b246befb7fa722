#include "splat/depth_priors.hpp"

#include <algorithm>
#include <cmath>

#include "splat/errors.hpp"
#include "splat/rasterizer.hpp"

namespace splat {

DepthPrior depth_from_disparity(const DisparityMap& disparity, double fx, double baseline,
                                double min_disparity) {
    DepthPrior prior;
    prior.depth = Image(disparity.disparity.width, disparity.disparity.height, 1);
    prior.valid = Mask(disparity.valid.width, disparity.valid.height, false);
    prior.source = PriorSource::stereo_self;
    prior.baseline_used = baseline;
    for (int y = 0; y < prior.depth.height; ++y)
        for (int x = 0; x < prior.depth.width; ++x) {
            if (!disparity.valid.get(y, x)) continue;
            const double disp = disparity.disparity.at(y, x);
            if (disp < min_disparity) continue;
            prior.depth.at(y, x) = fx * baseline / disp;
            prior.valid.set(y, x, true);
        }
    return prior;
}

DepthPrior stereo_prior(const GaussianCloud& cloud, const Camera& cam, double baseline, int iter,
                        const StereoPriorConfig& cfg) {
    if (!(baseline > 0) || !std::isfinite(baseline))
        fail(ErrorCode::invalid_parameter, "stereo_prior: baseline must be positive");

    RenderOptions opts;
    opts.keep_contributors = false;
    const RenderedFrame left = render_frame(cloud, cam, cfg.background, opts);
    const RenderedFrame right = render_frame(cloud, right_pose(cam, baseline), cfg.background, opts);

    bool any_opaque = false;
    for (double a : left.alpha.data) {
        if (a > kAlphaMaskThreshold) {
            any_opaque = true;
            break;
        }
    }
    if (!any_opaque)
        fail(ErrorCode::empty_prior, "stereo_prior: render has no opaque coverage");

    const int d_max = cfg.d_max > 0 ? cfg.d_max : cam.width / 4;
    DisparityMap dl = compute_disparity(left.color, right.color, d_max, cfg.window,
                                        cfg.census_window);
    const DisparityMap dr = compute_disparity_right(left.color, right.color, d_max, cfg.window,
                                                    cfg.census_window);
    dl = lr_consistency(dl, dr, cfg.lr_tolerance);

    DepthPrior prior = depth_from_disparity(dl, cam.fx, baseline, cfg.min_disparity);
    prior.created_at = iter;
    return prior;
}

std::optional<DepthPrior> get_prior(PriorCache& cache, int view_id, const GaussianCloud& cloud,
                                    const Camera& cam, const StereoPriorConfig& cfg, int iter,
                                    Rng& rng) {
    if (iter < cfg.depth_start_iter) return std::nullopt;
    auto it = cache.entries.find(view_id);
    if (it != cache.entries.end() && iter - it->second.created_at < cfg.refresh_interval)
        return it->second;

    const double baseline = rng.uniform(cfg.baseline_min, cfg.baseline_max);
    DepthPrior prior = stereo_prior(cloud, cam, baseline, iter, cfg);
    cache.creation_log.emplace_back(view_id, iter);
    cache.entries[view_id] = prior;
    return prior;
}

DepthPrior sparse_prior_from_points(const std::vector<SparsePoint>& points, const Camera& cam) {
    DepthPrior prior;
    prior.depth = Image(cam.width, cam.height, 1);
    prior.valid = Mask(cam.width, cam.height, false);
    prior.source = PriorSource::sfm_sparse;

    size_t projected = 0;
    for (const SparsePoint& p : points) {
        const Vec3 c = cam.to_camera(p.position);
        if (c.z <= kMinCameraDepth) continue;
        const int px = static_cast<int>(std::lround(cam.fx * c.x / c.z + cam.cx));
        const int py = static_cast<int>(std::lround(cam.fy * c.y / c.z + cam.cy));
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
        ++projected;
        if (!prior.valid.get(py, px) || c.z < prior.depth.at(py, px)) {
            prior.depth.at(py, px) = c.z;
            prior.valid.set(py, px, true);
        }
    }
    if (projected == 0)
        fail(ErrorCode::empty_prior, "sparse_prior_from_points: no point projects into the view");
    return prior;
}

DepthPrior align_external_prior(const Image& pred, const DepthPrior& sparse) {
    if (pred.width != sparse.depth.width || pred.height != sparse.depth.height ||
        pred.channels != 1)
        fail(ErrorCode::shape_mismatch, "align_external_prior: map shapes differ");

    double sum_p = 0, sum_s = 0;
    size_t n = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (!sparse.valid.get(y, x)) continue;
            sum_p += pred.at(y, x);
            sum_s += sparse.depth.at(y, x);
            ++n;
        }
    if (n < 2)
        fail(ErrorCode::degenerate_fit, "align_external_prior: fewer than 2 sparse samples");
    const double mean_p = sum_p / static_cast<double>(n);
    const double mean_s = sum_s / static_cast<double>(n);

    double var_p = 0, cov_ps = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (!sparse.valid.get(y, x)) continue;
            const double dp = pred.at(y, x) - mean_p;
            var_p += dp * dp;
            cov_ps += dp * (sparse.depth.at(y, x) - mean_s);
        }
    if (var_p <= 0)
        fail(ErrorCode::degenerate_fit, "align_external_prior: prediction has zero variance");

    const double scale = cov_ps / var_p;
    const double shift = mean_s - scale * mean_p;

    DepthPrior out;
    out.depth = Image(pred.width, pred.height, 1);
    out.valid = Mask(pred.width, pred.height, false);
    out.source = PriorSource::external_aligned;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            const double d = scale * pred.at(y, x) + shift;
            out.depth.at(y, x) = d;
            out.valid.set(y, x, d > 0);
        }
    return out;
}

std::optional<DepthPrior> StereoSelfProvider::fetch(int view_id, const GaussianCloud& cloud,
                                                    const Camera& cam, int iter, Rng& rng) {
    return get_prior(cache_, view_id, cloud, cam, cfg_, iter, rng);
}

std::optional<DepthPrior> StaticPriorProvider::fetch(int view_id, const GaussianCloud&,
                                                     const Camera&, int iter, Rng&) {
    if (iter < start_iter_) return std::nullopt;
    auto it = priors_.find(view_id);
    if (it == priors_.end()) return std::nullopt;
    return it->second;
}

}  // namespace splat
