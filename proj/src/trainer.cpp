#include "splat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "splat/errors.hpp"
#include "splat/rasterizer.hpp"

namespace splat {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr double kPercentDense = 0.01;  // clone/split size cutoff vs scene extent
constexpr double kInitialOpacity = 0.1;
constexpr double kSplitScaleFactor = 0.8;

double adam_update(double& m, double& v, double grad, double lr, double bc1, double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    return -lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
}

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void add(const Vec3& p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    Vec3 extent() const { return hi - lo; }
};

// Axis-aligned box the initialization samples from: sparse points when
// available, otherwise the camera ring plus probe points along each optical
// axis.
Aabb scene_bounds(const std::vector<TrainView>& views, const std::vector<SparsePoint>& points,
                  bool use_points) {
    Aabb box;
    if (use_points && !points.empty()) {
        for (const SparsePoint& p : points) box.add(p.position);
        return box;
    }
    double spread = 0;
    std::vector<Vec3> centers;
    for (const TrainView& v : views) centers.push_back(v.camera.center());
    for (const Vec3& a : centers)
        for (const Vec3& b : centers) spread = std::max(spread, (a - b).norm());
    if (spread == 0) spread = 1.0;
    for (const TrainView& v : views) {
        const Vec3 c = v.camera.center();
        const Vec3 forward = v.camera.rotation.row(2);
        box.add(c);
        box.add(c + forward * (0.5 * spread));
        box.add(c + forward * (2.0 * spread));
    }
    return box;
}

double scene_extent_of(const std::vector<TrainView>& views,
                       const std::vector<SparsePoint>& points) {
    Aabb box;
    for (const TrainView& v : views) box.add(v.camera.center());
    for (const SparsePoint& p : points) box.add(p.position);
    const double diag = box.extent().norm();
    return diag > 0 ? diag : 1.0;
}

void append_zero_moments(OptimizerState::Moments& mom, int sh_count) {
    mom.position.emplace_back();
    mom.rotation.emplace_back();
    mom.log_scale.emplace_back();
    mom.opacity_logit.emplace_back();
    mom.sh.emplace_back(sh_count, Vec3());
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
    if (cfg.iterations < 1) fail(ErrorCode::configuration, "config: iterations must be >= 1");
    if (cfg.lambda1 < 0 || cfg.lambda1 > 1)
        fail(ErrorCode::configuration, "config: lambda1 must be in [0,1]");
    if (cfg.lambda2 < 0) fail(ErrorCode::configuration, "config: lambda2 must be >= 0");
    if (cfg.depth_start_iter < 0 || cfg.depth_start_iter > cfg.iterations)
        fail(ErrorCode::configuration, "config: depth_start_iter must be in [0, iterations]");
    if (cfg.prior_refresh_interval < 1)
        fail(ErrorCode::configuration, "config: prior_refresh_interval must be >= 1");
    if (cfg.baseline_min > cfg.baseline_max)
        fail(ErrorCode::configuration, "config: baseline_min must be <= baseline_max");
    if (cfg.baseline_min < 0)
        fail(ErrorCode::configuration, "config: baselines must be nonnegative");
    if (cfg.sh_degree < 0 || cfg.sh_degree > 3)
        fail(ErrorCode::configuration, "config: sh_degree must be in 0..3");
    if (cfg.densify_interval < 1)
        fail(ErrorCode::configuration, "config: densify_interval must be >= 1");
    if (cfg.init_points < 1) fail(ErrorCode::configuration, "config: init_points must be >= 1");
    if (cfg.prior_source != "none" && cfg.prior_source != "stereo_self" &&
        cfg.prior_source != "sfm_sparse" && cfg.prior_source != "external_aligned")
        fail(ErrorCode::configuration, "config: unknown prior_source '" + cfg.prior_source + "'");
}

void OptimizerState::resize(const GaussianCloud& cloud) {
    const size_t n = cloud.size();
    const int sh_count = sh_coeff_count(cloud.sh_degree);
    auto init = [&](Moments& mom) {
        mom.position.assign(n, Vec3());
        mom.rotation.assign(n, Vec4());
        mom.log_scale.assign(n, Vec3());
        mom.opacity_logit.assign(n, 0.0);
        mom.sh.assign(n, std::vector<Vec3>(sh_count, Vec3()));
    };
    init(m);
    init(v);
    step = 0;
}

void adam_step(GaussianCloud& cloud, const ParamGrads& grads, OptimizerState& state,
               const LearningRates& lrs) {
    const size_t n = cloud.size();
    if (grads.position.size() != n || state.size() != n)
        fail(ErrorCode::shape_mismatch, "adam_step: shapes out of sync with the cloud");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

    for (size_t i = 0; i < n; ++i) {
        Gaussian& g = cloud.gaussians[i];
        for (int k = 0; k < 3; ++k) {
            g.position[k] += adam_update(state.m.position[i][k], state.v.position[i][k],
                                         grads.position[i][k], lrs.position, bc1, bc2);
            g.log_scale[k] += adam_update(state.m.log_scale[i][k], state.v.log_scale[i][k],
                                          grads.log_scale[i][k], lrs.log_scale, bc1, bc2);
        }
        Vec4 q{g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z};
        for (int k = 0; k < 4; ++k) {
            q[k] += adam_update(state.m.rotation[i][k], state.v.rotation[i][k],
                                grads.rotation[i][k], lrs.rotation, bc1, bc2);
        }
        g.rotation = {q.w, q.x, q.y, q.z};
        g.opacity_logit += adam_update(state.m.opacity_logit[i], state.v.opacity_logit[i],
                                       grads.opacity_logit[i], lrs.opacity, bc1, bc2);
        for (size_t c = 0; c < g.sh.size(); ++c) {
            const double lr = c == 0 ? lrs.sh : lrs.sh / 20.0;
            for (int k = 0; k < 3; ++k) {
                g.sh[c][k] += adam_update(state.m.sh[i][c][k], state.v.sh[i][c][k],
                                          grads.sh[i][c][k], lr, bc1, bc2);
            }
        }
        g.rotation = g.rotation.normalized();

        if (!all_finite(g.position) || !all_finite(g.rotation) || !all_finite(g.log_scale) ||
            !std::isfinite(g.opacity_logit))
            fail(ErrorCode::training_state_corrupt,
                 "adam_step: non-finite update for Gaussian " + std::to_string(i));
    }
}

void densify_and_prune(GaussianCloud& cloud, const DensifyStats& stats, OptimizerState& state,
                       const TrainConfig& cfg, double scene_extent, Rng& rng) {
    const size_t n = cloud.size();
    if (stats.grad_norm_sum.size() != n || state.size() != n)
        fail(ErrorCode::shape_mismatch, "densify_and_prune: shapes out of sync");
    const int sh_count = sh_coeff_count(cloud.sh_degree);
    const double size_cutoff = kPercentDense * scene_extent;

    GaussianCloud out;
    out.sh_degree = cloud.sh_degree;
    OptimizerState new_state;
    new_state.step = state.step;
    std::vector<Gaussian> appended;

    auto copy_moments = [&](size_t i) {
        new_state.m.position.push_back(state.m.position[i]);
        new_state.m.rotation.push_back(state.m.rotation[i]);
        new_state.m.log_scale.push_back(state.m.log_scale[i]);
        new_state.m.opacity_logit.push_back(state.m.opacity_logit[i]);
        new_state.m.sh.push_back(state.m.sh[i]);
        new_state.v.position.push_back(state.v.position[i]);
        new_state.v.rotation.push_back(state.v.rotation[i]);
        new_state.v.log_scale.push_back(state.v.log_scale[i]);
        new_state.v.opacity_logit.push_back(state.v.opacity_logit[i]);
        new_state.v.sh.push_back(state.v.sh[i]);
    };

    for (size_t i = 0; i < n; ++i) {
        const Gaussian& g = cloud.gaussians[i];
        if (g.opacity() < cfg.prune_opacity) continue;  // pruned

        const double mean_grad =
            stats.visible_count[i] > 0 ? stats.grad_norm_sum[i] / stats.visible_count[i] : 0.0;
        const Vec3 scale = g.scale();
        const double max_scale = std::max({scale.x, scale.y, scale.z});

        if (mean_grad > cfg.densify_grad_threshold && max_scale > size_cutoff) {
            // Split: two children sampled from the parent's own distribution,
            // scaled down; the parent is dropped.
            const Mat3 rot = g.rotation.to_matrix();
            for (int child = 0; child < 2; ++child) {
                Gaussian c = g;
                const Vec3 sample{rng.normal() * scale.x, rng.normal() * scale.y,
                                  rng.normal() * scale.z};
                c.position = g.position + rot * sample;
                c.log_scale = g.log_scale + Vec3(std::log(kSplitScaleFactor),
                                                 std::log(kSplitScaleFactor),
                                                 std::log(kSplitScaleFactor));
                appended.push_back(c);
            }
            continue;
        }

        out.gaussians.push_back(g);
        copy_moments(i);
        if (mean_grad > cfg.densify_grad_threshold) appended.push_back(g);  // clone
    }

    for (Gaussian& g : appended) {
        out.gaussians.push_back(std::move(g));
        append_zero_moments(new_state.m, sh_count);
        append_zero_moments(new_state.v, sh_count);
    }

    if (out.gaussians.empty())
        fail(ErrorCode::empty_scene, "densify_and_prune: every Gaussian was pruned");

    cloud = std::move(out);
    state = std::move(new_state);
}

std::pair<double, double> default_baseline_interval(const std::vector<TrainView>& views,
                                                    const std::vector<Vec3>& points) {
    std::vector<double> depths;
    for (const TrainView& v : views)
        for (const Vec3& p : points) {
            const double z = v.camera.to_camera(p).z;
            if (z > kMinCameraDepth) depths.push_back(z);
        }
    if (depths.empty() || views.empty())
        fail(ErrorCode::configuration, "default_baseline_interval: no points in front of any view");
    std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
    const double z_med = depths[depths.size() / 2];
    const double unit = 32.0 * z_med / views.front().camera.fx;
    return {0.5 * unit, 2.0 * unit};
}

GaussianCloud initialize_cloud(const std::vector<TrainView>& views,
                               const std::vector<SparsePoint>& points, const TrainConfig& cfg,
                               Rng& rng) {
    GaussianCloud cloud;
    cloud.sh_degree = cfg.sh_degree;
    const int sh_count = sh_coeff_count(cfg.sh_degree);
    const bool from_points = !points.empty() && !cfg.init_random;

    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    if (from_points) {
        for (const SparsePoint& p : points) {
            positions.push_back(p.position);
            colors.push_back(p.color);
        }
    } else {
        const Aabb box = scene_bounds(views, points, !points.empty());
        const Vec3 ext = box.extent();
        for (int i = 0; i < cfg.init_points; ++i) {
            positions.push_back({box.lo.x + ext.x * rng.uniform(), box.lo.y + ext.y * rng.uniform(),
                                 box.lo.z + ext.z * rng.uniform()});
            colors.emplace_back(0.5, 0.5, 0.5);
        }
    }

    // Isotropic initial scale from the nearest-neighbor distance.
    const size_t n = positions.size();
    std::vector<double> nn(n, std::numeric_limits<double>::max());
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double d2 = (positions[i] - positions[j]).squared_norm();
            nn[i] = std::min(nn[i], d2);
            nn[j] = std::min(nn[j], d2);
        }
    }
    constexpr double kY00 = 0.28209479177387814;
    const double opacity_logit = logit(kInitialOpacity);
    for (size_t i = 0; i < n; ++i) {
        Gaussian g;
        g.position = positions[i];
        g.rotation = Quat::identity();
        const double dist = n > 1 ? std::sqrt(nn[i]) : 0.1;
        const double s = std::max(dist, 1e-7);
        g.log_scale = {std::log(s), std::log(s), std::log(s)};
        g.opacity_logit = opacity_logit;
        g.sh.assign(sh_count, Vec3());
        g.sh[0] = (colors[i] - Vec3(0.5, 0.5, 0.5)) / kY00;
        cloud.gaussians.push_back(std::move(g));
    }
    return cloud;
}

TrainResult train(const std::vector<TrainView>& views, const std::vector<SparsePoint>& points,
                  const TrainConfig& cfg, PriorProvider* provider) {
    validate_config(cfg);
    if (views.empty()) fail(ErrorCode::configuration, "train: need at least one training view");
    const bool depth_active = cfg.lambda2 > 0 && cfg.depth_start_iter < cfg.iterations;
    if (depth_active && provider == nullptr)
        fail(ErrorCode::configuration,
             "train: lambda2 > 0 and depth supervision starts before the end of training, "
             "but no prior provider is configured");

    Rng rng(cfg.seed);
    GaussianCloud cloud = initialize_cloud(views, points, cfg, rng);
    OptimizerState state;
    state.resize(cloud);
    DensifyStats stats;
    stats.resize(cloud.size());
    const double scene_extent = scene_extent_of(views, points);

    TrainResult result;
    result.records.reserve(cfg.iterations);

    const double lr_decay = cfg.iterations > 1
                                ? std::log(cfg.position_lr_final_scale) / (cfg.iterations - 1)
                                : 0.0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const TrainView& view = views[rng.uniform_index(views.size())];

        const RenderedFrame frame = render_frame(cloud, view.camera, cfg.background);

        std::optional<DepthPrior> prior;
        if (cfg.lambda2 != 0 && provider != nullptr)
            prior = provider->fetch(view.id, cloud, view.camera, iter, rng);

        LossGradients loss = total_loss_backward(view.image, frame.color,
                                                 prior ? &*prior : nullptr, frame.depth,
                                                 frame.depth_mask(), cfg.lambda1, cfg.lambda2);

        const ParamGrads grads = backward_render(cloud, view.camera, frame, loss.d_color,
                                                 loss.d_depth);

        LearningRates lrs = cfg.lr;
        lrs.position = cfg.lr.position * std::exp(lr_decay * iter);
        adam_step(cloud, grads, state, lrs);

        for (size_t i = 0; i < cloud.size(); ++i) {
            if (!grads.visible[i]) continue;
            stats.grad_norm_sum[i] += grads.pos2d_norm[i];
            stats.visible_count[i] += 1;
        }

        if (iter >= cfg.densify_start && iter <= cfg.densify_end &&
            (iter - cfg.densify_start) % cfg.densify_interval == 0 && iter > 0) {
            densify_and_prune(cloud, stats, state, cfg, scene_extent, rng);
            stats.resize(cloud.size());
        }

        IterationRecord rec;
        rec.iteration = iter;
        rec.l1 = loss.breakdown.l1;
        rec.dssim = loss.breakdown.dssim;
        rec.depth_loss = loss.breakdown.depth_l1;
        rec.total = loss.breakdown.total;
        rec.gaussian_count = static_cast<int>(cloud.size());
        rec.depth_valid_fraction = loss.breakdown.depth_valid_fraction;
        rec.view_id = view.id;
        result.records.push_back(rec);
    }

    double psnr_sum = 0, ssim_sum = 0;
    RenderOptions eval_opts;
    eval_opts.keep_contributors = false;
    for (const TrainView& view : views) {
        const RenderedFrame frame = render_frame(cloud, view.camera, cfg.background, eval_opts);
        const ViewSynthesisMetrics m = eval_view_synthesis(frame.color, view.image);
        psnr_sum += m.psnr_db;
        ssim_sum += m.ssim;
    }
    result.mean_train_psnr = psnr_sum / static_cast<double>(views.size());
    result.mean_train_ssim = ssim_sum / static_cast<double>(views.size());
    result.cloud = std::move(cloud);
    return result;
}

}  // namespace splat
