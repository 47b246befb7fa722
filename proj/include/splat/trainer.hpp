#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splat/depth_priors.hpp"
#include "splat/gradients.hpp"
#include "splat/image.hpp"
#include "splat/losses.hpp"
#include "splat/scene.hpp"

namespace splat {

struct LearningRates {
    double position = 1.6e-4;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;  // higher-order coefficients train at 1/20 of this
};

struct TrainConfig {
    int iterations = 2000;
    double lambda1 = 0.2;   // D-SSIM weight inside the photometric term
    double lambda2 = 0.1;   // depth supervision weight
    int depth_start_iter = 1000;      // T: first iteration with an active depth term
    int prior_refresh_interval = 100; // tau: stereo prior cache lifetime
    double baseline_min = 0;  // zero interval selects the scale-adaptive rule
    double baseline_max = 0;
    LearningRates lr;
    double position_lr_final_scale = 0.01;  // exponential decay target
    int densify_interval = 100;
    int densify_start = 200;
    int densify_end = 1500;
    double densify_grad_threshold = 2e-4;
    double prune_opacity = 0.005;
    uint64_t seed = 0;
    int sh_degree = 0;
    int init_points = 2000;   // random-initialization count
    bool init_random = false; // ignore SfM points even when present
    std::string prior_source = "none";  // none | stereo_self | sfm_sparse | external_aligned
    int stereo_d_max = 0;  // 0 selects width/4
    int stereo_window = 9;
    int stereo_census_window = 7;
    double stereo_lr_tolerance = 1.0;
    double min_disparity = 0.5;
    Vec3 background;
};

void validate_config(const TrainConfig& cfg);

// Adam moment accumulators, shapes tracking the cloud through densify/prune.
struct OptimizerState {
    struct Moments {
        std::vector<Vec3> position;
        std::vector<Vec4> rotation;
        std::vector<Vec3> log_scale;
        std::vector<double> opacity_logit;
        std::vector<std::vector<Vec3>> sh;
    };
    Moments m, v;
    long step = 0;

    void resize(const GaussianCloud& cloud);
    size_t size() const { return m.opacity_logit.size(); }
};

// One Adam update (beta 0.9/0.999, eps 1e-15, bias corrected); quaternions
// are renormalized afterwards. Throws on a non-finite update.
void adam_step(GaussianCloud& cloud, const ParamGrads& grads, OptimizerState& state,
               const LearningRates& lrs);

// Accumulated densification statistics between densify calls.
struct DensifyStats {
    std::vector<double> grad_norm_sum;  // screen-space gradient norms
    std::vector<int> visible_count;

    void resize(size_t n) {
        grad_norm_sum.assign(n, 0.0);
        visible_count.assign(n, 0);
    }
};

// Clone/split Gaussians whose mean screen-space gradient exceeds the
// threshold, prune low-opacity ones, and keep the optimizer state aligned.
void densify_and_prune(GaussianCloud& cloud, const DensifyStats& stats, OptimizerState& state,
                       const TrainConfig& cfg, double scene_extent, Rng& rng);

struct IterationRecord {
    int iteration = 0;
    double l1 = 0;
    double dssim = 0;
    double depth_loss = 0;
    double total = 0;
    int gaussian_count = 0;
    double depth_valid_fraction = 0;
    int view_id = -1;
};

struct TrainResult {
    GaussianCloud cloud;
    std::vector<IterationRecord> records;
    double mean_train_psnr = 0;
    double mean_train_ssim = 0;
};

struct TrainView {
    int id = 0;
    Camera camera;
    Image image;  // H x W x 3 in [0,1]
};

// The optimization loop. `views` are the training views; `provider` supplies
// depth priors (may be null when lambda2 is zero). Deterministic for a fixed
// config and seed.
TrainResult train(const std::vector<TrainView>& views, const std::vector<SparsePoint>& points,
                  const TrainConfig& cfg, PriorProvider* provider);

// The scale-adaptive default baseline interval: [0.5, 2.0] * 32 * z_med / fx,
// aiming the median disparity at 16..64 px. z_med is the median camera-space
// depth of the given points over all views.
std::pair<double, double> default_baseline_interval(const std::vector<TrainView>& views,
                                                    const std::vector<Vec3>& points);

// Initial cloud: SfM points when available (unless forced random), otherwise
// uniform points in the scene bounding box. Scales come from nearest-neighbor
// distances, opacity starts at 0.1.
GaussianCloud initialize_cloud(const std::vector<TrainView>& views,
                               const std::vector<SparsePoint>& points, const TrainConfig& cfg,
                               Rng& rng);

}  // namespace splat
