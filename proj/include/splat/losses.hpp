#pragma once

#include "splat/image.hpp"

namespace splat {

struct DepthPrior;  // depth_priors.hpp

struct LossBreakdown {
    double l1 = 0;
    double dssim = 0;
    double depth_l1 = 0;
    double total = 0;
    double depth_valid_fraction = 0;
};

// (1 - SSIM)/2 with an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, averaged over pixels and channels. Window weights are
// renormalized where the window is cut by the image border.
double dssim(const Image& a, const Image& b);

double ssim(const Image& a, const Image& b);

// Gradient of dssim(a, b) with respect to b, same shape as b.
Image dssim_backward(const Image& a, const Image& b);

// Training loss: (1-l1_weight)*L1 + l1_weight*DSSIM + depth_weight*|prior - depth|_masked.
// The depth term averages over prior->valid AND render_mask; it is zero when
// prior is null or the joint mask is empty. All terms are mean-reduced.
LossBreakdown total_loss(const Image& image, const Image& rendered, const DepthPrior* prior,
                         const Image& rendered_depth, const Mask& render_mask, double l1_weight,
                         double depth_weight);

struct LossGradients {
    LossBreakdown breakdown;
    Image d_color;  // H x W x 3
    Image d_depth;  // H x W
};

// total_loss plus its gradients with respect to the rendered color and
// normalized depth maps (inputs to backward_render).
LossGradients total_loss_backward(const Image& image, const Image& rendered,
                                  const DepthPrior* prior, const Image& rendered_depth,
                                  const Mask& render_mask, double l1_weight, double depth_weight);

struct DepthMetrics {
    double abs_rel = 0;
    double rmse = 0;
    double delta_125 = 0;  // fraction with max(pred/gt, gt/pred) < 1.25
};

DepthMetrics eval_depth(const Image& pred, const Image& gt, const Mask& mask);

struct ViewSynthesisMetrics {
    double psnr_db = 0;  // capped at 100 dB
    double ssim = 0;
};

ViewSynthesisMetrics eval_view_synthesis(const Image& pred, const Image& gt);

}  // namespace splat
