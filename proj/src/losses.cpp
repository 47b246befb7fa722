#include "splat/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "splat/depth_priors.hpp"
#include "splat/errors.hpp"

namespace splat {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& gaussian_kernel() {
    static const std::array<double, kWindow> k = [] {
        std::array<double, kWindow> v{};
        double sum = 0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kHalf;
            v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[i];
        }
        for (double& e : v) e /= sum;
        return v;
    }();
    return k;
}

// Separable convolution with zero padding (kernel is symmetric).
Image conv_raw(const Image& src) {
    const auto& k = gaussian_kernel();
    Image tmp(src.width, src.height, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0;
                const int lo = std::max(-kHalf, -x), hi = std::min(kHalf, src.width - 1 - x);
                for (int t = lo; t <= hi; ++t) acc += k[t + kHalf] * src.at(y, x + t, c);
                tmp.at(y, x, c) = acc;
            }
    Image out(src.width, src.height, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0;
                const int lo = std::max(-kHalf, -y), hi = std::min(kHalf, src.height - 1 - y);
                for (int t = lo; t <= hi; ++t) acc += k[t + kHalf] * tmp.at(y + t, x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

// Sum of in-bounds kernel weights along one axis.
std::vector<double> axis_norm(int extent) {
    const auto& k = gaussian_kernel();
    std::vector<double> z(extent);
    for (int x = 0; x < extent; ++x) {
        double s = 0;
        const int lo = std::max(-kHalf, -x), hi = std::min(kHalf, extent - 1 - x);
        for (int t = lo; t <= hi; ++t) s += k[t + kHalf];
        z[x] = s;
    }
    return z;
}

// Border-renormalized Gaussian blur and its adjoint.
Image blur(const Image& src) {
    Image out = conv_raw(src);
    const auto zx = axis_norm(src.width);
    const auto zy = axis_norm(src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const double z = zx[x] * zy[y];
            for (int c = 0; c < src.channels; ++c) out.at(y, x, c) /= z;
        }
    return out;
}

Image blur_transpose(const Image& src) {
    Image scaled = src;
    const auto zx = axis_norm(src.width);
    const auto zy = axis_norm(src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const double z = zx[x] * zy[y];
            for (int c = 0; c < src.channels; ++c) scaled.at(y, x, c) /= z;
        }
    return conv_raw(scaled);
}

Image elementwise_product(const Image& a, const Image& b) {
    Image out(a.width, a.height, a.channels);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

struct SsimStats {
    Image mu_a, mu_b, e_a2, e_b2, e_ab;
};

SsimStats ssim_stats(const Image& a, const Image& b) {
    return {blur(a), blur(b), blur(elementwise_product(a, a)), blur(elementwise_product(b, b)),
            blur(elementwise_product(a, b))};
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    const SsimStats st = ssim_stats(a, b);
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double ma = st.mu_a.data[i], mb = st.mu_b.data[i];
        const double va = st.e_a2.data[i] - ma * ma;
        const double vb = st.e_b2.data[i] - mb * mb;
        const double cov = st.e_ab.data[i] - ma * mb;
        acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return acc / static_cast<double>(a.data.size());
}

double dssim(const Image& a, const Image& b) { return (1.0 - ssim(a, b)) * 0.5; }

Image dssim_backward(const Image& a, const Image& b) {
    require_same_shape(a, b, "dssim_backward");
    const SsimStats st = ssim_stats(a, b);
    const double up = -0.5 / static_cast<double>(a.data.size());  // d(dssim)/dS per element

    Image v_mu(b.width, b.height, b.channels);
    Image v_e2(b.width, b.height, b.channels);
    Image v_ab(b.width, b.height, b.channels);
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double ma = st.mu_a.data[i], mb = st.mu_b.data[i];
        const double va = st.e_a2.data[i] - ma * ma;
        const double vb = st.e_b2.data[i] - mb * mb;
        const double cov = st.e_ab.data[i] - ma * mb;
        const double a1 = 2 * ma * mb + kC1, a2 = 2 * cov + kC2;
        const double b1 = ma * ma + mb * mb + kC1, b2 = va + vb + kC2;
        const double s = (a1 * a2) / (b1 * b2);
        v_ab.data[i] = up * 2 * a1 / (b1 * b2);
        v_e2.data[i] = up * (-s / b2);
        v_mu.data[i] =
            up * (2 * ma * (a2 - a1) / (b1 * b2) - 2 * mb * s * (1.0 / b1 - 1.0 / b2));
    }

    Image g = blur_transpose(v_mu);
    const Image g2 = blur_transpose(v_e2);
    const Image gab = blur_transpose(v_ab);
    for (size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += 2.0 * b.data[i] * g2.data[i] + a.data[i] * gab.data[i];
    return g;
}

LossBreakdown total_loss(const Image& image, const Image& rendered, const DepthPrior* prior,
                         const Image& rendered_depth, const Mask& render_mask, double l1_weight,
                         double depth_weight) {
    LossGradients lg = total_loss_backward(image, rendered, prior, rendered_depth, render_mask,
                                           l1_weight, depth_weight);
    return lg.breakdown;
}

LossGradients total_loss_backward(const Image& image, const Image& rendered,
                                  const DepthPrior* prior, const Image& rendered_depth,
                                  const Mask& render_mask, double l1_weight,
                                  double depth_weight) {
    require_same_shape(image, rendered, "total_loss");
    if (rendered_depth.width != image.width || rendered_depth.height != image.height)
        fail(ErrorCode::shape_mismatch, "total_loss: depth map shape mismatch");
    if (l1_weight < 0 || l1_weight > 1)
        fail(ErrorCode::invalid_parameter, "total_loss: l1 weight must be in [0,1]");

    LossGradients out;
    out.d_color = Image(image.width, image.height, 3);
    out.d_depth = Image(image.width, image.height, 1);

    const double n = static_cast<double>(image.data.size());
    double l1 = 0;
    for (size_t i = 0; i < image.data.size(); ++i) {
        const double diff = image.data[i] - rendered.data[i];
        l1 += std::abs(diff);
        out.d_color.data[i] = (1.0 - l1_weight) * (-sign(diff)) / n;
    }
    l1 /= n;

    const double ds = dssim(image, rendered);
    if (l1_weight != 0.0) {
        const Image g = dssim_backward(image, rendered);
        for (size_t i = 0; i < g.data.size(); ++i) out.d_color.data[i] += l1_weight * g.data[i];
    }

    double depth_l1 = 0;
    size_t joint = 0;
    if (prior != nullptr && depth_weight != 0.0) {
        if (prior->depth.width != image.width || prior->depth.height != image.height)
            fail(ErrorCode::shape_mismatch, "total_loss: prior shape mismatch");
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) {
                if (!prior->valid.get(y, x) || !render_mask.get(y, x)) continue;
                ++joint;
            }
        if (joint > 0) {
            for (int y = 0; y < image.height; ++y)
                for (int x = 0; x < image.width; ++x) {
                    if (!prior->valid.get(y, x) || !render_mask.get(y, x)) continue;
                    const double diff = prior->depth.at(y, x) - rendered_depth.at(y, x);
                    depth_l1 += std::abs(diff);
                    out.d_depth.at(y, x) =
                        depth_weight * (-sign(diff)) / static_cast<double>(joint);
                }
            depth_l1 /= static_cast<double>(joint);
        }
    }

    out.breakdown.l1 = l1;
    out.breakdown.dssim = ds;
    out.breakdown.depth_l1 = depth_l1;
    out.breakdown.total = (1.0 - l1_weight) * l1 + l1_weight * ds + depth_weight * depth_l1;
    out.breakdown.depth_valid_fraction =
        static_cast<double>(joint) / static_cast<double>(image.pixel_count());
    return out;
}

DepthMetrics eval_depth(const Image& pred, const Image& gt, const Mask& mask) {
    if (pred.width != gt.width || pred.height != gt.height || mask.width != gt.width ||
        mask.height != gt.height)
        fail(ErrorCode::shape_mismatch, "eval_depth: shape mismatch");
    DepthMetrics m;
    size_t count = 0;
    double sq = 0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!mask.get(y, x)) continue;
            const double g = gt.at(y, x);
            if (!(g > 0))
                fail(ErrorCode::invalid_parameter, "eval_depth: non-positive gt depth in mask");
            const double p = pred.at(y, x);
            const double diff = p - g;
            m.abs_rel += std::abs(diff) / g;
            sq += diff * diff;
            const double ratio = std::max(p / g, g / p);
            if (ratio < 1.25) m.delta_125 += 1.0;
            ++count;
        }
    if (count == 0) fail(ErrorCode::empty_evaluation, "eval_depth: empty mask");
    m.abs_rel /= static_cast<double>(count);
    m.rmse = std::sqrt(sq / static_cast<double>(count));
    m.delta_125 /= static_cast<double>(count);
    return m;
}

ViewSynthesisMetrics eval_view_synthesis(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt, "eval_view_synthesis");
    double mse = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - gt.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.data.size());
    ViewSynthesisMetrics m;
    m.psnr_db = mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);
    m.ssim = ssim(pred, gt);
    return m;
}

}  // namespace splat
