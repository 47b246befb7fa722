#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "splat/depth_priors.hpp"
#include "splat/gradients.hpp"
#include "splat/image.hpp"
#include "splat/losses.hpp"
#include "splat/rasterizer.hpp"
#include "splat/rng.hpp"
#include "splat/scene.hpp"

namespace splat::testing {

// ---------------------------------------------------------------------------
// Naive Eq.-2 oracle: per pixel, every blending weight is recomputed from
// scratch as an explicit prefix product (no incremental transmittance). It
// shares the projection/footprint contract with the renderer but none of the
// compositing loop.
inline RenderedFrame naive_render(const GaussianCloud& cloud, const Camera& cam,
                                  const Vec3& background) {
    struct Indexed {
        Splat2D splat;
    };
    std::vector<Splat2D> splats;
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        if (auto s = project_gaussian_2d(cloud.gaussians[i], cam, cloud.sh_degree)) {
            s->source_index = static_cast<int>(i);
            splats.push_back(*s);
        }
    }
    std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
        return a.depth != b.depth ? a.depth < b.depth : a.source_index < b.source_index;
    });

    RenderedFrame frame;
    frame.color = Image(cam.width, cam.height, 3);
    frame.depth = Image(cam.width, cam.height, 1);
    frame.raw_depth = Image(cam.width, cam.height, 1);
    frame.alpha = Image(cam.width, cam.height, 1);
    frame.background = background;

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            // Alphas of the splats covering this pixel, in depth order.
            std::vector<double> alphas;
            std::vector<const Splat2D*> covering;
            for (const Splat2D& s : splats) {
                if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
                const Vec2 d{x - s.mean2d.x, y - s.mean2d.y};
                double alpha = s.opacity * std::exp(-0.5 * d.dot(s.inv_cov2d * d));
                if (alpha > kAlphaMax) alpha = kAlphaMax;
                alphas.push_back(alpha);
                covering.push_back(&s);
            }
            // Terms are included while the from-scratch prefix product stays
            // at or above the stop threshold.
            size_t included = 0;
            for (size_t k = 0; k < alphas.size(); ++k) {
                double prefix = 1.0;
                for (size_t j = 0; j < k; ++j) prefix *= 1.0 - alphas[j];
                if (prefix < kTransmittanceStop) break;
                included = k + 1;
            }
            Vec3 color;
            double raw = 0, acc = 0;
            for (size_t k = 0; k < included; ++k) {
                double prefix = 1.0;
                for (size_t j = 0; j < k; ++j) prefix *= 1.0 - alphas[j];
                const double w = alphas[k] * prefix;
                color += covering[k]->color * w;
                raw += covering[k]->depth * w;
                acc += w;
            }
            double tail = 1.0;
            for (size_t j = 0; j < included; ++j) tail *= 1.0 - alphas[j];
            color += background * tail;
            frame.color.set_rgb(y, x, color);
            frame.raw_depth.at(y, x) = raw;
            frame.alpha.at(y, x) = acc;
            frame.depth.at(y, x) = raw / std::max(acc, kAlphaNormEps);
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Random scenes whose Gaussians project inside the image.
inline Camera test_camera(int width = 16, int height = 16) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = width * 0.75;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    return cam;
}

inline GaussianCloud random_scene(Rng& rng, int count, const Camera& cam, int sh_degree = 0) {
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    const int n_coeffs = sh_coeff_count(sh_degree);
    for (int i = 0; i < count; ++i) {
        Gaussian g;
        const double z = rng.uniform(3.0, 7.0);
        const double px = rng.uniform(2.0, cam.width - 3.0);
        const double py = rng.uniform(2.0, cam.height - 3.0);
        g.position = {(px - cam.cx) / cam.fx * z, (py - cam.cy) / cam.fy * z, z};
        g.rotation = Quat{rng.normal(), rng.normal(), rng.normal(), rng.normal()}.normalized();
        const double base = rng.uniform(-2.3, -0.7);  // scales ~ 0.1 .. 0.5
        g.log_scale = {base + rng.uniform(-0.3, 0.3), base + rng.uniform(-0.3, 0.3),
                       base + rng.uniform(-0.3, 0.3)};
        g.opacity_logit = rng.uniform(-2.0, 1.5);
        g.sh.assign(n_coeffs, Vec3());
        g.sh[0] = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        for (int k = 1; k < n_coeffs; ++k)
            g.sh[k] = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
        cloud.gaussians.push_back(std::move(g));
    }
    return cloud;
}

inline Image random_image(Rng& rng, int width, int height, int channels) {
    Image img(width, height, channels);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

inline DepthPrior random_prior(Rng& rng, int width, int height) {
    DepthPrior prior;
    prior.depth = Image(width, height, 1);
    prior.valid = Mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            prior.depth.at(y, x) = rng.uniform(3.0, 7.0);
            prior.valid.set(y, x, rng.uniform() < 0.7);
        }
    return prior;
}

// ---------------------------------------------------------------------------
// Finite differences against the full training loss (Eq.-10 shape).
//
// The composited function is piecewise smooth: bounding-box edges, depth-sort
// ties, alpha/color clamps, the transmittance stop, validity-mask flips and
// L1 sign changes are all discrete boundaries where central differences donʼt
// estimate the one-sided derivative. The discrete structure of a render is
// captured in a signature; scenes where a perturbation crosses a boundary are
// rejected and resampled rather than tested against an invalid oracle.

struct LossSetup {
    Camera cam;
    Image target;                      // ground-truth image
    std::optional<DepthPrior> prior;   // depth supervision target (optional)
    double lambda1 = 0.2;
    double lambda2 = 0.0;
    Vec3 background{0.1, 0.15, 0.2};
};

inline std::vector<int64_t> render_signature(const GaussianCloud& cloud, const LossSetup& setup) {
    const RenderedFrame frame = render_frame(cloud, setup.cam, setup.background);
    std::vector<int64_t> sig;
    for (const Splat2D& s : frame.splats) {
        sig.push_back(s.source_index);
        sig.push_back(s.color_clamp_mask);
    }
    sig.push_back(-1);
    const Mask mask = frame.depth_mask();
    for (int y = 0; y < setup.cam.height; ++y)
        for (int x = 0; x < setup.cam.width; ++x) {
            const auto& contribs = frame.contributors_at(y, x);
            for (const Contribution& c : contribs) {
                sig.push_back(frame.splats[c.splat].source_index);
                sig.push_back(c.alpha >= kAlphaMax ? 1 : 0);
            }
            sig.push_back(-2);
            sig.push_back(mask.get(y, x) ? 1 : 0);
            sig.push_back(frame.alpha.at(y, x) > kAlphaNormEps ? 1 : 0);
            for (int ch = 0; ch < 3; ++ch) {
                const double diff = setup.target.at(y, x, ch) - frame.color.at(y, x, ch);
                sig.push_back(diff > 0 ? 1 : (diff < 0 ? -1 : 0));
            }
            if (setup.prior && setup.prior->valid.get(y, x) && mask.get(y, x)) {
                const double diff = setup.prior->depth.at(y, x) - frame.depth.at(y, x);
                sig.push_back(diff > 0 ? 1 : (diff < 0 ? -1 : 0));
            }
        }
    return sig;
}

inline double loss_value(const GaussianCloud& cloud, const LossSetup& setup) {
    const RenderedFrame frame = render_frame(cloud, setup.cam, setup.background);
    const LossBreakdown b =
        total_loss(setup.target, frame.color, setup.prior ? &*setup.prior : nullptr, frame.depth,
                   frame.depth_mask(), setup.lambda1, setup.lambda2);
    return b.total;
}

inline ParamGrads analytic_gradients(const GaussianCloud& cloud, const LossSetup& setup) {
    const RenderedFrame frame = render_frame(cloud, setup.cam, setup.background);
    const LossGradients lg =
        total_loss_backward(setup.target, frame.color, setup.prior ? &*setup.prior : nullptr,
                            frame.depth, frame.depth_mask(), setup.lambda1, setup.lambda2);
    return backward_render(cloud, setup.cam, frame, lg.d_color, lg.d_depth);
}

// Mutable views over every scalar parameter of a cloud, paired with the
// matching entry of a ParamGrads.
struct ParamRef {
    std::function<double&(GaussianCloud&)> value;
    std::function<double(const ParamGrads&)> grad;
    const char* kind;
};

inline std::vector<ParamRef> enumerate_params(const GaussianCloud& cloud) {
    std::vector<ParamRef> refs;
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        for (int k = 0; k < 3; ++k)
            refs.push_back({[i, k](GaussianCloud& c) -> double& {
                                return c.gaussians[i].position[k];
                            },
                            [i, k](const ParamGrads& g) { return g.position[i][k]; }, "position"});
        refs.push_back({[i](GaussianCloud& c) -> double& { return c.gaussians[i].rotation.w; },
                        [i](const ParamGrads& g) { return g.rotation[i][0]; }, "rotation"});
        refs.push_back({[i](GaussianCloud& c) -> double& { return c.gaussians[i].rotation.x; },
                        [i](const ParamGrads& g) { return g.rotation[i][1]; }, "rotation"});
        refs.push_back({[i](GaussianCloud& c) -> double& { return c.gaussians[i].rotation.y; },
                        [i](const ParamGrads& g) { return g.rotation[i][2]; }, "rotation"});
        refs.push_back({[i](GaussianCloud& c) -> double& { return c.gaussians[i].rotation.z; },
                        [i](const ParamGrads& g) { return g.rotation[i][3]; }, "rotation"});
        for (int k = 0; k < 3; ++k)
            refs.push_back({[i, k](GaussianCloud& c) -> double& {
                                return c.gaussians[i].log_scale[k];
                            },
                            [i, k](const ParamGrads& g) { return g.log_scale[i][k]; },
                            "log_scale"});
        refs.push_back(
            {[i](GaussianCloud& c) -> double& { return c.gaussians[i].opacity_logit; },
             [i](const ParamGrads& g) { return g.opacity_logit[i]; }, "opacity"});
        for (size_t k = 0; k < cloud.gaussians[i].sh.size(); ++k)
            for (int ch = 0; ch < 3; ++ch)
                refs.push_back({[i, k, ch](GaussianCloud& c) -> double& {
                                    return c.gaussians[i].sh[k][ch];
                                },
                                [i, k, ch](const ParamGrads& g) { return g.sh[i][k][ch]; }, "sh"});
    }
    return refs;
}

struct FdReport {
    int checked = 0;
    int worst_index = -1;
    double worst_abs_err = 0;
    double worst_rel_err = 0;
    bool all_within = true;
};

inline constexpr double kFdStep = 1e-4;

// Central differences for every parameter. Returns nullopt when any
// perturbation crosses a discrete boundary (caller resamples the scene).
inline std::optional<FdReport> finite_difference_check(GaussianCloud cloud,
                                                       const LossSetup& setup, double rel_tol,
                                                       double abs_tol) {
    const auto base_sig = render_signature(cloud, setup);
    const ParamGrads grads = analytic_gradients(cloud, setup);
    auto refs = enumerate_params(cloud);

    FdReport report;
    for (size_t p = 0; p < refs.size(); ++p) {
        double& slot = refs[p].value(cloud);
        const double original = slot;

        slot = original + kFdStep;
        if (render_signature(cloud, setup) != base_sig) return std::nullopt;
        const double plus = loss_value(cloud, setup);
        slot = original - kFdStep;
        if (render_signature(cloud, setup) != base_sig) return std::nullopt;
        const double minus = loss_value(cloud, setup);
        slot = original;

        const double fd = (plus - minus) / (2.0 * kFdStep);
        const double an = refs[p].grad(grads);
        const double abs_err = std::abs(fd - an);
        const double rel_err = abs_err / std::max({std::abs(fd), std::abs(an), 1e-300});
        ++report.checked;
        const bool ok = abs_err <= abs_tol || rel_err <= rel_tol;
        if (!ok) report.all_within = false;
        if (abs_err > report.worst_abs_err) {
            report.worst_abs_err = abs_err;
            report.worst_rel_err = rel_err;
            report.worst_index = static_cast<int>(p);
        }
    }
    return report;
}

}  // namespace splat::testing
