#include "splat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "splat/errors.hpp"

namespace splat {

namespace {

constexpr int kTileSize = 16;

bool gaussian_finite(const Gaussian& g) {
    if (!all_finite(g.position) || !all_finite(g.rotation) || !all_finite(g.log_scale) ||
        !std::isfinite(g.opacity_logit))
        return false;
    for (const Vec3& c : g.sh)
        if (!all_finite(c)) return false;
    return true;
}

}  // namespace

Mask RenderedFrame::depth_mask() const {
    Mask m(alpha.width, alpha.height);
    for (int y = 0; y < alpha.height; ++y)
        for (int x = 0; x < alpha.width; ++x)
            m.set(y, x, alpha.at(y, x) > kAlphaMaskThreshold);
    return m;
}

std::optional<Splat2D> project_gaussian_2d(const Gaussian& g, const Camera& cam, int sh_degree) {
    const Vec3 p = cam.to_camera(g.position);
    if (p.z <= kMinCameraDepth) return std::nullopt;

    Splat2D s;
    s.depth = p.z;
    s.mean2d = {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy};
    s.source_index = -1;

    // Sigma' = J W Sigma W^T J^T with J the pinhole Jacobian at the mean.
    const Mat3 cov = covariance_from_rs(g.rotation, g.scale());
    const Mat3 cov_cam = cam.rotation * cov * cam.rotation.transpose();
    const double z2 = p.z * p.z;
    const double j00 = cam.fx / p.z, j02 = -cam.fx * p.x / z2;
    const double j11 = cam.fy / p.z, j12 = -cam.fy * p.y / z2;
    // Rows of J * cov_cam (2x3).
    const Vec3 a0 = cov_cam.row(0) * j00 + cov_cam.row(2) * j02;
    const Vec3 a1 = cov_cam.row(1) * j11 + cov_cam.row(2) * j12;
    Mat2 cov2d{a0.x * j00 + a0.z * j02, a0.y * j11 + a0.z * j12,
               a1.x * j00 + a1.z * j02, a1.y * j11 + a1.z * j12};
    cov2d(0, 0) += kCovLowPass;
    cov2d(1, 1) += kCovLowPass;
    s.cov2d = cov2d;
    s.inv_cov2d = cov2d.inverse();

    const double radius = 3.0 * std::sqrt(symmetric_eigenvalues(cov2d).x);
    s.x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x - radius)));
    s.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(s.mean2d.x + radius)));
    s.y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y - radius)));
    s.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(s.mean2d.y + radius)));
    if (s.x0 > s.x1 || s.y0 > s.y1) return std::nullopt;

    const Vec3 view_dir = (g.position - cam.center()).normalized();
    const int n = sh_coeff_count(sh_degree);
    double basis[16];
    sh_basis(view_dir, sh_degree, basis);
    Vec3 raw{0.5, 0.5, 0.5};
    for (int i = 0; i < n; ++i) raw += g.sh[i] * basis[i];
    for (int c = 0; c < 3; ++c) {
        if (raw[c] < 0.0 || raw[c] > 1.0) s.color_clamp_mask |= uint8_t(1u << c);
    }
    s.color = {std::clamp(raw.x, 0.0, 1.0), std::clamp(raw.y, 0.0, 1.0),
               std::clamp(raw.z, 0.0, 1.0)};
    s.opacity = g.opacity();
    return s;
}

RenderedFrame render_frame(const GaussianCloud& cloud, const Camera& cam, const Vec3& background,
                           const RenderOptions& options) {
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        if (!gaussian_finite(cloud.gaussians[i]))
            fail(ErrorCode::training_state_corrupt,
                 "render_frame: non-finite parameter in Gaussian " + std::to_string(i));
    }

    RenderedFrame frame;
    frame.color = Image(cam.width, cam.height, 3);
    frame.depth = Image(cam.width, cam.height, 1);
    frame.raw_depth = Image(cam.width, cam.height, 1);
    frame.alpha = Image(cam.width, cam.height, 1);
    frame.background = background;
    if (options.keep_contributors) frame.contributors.resize(frame.color.pixel_count());

    frame.splats.reserve(cloud.size());
    for (size_t i = 0; i < cloud.gaussians.size(); ++i) {
        if (auto s = project_gaussian_2d(cloud.gaussians[i], cam, cloud.sh_degree)) {
            s->source_index = static_cast<int>(i);
            frame.splats.push_back(*s);
        }
    }
    std::sort(frame.splats.begin(), frame.splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source_index < b.source_index;
    });

    // Tile bins hold splat indices in the global sorted order; the reference
    // path uses a single bin covering the whole image. Both walk identical
    // per-pixel sequences, so their outputs are bit-identical.
    const int n_splats = static_cast<int>(frame.splats.size());
    int tiles_x = 1, tiles_y = 1, tile = std::max(cam.width, cam.height);
    if (options.path == RenderPath::tiled) {
        tile = kTileSize;
        tiles_x = (cam.width + tile - 1) / tile;
        tiles_y = (cam.height + tile - 1) / tile;
    }
    std::vector<std::vector<int32_t>> bins(static_cast<size_t>(tiles_x) * tiles_y);
    for (int si = 0; si < n_splats; ++si) {
        const Splat2D& s = frame.splats[si];
        for (int ty = s.y0 / tile; ty <= s.y1 / tile; ++ty)
            for (int tx = s.x0 / tile; tx <= s.x1 / tile; ++tx)
                bins[static_cast<size_t>(ty) * tiles_x + tx].push_back(si);
    }

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const auto& bin = bins[static_cast<size_t>(y / tile) * tiles_x + x / tile];
            double transmittance = 1.0;
            Vec3 color_acc;
            double raw_depth = 0.0, alpha_acc = 0.0;
            std::vector<Contribution>* contribs =
                options.keep_contributors
                    ? &frame.contributors[static_cast<size_t>(y) * cam.width + x]
                    : nullptr;
            for (int32_t si : bin) {
                if (transmittance < kTransmittanceStop) break;
                const Splat2D& s = frame.splats[si];
                if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
                const Vec2 d{x - s.mean2d.x, y - s.mean2d.y};
                const double maha = d.dot(s.inv_cov2d * d);
                double alpha = s.opacity * std::exp(-0.5 * maha);
                if (alpha > kAlphaMax) alpha = kAlphaMax;
                const double w = alpha * transmittance;
                color_acc += s.color * w;
                raw_depth += s.depth * w;
                alpha_acc += w;
                if (contribs) contribs->push_back({si, alpha});
                transmittance *= 1.0 - alpha;
            }
            color_acc += background * transmittance;
            frame.color.set_rgb(y, x, color_acc);
            frame.raw_depth.at(y, x) = raw_depth;
            frame.alpha.at(y, x) = alpha_acc;
            frame.depth.at(y, x) = raw_depth / std::max(alpha_acc, kAlphaNormEps);
        }
    }
    return frame;
}

}  // namespace splat
