#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "splat/image.hpp"
#include "splat/linalg.hpp"
#include "splat/scene.hpp"

namespace splat {

// Compositing constants shared by the forward and backward passes.
inline constexpr double kAlphaMax = 0.99;        // per-splat opacity saturation
inline constexpr double kTransmittanceStop = 1e-4;  // front-to-back early exit
inline constexpr double kCovLowPass = 0.3;       // floor added to projected covariance
inline constexpr double kAlphaNormEps = 1e-12;   // depth normalization guard
inline constexpr double kAlphaMaskThreshold = 0.5;  // depth validity cutoff

// A Gaussian projected to the image plane.
struct Splat2D {
    Vec2 mean2d;        // pixel coordinates
    Mat2 cov2d;         // projected covariance, low-pass included
    Mat2 inv_cov2d;
    double depth = 0;   // camera-space z
    Vec3 color;         // SH-evaluated, clamped to [0,1]
    uint8_t color_clamp_mask = 0;  // bit c set when channel c hit the [0,1] clamp
    double opacity = 0; // sigmoid of the stored logit
    int source_index = -1;  // index into the cloud
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds of the 3-sigma box
};

struct Contribution {
    int32_t splat;  // index into RenderedFrame::splats
    double alpha;   // post-clamp alpha actually composited
};

struct RenderedFrame {
    Image color;      // H x W x 3
    Image depth;      // alpha-normalized depth
    Image raw_depth;  // unnormalized accumulation
    Image alpha;
    Vec3 background;
    // Non-culled splats sorted by (depth, source index); contributor entries
    // per pixel reference this list, in the composited (front-to-back) order.
    std::vector<Splat2D> splats;
    std::vector<std::vector<Contribution>> contributors;

    const std::vector<Contribution>& contributors_at(int y, int x) const {
        return contributors[static_cast<size_t>(y) * color.width + x];
    }
    // Depth supervision / evaluation mask: alpha above the opacity cutoff.
    Mask depth_mask() const;
};

enum class RenderPath {
    tiled,      // 16x16 tile binning; the default
    reference,  // every pixel walks the full sorted splat list
};

struct RenderOptions {
    RenderPath path = RenderPath::tiled;
    bool keep_contributors = true;
};

// Projects one Gaussian; nullopt when it is culled (behind the camera or its
// 3-sigma box misses the image entirely).
std::optional<Splat2D> project_gaussian_2d(const Gaussian& g, const Camera& cam, int sh_degree);

// Front-to-back alpha compositing of the whole cloud.
RenderedFrame render_frame(const GaussianCloud& cloud, const Camera& cam, const Vec3& background,
                           const RenderOptions& options = {});

}  // namespace splat
