#pragma once

#include <cstdint>
#include <vector>

#include "splat/image.hpp"
#include "splat/rasterizer.hpp"
#include "splat/scene.hpp"

namespace splat {

// Per-Gaussian parameter gradients, shapes mirroring the cloud.
struct ParamGrads {
    std::vector<Vec3> position;
    std::vector<Vec4> rotation;  // (w, x, y, z), gradients w.r.t. the raw (unnormalized) quaternion
    std::vector<Vec3> log_scale;
    std::vector<double> opacity_logit;
    std::vector<std::vector<Vec3>> sh;
    // Densification statistics: norm of the screen-space position gradient
    // (scaled to NDC units) and whether the Gaussian survived culling.
    std::vector<double> pos2d_norm;
    std::vector<uint8_t> visible;

    void resize(const GaussianCloud& cloud);
};

// Analytic gradients of the composited color and normalized depth maps with
// respect to every Gaussian parameter. `frame` must come from render_frame on
// the same cloud and camera, with contributors kept.
ParamGrads backward_render(const GaussianCloud& cloud, const Camera& cam,
                           const RenderedFrame& frame, const Image& dL_dcolor,
                           const Image& dL_ddepth);

}  // namespace splat
