#pragma once

#include <cstddef>
#include <vector>

#include "splat/linalg.hpp"

namespace splat {

// Depth below which a point counts as behind the camera (world units).
inline constexpr double kMinCameraDepth = 1e-4;

// Minimum triangulation angle for two-view intersection (degrees).
inline constexpr double kMinTriangulationAngleDeg = 0.5;

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// One optimizable primitive. Scales live in log space and opacity as a
// logit so unconstrained updates keep them in their valid ranges; the
// quaternion is renormalized wherever a rotation matrix is formed.
struct Gaussian {
    Vec3 position;
    Quat rotation = Quat::identity();
    Vec3 log_scale;
    double opacity_logit = 0.0;
    std::vector<Vec3> sh;  // (degree+1)^2 coefficients, sh[0] is the DC term

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 scale() const {
        return {std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
    }
};

struct GaussianCloud {
    std::vector<Gaussian> gaussians;
    int sh_degree = 0;

    size_t size() const { return gaussians.size(); }
};

// Pinhole camera with a world-to-camera rigid pose: x_cam = rotation * x_world + translation.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::identity();
    Vec3 translation;

    Vec3 to_camera(const Vec3& x_world) const { return rotation * x_world + translation; }
    Vec3 center() const { return rotation.transpose() * (-translation); }
    bool in_bounds(const Vec2& px) const {
        return px.x >= 0 && px.x < width && px.y >= 0 && px.y < height;
    }
};

// Throws invalid_parameter unless intrinsics are positive, the principal
// point is inside the image and the rotation is orthonormal (det 1 +- 1e-9).
void validate_camera(const Camera& cam);

// Triangulated 3D point with its image observations.
struct SparsePoint {
    Vec3 position;
    Vec3 color{0.5, 0.5, 0.5};
    struct Observation {
        int view_id = 0;
        Vec2 pixel;
    };
    std::vector<Observation> observations;
};

// Sigma = R diag(s) diag(s) R^T for unit quaternion q and positive scales s.
Mat3 covariance_from_rs(const Quat& q, const Vec3& s);

// Spherical-harmonic basis values for a unit direction, constants folded in:
// color_channel = clamp(sum_k basis[k] * sh[k][channel] + 0.5, 0, 1).
// Fills (degree+1)^2 entries; when d_basis is non-null also fills the
// gradient of each basis value with respect to the direction.
void sh_basis(const Vec3& dir, int degree, double* basis, Vec3* d_basis = nullptr);

// View-dependent color from SH coefficients, clamped to [0,1] per channel.
Vec3 eval_sh(const std::vector<Vec3>& coeffs, const Vec3& view_dir, int degree);

struct ProjectedPoint {
    Vec2 pixel;
    double depth = 0;  // camera-space z
};

// Pinhole projection; throws behind_camera when camera-space z <= kMinCameraDepth.
ProjectedPoint project_point(const Vec3& x_world, const Camera& cam);

// Midpoint of the shortest segment between the two back-projected rays.
// Throws degenerate_geometry for coincident centers or near-parallel rays.
Vec3 triangulate_two_view(const Vec2& pixel_i, const Vec2& pixel_j, const Camera& cam_i,
                          const Camera& cam_j);

struct ReprojectionReport {
    double total = 0;           // sum of squared pixel errors over used observations
    size_t used = 0;            // observations that projected in front of their camera
    size_t behind_camera = 0;   // observations excluded because the point was behind
};

// Sum of squared reprojection errors of every observation of every point.
// cameras are indexed by Observation::view_id.
ReprojectionReport reprojection_error(const std::vector<SparsePoint>& points,
                                      const std::vector<Camera>& cameras);

// Companion camera of a rectified virtual stereo pair: identical intrinsics,
// center shifted by +b along the camera's own x axis, so the input camera is
// the left view and disparity fx*b/z is nonnegative.
Camera right_pose(const Camera& cam, double baseline);

}  // namespace splat
