#include "splat/scene.hpp"

#include <algorithm>
#include <cmath>

#include "splat/errors.hpp"

namespace splat {

namespace {

// Real SH constants, matching the usual Gaussian-splatting convention.
constexpr double kSH0 = 0.28209479177387814;
constexpr double kSH1 = 0.4886025119029199;
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                            0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};

}  // namespace

void validate_camera(const Camera& cam) {
    if (!(cam.fx > 0) || !(cam.fy > 0))
        fail(ErrorCode::invalid_parameter, "camera: focal lengths must be positive");
    if (cam.width <= 0 || cam.height <= 0)
        fail(ErrorCode::invalid_parameter, "camera: image size must be positive");
    if (!(cam.cx >= 0 && cam.cx < cam.width) || !(cam.cy >= 0 && cam.cy < cam.height))
        fail(ErrorCode::invalid_parameter, "camera: principal point outside image");
    const Mat3 should_be_identity = cam.rotation * cam.rotation.transpose() - Mat3::identity();
    if (should_be_identity.max_abs() > 1e-9)
        fail(ErrorCode::invalid_parameter, "camera: rotation is not orthonormal");
    const Vec3 r0 = cam.rotation.row(0), r1 = cam.rotation.row(1), r2 = cam.rotation.row(2);
    if (std::abs(r0.cross(r1).dot(r2) - 1.0) > 1e-9)
        fail(ErrorCode::invalid_parameter, "camera: rotation determinant is not +1");
    if (!all_finite(cam.translation))
        fail(ErrorCode::invalid_parameter, "camera: non-finite translation");
}

Mat3 covariance_from_rs(const Quat& q, const Vec3& s) {
    if (!all_finite(q) || !all_finite(s))
        fail(ErrorCode::invalid_parameter, "covariance_from_rs: non-finite input");
    if (!(s.x > 0 && s.y > 0 && s.z > 0))
        fail(ErrorCode::invalid_parameter, "covariance_from_rs: scales must be positive");
    const Mat3 r = q.to_matrix();
    const Mat3 rs = r * Mat3::diagonal(s);
    return rs * rs.transpose();
}

void sh_basis(const Vec3& dir, int degree, double* basis, Vec3* d_basis) {
    const double x = dir.x, y = dir.y, z = dir.z;
    const int n = sh_coeff_count(degree);
    if (d_basis)
        for (int i = 0; i < n; ++i) d_basis[i] = Vec3();

    basis[0] = kSH0;
    if (degree < 1) return;

    basis[1] = -kSH1 * y;
    basis[2] = kSH1 * z;
    basis[3] = -kSH1 * x;
    if (d_basis) {
        d_basis[1] = {0, -kSH1, 0};
        d_basis[2] = {0, 0, kSH1};
        d_basis[3] = {-kSH1, 0, 0};
    }
    if (degree < 2) return;

    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    basis[4] = kSH2[0] * xy;
    basis[5] = kSH2[1] * yz;
    basis[6] = kSH2[2] * (2 * zz - xx - yy);
    basis[7] = kSH2[3] * xz;
    basis[8] = kSH2[4] * (xx - yy);
    if (d_basis) {
        d_basis[4] = {kSH2[0] * y, kSH2[0] * x, 0};
        d_basis[5] = {0, kSH2[1] * z, kSH2[1] * y};
        d_basis[6] = {-2 * kSH2[2] * x, -2 * kSH2[2] * y, 4 * kSH2[2] * z};
        d_basis[7] = {kSH2[3] * z, 0, kSH2[3] * x};
        d_basis[8] = {2 * kSH2[4] * x, -2 * kSH2[4] * y, 0};
    }
    if (degree < 3) return;

    basis[9] = kSH3[0] * y * (3 * xx - yy);
    basis[10] = kSH3[1] * xy * z;
    basis[11] = kSH3[2] * y * (4 * zz - xx - yy);
    basis[12] = kSH3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    basis[13] = kSH3[4] * x * (4 * zz - xx - yy);
    basis[14] = kSH3[5] * z * (xx - yy);
    basis[15] = kSH3[6] * x * (xx - 3 * yy);
    if (d_basis) {
        d_basis[9] = {kSH3[0] * 6 * xy, kSH3[0] * (3 * xx - 3 * yy), 0};
        d_basis[10] = {kSH3[1] * yz, kSH3[1] * xz, kSH3[1] * xy};
        d_basis[11] = {-2 * kSH3[2] * xy, kSH3[2] * (4 * zz - xx - 3 * yy), 8 * kSH3[2] * yz};
        d_basis[12] = {-6 * kSH3[3] * xz, -6 * kSH3[3] * yz, kSH3[3] * (6 * zz - 3 * xx - 3 * yy)};
        d_basis[13] = {kSH3[4] * (4 * zz - 3 * xx - yy), -2 * kSH3[4] * xy, 8 * kSH3[4] * xz};
        d_basis[14] = {2 * kSH3[5] * xz, -2 * kSH3[5] * yz, kSH3[5] * (xx - yy)};
        d_basis[15] = {kSH3[6] * (3 * xx - 3 * yy), -6 * kSH3[6] * xy, 0};
    }
}

Vec3 eval_sh(const std::vector<Vec3>& coeffs, const Vec3& view_dir, int degree) {
    if (degree < 0 || degree > 3)
        fail(ErrorCode::invalid_parameter, "eval_sh: degree must be in 0..3");
    const int n = sh_coeff_count(degree);
    if (static_cast<int>(coeffs.size()) != n)
        fail(ErrorCode::shape_mismatch, "eval_sh: coefficient count does not match degree");

    double basis[16];
    sh_basis(view_dir, degree, basis);
    Vec3 c{0.5, 0.5, 0.5};
    for (int i = 0; i < n; ++i) c += coeffs[i] * basis[i];
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}

ProjectedPoint project_point(const Vec3& x_world, const Camera& cam) {
    const Vec3 p = cam.to_camera(x_world);
    if (p.z <= kMinCameraDepth)
        fail(ErrorCode::behind_camera, "project_point: point at or behind the image plane");
    return {{cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy}, p.z};
}

Vec3 triangulate_two_view(const Vec2& pixel_i, const Vec2& pixel_j, const Camera& cam_i,
                          const Camera& cam_j) {
    const Vec3 ci = cam_i.center();
    const Vec3 cj = cam_j.center();
    if ((ci - cj).norm() < 1e-12)
        fail(ErrorCode::degenerate_geometry, "triangulate_two_view: coincident camera centers");

    const auto back_project = [](const Vec2& px, const Camera& cam) {
        const Vec3 dir_cam{(px.x - cam.cx) / cam.fx, (px.y - cam.cy) / cam.fy, 1.0};
        return (cam.rotation.transpose() * dir_cam).normalized();
    };
    const Vec3 di = back_project(pixel_i, cam_i);
    const Vec3 dj = back_project(pixel_j, cam_j);

    const double cos_angle = std::clamp(di.dot(dj), -1.0, 1.0);
    const double angle_deg = std::acos(cos_angle) * 180.0 / 3.14159265358979323846;
    if (angle_deg < kMinTriangulationAngleDeg)
        fail(ErrorCode::degenerate_geometry, "triangulate_two_view: rays nearly parallel");

    // Closest points on the two rays: minimize |ci + s di - cj - t dj|.
    const Vec3 w = ci - cj;
    const double a = di.dot(di), b = di.dot(dj), c = dj.dot(dj);
    const double d = di.dot(w), e = dj.dot(w);
    const double denom = a * c - b * b;
    const double s = (b * e - c * d) / denom;
    const double t = (a * e - b * d) / denom;
    const Vec3 pi = ci + di * s;
    const Vec3 pj = cj + dj * t;
    return (pi + pj) * 0.5;
}

ReprojectionReport reprojection_error(const std::vector<SparsePoint>& points,
                                      const std::vector<Camera>& cameras) {
    ReprojectionReport report;
    for (const SparsePoint& point : points) {
        for (const auto& obs : point.observations) {
            if (obs.view_id < 0 || obs.view_id >= static_cast<int>(cameras.size()))
                fail(ErrorCode::invalid_parameter,
                     "reprojection_error: observation references unknown camera");
            const Camera& cam = cameras[obs.view_id];
            const Vec3 p = cam.to_camera(point.position);
            if (p.z <= kMinCameraDepth) {
                ++report.behind_camera;
                continue;
            }
            const Vec2 px{cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy};
            const Vec2 diff = px - obs.pixel;
            report.total += diff.dot(diff);
            ++report.used;
        }
    }
    return report;
}

Camera right_pose(const Camera& cam, double baseline) {
    if (!(baseline >= 0) || !std::isfinite(baseline))
        fail(ErrorCode::invalid_parameter, "right_pose: baseline must be finite and >= 0");
    // Shifting the camera by +b along its own x axis subtracts b from every
    // point's camera-space x, so projected x drops by fx*b/z: the companion
    // is the right view of a rectified pair.
    Camera right = cam;
    right.translation.x -= baseline;
    return right;
}

}  // namespace splat
