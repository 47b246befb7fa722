#include <doctest.h>

#include <cmath>

#include "splat/errors.hpp"
#include "splat/rng.hpp"
#include "splat/scene.hpp"

using namespace splat;

namespace {

Camera basic_camera(double fx = 100, double fy = 100, double cx = 50, double cy = 50,
                    int w = 100, int h = 100) {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = w;
    cam.height = h;
    return cam;
}

Quat random_unit_quat(Rng& rng) {
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return q.normalized();
}

// Explicit R S S^T R^T product, kept independent of covariance_from_rs.
Mat3 covariance_oracle(const Quat& q, const Vec3& s) {
    const Mat3 r = q.to_matrix();
    const Mat3 d = Mat3::diagonal({s.x * s.x, s.y * s.y, s.z * s.z});
    return r * d * r.transpose();
}

}  // namespace

TEST_CASE("covariance_from_rs identity cases") {
    const Mat3 id = covariance_from_rs(Quat::identity(), {1, 1, 1});
    CHECK((id - Mat3::identity()).max_abs() == doctest::Approx(0.0).epsilon(1e-15));

    const Mat3 diag = covariance_from_rs(Quat::identity(), {2, 3, 4});
    CHECK(diag(0, 0) == doctest::Approx(4.0));
    CHECK(diag(1, 1) == doctest::Approx(9.0));
    CHECK(diag(2, 2) == doctest::Approx(16.0));
    CHECK(diag(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("covariance_from_rs 90 degree rotation about z") {
    const Quat q = Quat::from_axis_angle({0, 0, 1}, M_PI / 2);
    const Mat3 cov = covariance_from_rs(q, {2, 1, 1});
    const Mat3 expect = covariance_oracle(q, {2, 1, 1});
    CHECK((cov - expect).max_abs() < 1e-12);
    // Rotating the x-elongated ellipsoid about z swaps the x/y variances.
    CHECK(cov(0, 0) == doctest::Approx(1.0));
    CHECK(cov(1, 1) == doctest::Approx(4.0));
    CHECK(cov(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("covariance_from_rs rejects bad input") {
    CHECK_THROWS_AS(covariance_from_rs(Quat::identity(), {0, 1, 1}), Error);
    CHECK_THROWS_AS(covariance_from_rs(Quat::identity(),
                                       {std::numeric_limits<double>::quiet_NaN(), 1, 1}),
                    Error);
}

TEST_CASE("covariance_from_rs randomized symmetry and eigenvalues") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Quat q = random_unit_quat(rng);
        const Vec3 s{std::exp(rng.uniform(-1, 1)), std::exp(rng.uniform(-1, 1)),
                     std::exp(rng.uniform(-1, 1))};
        const Mat3 cov = covariance_from_rs(q, s);
        CHECK((cov - cov.transpose()).max_abs() < 1e-12);
        // Eigenvalues must be the squared scales: check det and trace match,
        // and that cov * (R e_k) = s_k^2 (R e_k) for each axis.
        const Mat3 r = q.to_matrix();
        for (int k = 0; k < 3; ++k) {
            const Vec3 axis = r.col(k);
            const Vec3 mapped = cov * axis;
            const double lambda = s[k] * s[k];
            CHECK((mapped - axis * lambda).norm() < 1e-9 * std::max(1.0, lambda));
        }
    }
}

TEST_CASE("eval_sh degree 0") {
    const std::vector<Vec3> zero{{0, 0, 0}};
    const Vec3 c = eval_sh(zero, {0, 0, 1}, 0);
    CHECK(c.x == doctest::Approx(0.5));
    CHECK(c.y == doctest::Approx(0.5));
    CHECK(c.z == doctest::Approx(0.5));

    // c00 * Y00 = 0.25 -> 0.75 on every channel, for any direction.
    const double c00 = 0.25 / 0.2820948;
    const std::vector<Vec3> dc{{c00, c00, c00}};
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        dir = dir.normalized();
        const Vec3 col = eval_sh(dc, dir, 0);
        CHECK(col.x == doctest::Approx(0.75).epsilon(1e-6));
        CHECK(col.y == doctest::Approx(0.75).epsilon(1e-6));
    }
}

TEST_CASE("eval_sh degree 1 is direction dependent") {
    std::vector<Vec3> coeffs(4, Vec3());
    coeffs[2] = {0.3, 0.1, -0.2};  // z-aligned band
    const Vec3 dir{0, 0, 1};
    const Vec3 a = eval_sh(coeffs, dir, 1);
    const Vec3 b = eval_sh(coeffs, -dir, 1);
    CHECK(a.x != b.x);
    CHECK(a.z != b.z);
}

TEST_CASE("eval_sh rejects mismatched coefficient counts") {
    const std::vector<Vec3> coeffs(3, Vec3());
    CHECK_THROWS_AS(eval_sh(coeffs, {0, 0, 1}, 1), Error);
}

TEST_CASE("project_point pinhole arithmetic") {
    const Camera cam = basic_camera();
    const auto on_axis = project_point({0, 0, 5}, cam);
    CHECK(on_axis.pixel.x == doctest::Approx(50.0));
    CHECK(on_axis.pixel.y == doctest::Approx(50.0));
    CHECK(on_axis.depth == doctest::Approx(5.0));

    const auto off_axis = project_point({1, 0, 5}, cam);
    CHECK(off_axis.pixel.x == doctest::Approx(70.0));
    CHECK(off_axis.pixel.y == doctest::Approx(50.0));

    CHECK_THROWS_AS(project_point({0, 0, -1}, cam), Error);
}

TEST_CASE("triangulate_two_view recovers forward projections") {
    const Camera cam_i = basic_camera();
    Camera cam_j = basic_camera();
    cam_j.translation = {-1, 0, 0};  // center at (1,0,0)

    const Vec3 x{0, 0, 5};
    const auto pi = project_point(x, cam_i);
    const auto pj = project_point(x, cam_j);
    const Vec3 rec = triangulate_two_view(pi.pixel, pj.pixel, cam_i, cam_j);
    CHECK((rec - x).norm() < 1e-6);
}

TEST_CASE("triangulate_two_view degenerate geometry") {
    const Camera cam = basic_camera();
    CHECK_THROWS_AS(triangulate_two_view({50, 50}, {50, 50}, cam, cam), Error);

    // Distinct centers but nearly parallel rays: looking at a point far away
    // with a tiny baseline.
    Camera cam_j = basic_camera();
    cam_j.translation = {-1e-7, 0, 0};
    try {
        triangulate_two_view({50, 50}, {50, 50}, cam, cam_j);
        FAIL("expected degenerate_geometry");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_geometry);
    }
}

TEST_CASE("triangulate_two_view tolerates pixel noise") {
    Rng rng(11);
    const Camera cam_i = basic_camera();
    Camera cam_j = basic_camera();
    cam_j.translation = {-1, 0, 0};
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(4, 8)};
        auto pi = project_point(x, cam_i);
        auto pj = project_point(x, cam_j);
        pi.pixel.x += rng.uniform(-0.5, 0.5);
        pi.pixel.y += rng.uniform(-0.5, 0.5);
        pj.pixel.x += rng.uniform(-0.5, 0.5);
        pj.pixel.y += rng.uniform(-0.5, 0.5);
        const Vec3 rec = triangulate_two_view(pi.pixel, pj.pixel, cam_i, cam_j);
        const auto ri = project_point(rec, cam_i);
        const auto rj = project_point(rec, cam_j);
        CHECK((ri.pixel - pi.pixel).norm() < 1.0);
        CHECK((rj.pixel - pj.pixel).norm() < 1.0);
    }
}

TEST_CASE("triangulation round trip over random geometry") {
    Rng rng(13);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Camera cam_i = basic_camera();
        Camera cam_j = basic_camera();
        cam_j.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5)};
        if (cam_j.translation.norm() < 1e-3) continue;
        const Vec3 x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(3, 10)};
        const Vec3 ci = cam_i.center(), cj = cam_j.center();
        const Vec3 di = (x - ci).normalized(), dj = (x - cj).normalized();
        const double angle = std::acos(std::clamp(di.dot(dj), -1.0, 1.0)) * 180.0 / M_PI;
        if (angle < 2.0) continue;
        ProjectedPoint pi, pj;
        try {
            pi = project_point(x, cam_i);
            pj = project_point(x, cam_j);
        } catch (const Error&) {
            continue;
        }
        const Vec3 rec = triangulate_two_view(pi.pixel, pj.pixel, cam_i, cam_j);
        CHECK((rec - x).norm() / x.norm() < 1e-6);
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("reprojection_error") {
    const Camera cam = basic_camera();
    std::vector<Camera> cams{cam};

    SparsePoint p;
    p.position = {0.3, -0.2, 6};
    p.observations.push_back({0, project_point(p.position, cam).pixel});
    CHECK(reprojection_error({p}, cams).total == doctest::Approx(0.0));

    SparsePoint off = p;
    off.observations[0].pixel.x += 1.0;
    CHECK(reprojection_error({off}, cams).total == doctest::Approx(1.0));

    // Offsets (3,4) and (0,1): 25 + 1 = 26.
    SparsePoint two = p;
    two.observations[0].pixel.x += 3.0;
    two.observations[0].pixel.y += 4.0;
    two.observations.push_back({0, project_point(p.position, cam).pixel});
    two.observations[1].pixel.y += 1.0;
    CHECK(reprojection_error({two}, cams).total == doctest::Approx(26.0));

    SparsePoint behind;
    behind.position = {0, 0, -5};
    behind.observations.push_back({0, {50, 50}});
    const auto report = reprojection_error({behind}, cams);
    CHECK(report.behind_camera == 1);
    CHECK(report.used == 0);
    CHECK(report.total == doctest::Approx(0.0));
}

TEST_CASE("right_pose rectified geometry") {
    const Camera cam = basic_camera();

    SUBCASE("zero baseline is the identity") {
        const Camera same = right_pose(cam, 0.0);
        CHECK(same.translation.x == cam.translation.x);
        CHECK(same.translation.y == cam.translation.y);
        CHECK((same.rotation - cam.rotation).max_abs() == 0.0);
    }

    SUBCASE("disparity fx*b/z at a known depth") {
        const Camera right = right_pose(cam, 0.1);
        const Vec3 x{0.2, -0.1, 5};
        const auto pl = project_point(x, cam);
        const auto pr = project_point(x, right);
        CHECK(pl.pixel.x - pr.pixel.x == doctest::Approx(100 * 0.1 / 5).epsilon(1e-12));
        CHECK(std::abs(pl.pixel.y - pr.pixel.y) < 1e-9);
    }

    SUBCASE("1000 random points stay rectified with nonnegative disparity") {
        Rng rng(17);
        // A rotated camera exercises the general pose path.
        Camera cam_rot = basic_camera();
        cam_rot.rotation = Quat::from_axis_angle({0.3, 1, -0.2}, 0.4).to_matrix();
        cam_rot.translation = {0.2, -0.3, 0.5};
        const Camera right = right_pose(cam_rot, 0.25);
        int tested = 0;
        while (tested < 1000) {
            const Vec3 x_cam{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 12)};
            // Build the world point from camera coordinates so depth is known.
            const Vec3 x = cam_rot.rotation.transpose() * (x_cam - cam_rot.translation);
            const auto pl = project_point(x, cam_rot);
            const auto pr = project_point(x, right);
            CHECK(std::abs(pl.pixel.y - pr.pixel.y) < 1e-9);
            const double expected = cam_rot.fx * 0.25 / pl.depth;
            CHECK(pl.pixel.x - pr.pixel.x == doctest::Approx(expected).epsilon(1e-9));
            CHECK(pl.pixel.x - pr.pixel.x >= 0);
            ++tested;
        }
    }
}

TEST_CASE("camera validation") {
    Camera bad = basic_camera();
    bad.fx = -1;
    CHECK_THROWS_AS(validate_camera(bad), Error);

    Camera skewed = basic_camera();
    skewed.rotation(0, 1) = 0.5;
    CHECK_THROWS_AS(validate_camera(skewed), Error);

    CHECK_NOTHROW(validate_camera(basic_camera()));
}
