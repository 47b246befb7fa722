#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "splat/errors.hpp"
#include "splat/gradients.hpp"

using namespace splat;
using namespace splat::testing;

TEST_CASE("zero upstream gradients give exactly zero parameter gradients") {
    Rng rng(5);
    const Camera cam = test_camera(12, 12);
    const GaussianCloud cloud = random_scene(rng, 6, cam);
    const RenderedFrame frame = render_frame(cloud, cam, {0, 0, 0});
    const Image zero_color(12, 12, 3);
    const Image zero_depth(12, 12, 1);
    const ParamGrads grads = backward_render(cloud, cam, frame, zero_color, zero_depth);
    for (size_t i = 0; i < cloud.size(); ++i) {
        CHECK(grads.position[i].norm() == 0.0);
        CHECK(grads.rotation[i].norm() == 0.0);
        CHECK(grads.log_scale[i].norm() == 0.0);
        CHECK(grads.opacity_logit[i] == 0.0);
        for (const Vec3& c : grads.sh[i]) CHECK(c.norm() == 0.0);
    }
}

TEST_CASE("single splat DC gradient is alpha times the basis constant") {
    Camera cam;
    cam.width = cam.height = 9;
    cam.fx = cam.fy = 12;
    cam.cx = cam.cy = 4;

    GaussianCloud cloud;
    cloud.sh_degree = 0;
    Gaussian g;
    g.position = {0, 0, 5};
    g.log_scale = {0, 0, 0};
    g.opacity_logit = logit(0.6);
    g.sh.assign(1, Vec3{0.1, 0.1, 0.1});
    cloud.gaussians.push_back(g);

    const RenderedFrame frame = render_frame(cloud, cam, {0, 0, 0});
    const double alpha = frame.contributors_at(4, 4)[0].alpha;
    CHECK(alpha == doctest::Approx(0.6));

    Image d_color(9, 9, 3);
    d_color.at(4, 4, 0) = 1.0;  // upstream 1 on the center pixel, red channel
    const Image d_depth(9, 9, 1);
    const ParamGrads grads = backward_render(cloud, cam, frame, d_color, d_depth);
    // d(color)/d(sh_dc) is the Y00 constant, so dL/dsh = alpha * Y00.
    CHECK(grads.sh[0][0].x == doctest::Approx(alpha * 0.28209479177387814).epsilon(1e-12));
    CHECK(grads.sh[0][0].y == 0.0);
}

TEST_CASE("culled Gaussians receive exactly zero gradient") {
    Rng rng(8);
    const Camera cam = test_camera(12, 12);
    GaussianCloud cloud = random_scene(rng, 4, cam);
    Gaussian behind = cloud.gaussians[0];
    behind.position = {0, 0, -3};
    cloud.gaussians.push_back(behind);

    const RenderedFrame frame = render_frame(cloud, cam, {0, 0, 0});
    Image d_color = random_image(rng, 12, 12, 3);
    Image d_depth(12, 12, 1);
    const ParamGrads grads = backward_render(cloud, cam, frame, d_color, d_depth);
    const size_t culled = cloud.size() - 1;
    CHECK_FALSE(grads.visible[culled]);
    CHECK(grads.position[culled].norm() == 0.0);
    CHECK(grads.rotation[culled].norm() == 0.0);
    CHECK(grads.opacity_logit[culled] == 0.0);
}

TEST_CASE("backward is linear in the upstream gradients") {
    Rng rng(21);
    const Camera cam = test_camera(10, 10);
    const GaussianCloud cloud = random_scene(rng, 5, cam);
    const RenderedFrame frame = render_frame(cloud, cam, {0.2, 0.2, 0.2});

    Image g1c = random_image(rng, 10, 10, 3), g2c = random_image(rng, 10, 10, 3);
    Image g1d = random_image(rng, 10, 10, 1), g2d = random_image(rng, 10, 10, 1);
    const double a = 0.7, b = -1.3;
    Image combo_c(10, 10, 3), combo_d(10, 10, 1);
    for (size_t i = 0; i < combo_c.data.size(); ++i)
        combo_c.data[i] = a * g1c.data[i] + b * g2c.data[i];
    for (size_t i = 0; i < combo_d.data.size(); ++i)
        combo_d.data[i] = a * g1d.data[i] + b * g2d.data[i];

    const ParamGrads r1 = backward_render(cloud, cam, frame, g1c, g1d);
    const ParamGrads r2 = backward_render(cloud, cam, frame, g2c, g2d);
    const ParamGrads rc = backward_render(cloud, cam, frame, combo_c, combo_d);
    for (size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            CHECK(rc.position[i][k] ==
                  doctest::Approx(a * r1.position[i][k] + b * r2.position[i][k]).epsilon(1e-10));
            CHECK(rc.log_scale[i][k] ==
                  doctest::Approx(a * r1.log_scale[i][k] + b * r2.log_scale[i][k]).epsilon(1e-10));
        }
        for (int k = 0; k < 4; ++k)
            CHECK(rc.rotation[i][k] ==
                  doctest::Approx(a * r1.rotation[i][k] + b * r2.rotation[i][k]).epsilon(1e-10));
        CHECK(rc.opacity_logit[i] ==
              doctest::Approx(a * r1.opacity_logit[i] + b * r2.opacity_logit[i]).epsilon(1e-10));
    }
}

TEST_CASE("shape mismatches are rejected") {
    Rng rng(2);
    const Camera cam = test_camera(8, 8);
    const GaussianCloud cloud = random_scene(rng, 2, cam);
    const RenderedFrame frame = render_frame(cloud, cam, {0, 0, 0});
    CHECK_THROWS_AS(backward_render(cloud, cam, frame, Image(7, 8, 3), Image(8, 8, 1)), Error);
    CHECK_THROWS_AS(backward_render(cloud, cam, frame, Image(8, 8, 3), Image(8, 7, 1)), Error);
}

namespace {

// Shared by the unit suite and the acceptance runner: FD validation of the
// full Eq.-10 gradient on randomized scenes. Scenes whose perturbation
// crosses a discrete boundary are resampled (see helpers.hpp).
void run_fd_scenes(int scene_count, bool with_depth_term, uint64_t seed, int sh_degree = 0) {
    Rng rng(seed);
    int done = 0, attempts = 0;
    while (done < scene_count) {
        REQUIRE(attempts++ < scene_count * 30);
        const Camera cam = test_camera(16, 16);
        LossSetup setup;
        setup.cam = cam;
        setup.target = random_image(rng, 16, 16, 3);
        setup.lambda1 = 0.2;
        if (with_depth_term) {
            setup.lambda2 = 0.1;
            setup.prior = random_prior(rng, 16, 16);
        }
        const GaussianCloud cloud = random_scene(rng, 1 + static_cast<int>(rng.uniform_index(10)),
                                                 cam, sh_degree);
        const auto report = finite_difference_check(cloud, setup, 1e-3, 1e-6);
        if (!report) continue;  // boundary crossing; resample
        CHECK(report->all_within);
        if (!report->all_within)
            MESSAGE("worst param ", report->worst_index, " abs ", report->worst_abs_err, " rel ",
                    report->worst_rel_err);
        ++done;
    }
}

}  // namespace

TEST_CASE("finite differences: photometric-only loss") { run_fd_scenes(8, false, 1234); }

TEST_CASE("finite differences: photometric plus depth loss") { run_fd_scenes(8, true, 4321); }

TEST_CASE("finite differences: SH degree 2 view dependence") { run_fd_scenes(3, false, 999, 2); }
