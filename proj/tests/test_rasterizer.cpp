#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "splat/errors.hpp"
#include "splat/rasterizer.hpp"

using namespace splat;
using namespace splat::testing;

namespace {

Gaussian unit_gaussian_at(const Vec3& pos, double opacity_logit_value = 10.0) {
    Gaussian g;
    g.position = pos;
    g.rotation = Quat::identity();
    g.log_scale = {0, 0, 0};
    g.opacity_logit = opacity_logit_value;
    g.sh.assign(1, Vec3());
    return g;
}

Camera wide_camera() {
    Camera cam;
    cam.width = 100;
    cam.height = 100;
    cam.fx = cam.fy = 100;
    cam.cx = cam.cy = 50;
    return cam;
}

bool images_equal(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data == b.data;
}

}  // namespace

TEST_CASE("project_gaussian_2d isotropic oracle") {
    const Camera cam = wide_camera();
    const Gaussian g = unit_gaussian_at({0, 0, 5});
    const auto s = project_gaussian_2d(g, cam, 0);
    REQUIRE(s.has_value());
    CHECK(s->mean2d.x == doctest::Approx(50.0));
    CHECK(s->mean2d.y == doctest::Approx(50.0));
    CHECK(s->depth == doctest::Approx(5.0));
    // J = [[20,0,0],[0,20,0]] so J Sigma J^T = 400 I, plus the low pass.
    CHECK(s->cov2d(0, 0) == doctest::Approx(400.0 + kCovLowPass));
    CHECK(s->cov2d(1, 1) == doctest::Approx(400.0 + kCovLowPass));
    CHECK(s->cov2d(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("project_gaussian_2d culling") {
    const Camera cam = wide_camera();
    CHECK_FALSE(project_gaussian_2d(unit_gaussian_at({0, 0, -5}), cam, 0).has_value());

    Gaussian far_off = unit_gaussian_at({5e4, 0, 5});  // ~1e6 px off screen
    far_off.log_scale = {-3, -3, -3};
    CHECK_FALSE(project_gaussian_2d(far_off, cam, 0).has_value());
}

TEST_CASE("render_frame empty cloud yields background") {
    const Camera cam = test_camera(8, 8);
    const Vec3 bg{0.2, 0.4, 0.6};
    GaussianCloud cloud;
    const RenderedFrame frame = render_frame(cloud, cam, bg);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK(frame.color.rgb(y, x).x == bg.x);
            CHECK(frame.color.rgb(y, x).z == bg.z);
            CHECK(frame.alpha.at(y, x) == 0.0);
            CHECK(frame.depth.at(y, x) == 0.0);
        }
    CHECK(frame.depth_mask().count() == 0);
}

TEST_CASE("render_frame single saturated splat") {
    Camera cam;
    cam.width = cam.height = 9;
    cam.fx = cam.fy = 12;
    cam.cx = cam.cy = 4;  // integer center pixel
    const Vec3 bg{0.0, 0.0, 1.0};

    GaussianCloud cloud;
    cloud.sh_degree = 0;
    Gaussian g = unit_gaussian_at({0, 0, 5}, 30.0);  // opacity ~1, clamps to 0.99
    g.sh[0] = {(1.0 - 0.5) / 0.28209479177387814, (0.0 - 0.5) / 0.28209479177387814,
               (0.0 - 0.5) / 0.28209479177387814};  // pure red
    cloud.gaussians.push_back(g);

    const RenderedFrame frame = render_frame(cloud, cam, bg);
    const Vec3 c = frame.color.rgb(4, 4);
    CHECK(c.x == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(c.z == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(frame.alpha.at(4, 4) == doctest::Approx(0.99));
    CHECK(frame.depth.at(4, 4) == doctest::Approx(5.0).epsilon(1e-12));
    REQUIRE(frame.contributors_at(4, 4).size() == 1);
    CHECK(frame.contributors_at(4, 4)[0].alpha == kAlphaMax);
}

TEST_CASE("render_frame two-splat front-to-back oracle") {
    Camera cam;
    cam.width = cam.height = 9;
    cam.fx = cam.fy = 12;
    cam.cx = cam.cy = 4;
    const Vec3 bg{0, 0, 0};
    constexpr double kY00 = 0.28209479177387814;

    GaussianCloud cloud;
    cloud.sh_degree = 0;
    Gaussian front = unit_gaussian_at({0, 0, 2}, 0.0);  // sigmoid(0) = 0.5
    front.sh[0] = {0.5 / kY00, -0.5 / kY00, -0.5 / kY00};  // red
    Gaussian back = unit_gaussian_at({0, 0, 4}, 30.0);     // clamps to 0.99
    back.sh[0] = {-0.5 / kY00, -0.5 / kY00, 0.5 / kY00};   // blue
    cloud.gaussians.push_back(back);  // input order must not matter
    cloud.gaussians.push_back(front);

    const RenderedFrame frame = render_frame(cloud, cam, bg);
    const Vec3 c = frame.color.rgb(4, 4);
    CHECK(c.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.z == doctest::Approx(0.5 * 0.99).epsilon(1e-12));
    const double expected_depth = (0.5 * 2 + 0.495 * 4) / 0.995;
    CHECK(frame.depth.at(4, 4) == doctest::Approx(expected_depth).epsilon(1e-12));
    // Contributors are sorted front to back.
    REQUIRE(frame.contributors_at(4, 4).size() == 2);
    CHECK(frame.splats[frame.contributors_at(4, 4)[0].splat].depth == doctest::Approx(2.0));
}

TEST_CASE("render_frame matches the naive direct-summation oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const Camera cam = test_camera(4, 4);
        const GaussianCloud cloud = random_scene(rng, 1 + trial % 5, cam);
        const Vec3 bg{rng.uniform(), rng.uniform(), rng.uniform()};
        const RenderedFrame fast = render_frame(cloud, cam, bg);
        const RenderedFrame naive = naive_render(cloud, cam, bg);
        for (size_t i = 0; i < fast.color.data.size(); ++i)
            CHECK(std::abs(fast.color.data[i] - naive.color.data[i]) <= 1e-12);
        for (size_t i = 0; i < fast.depth.data.size(); ++i) {
            CHECK(std::abs(fast.raw_depth.data[i] - naive.raw_depth.data[i]) <= 1e-12);
            CHECK(std::abs(fast.alpha.data[i] - naive.alpha.data[i]) <= 1e-12);
            CHECK(std::abs(fast.depth.data[i] - naive.depth.data[i]) <= 1e-10);
        }
    }
}

TEST_CASE("tiled and reference paths are bit-identical") {
    Rng rng(55);
    for (int trial = 0; trial < 5; ++trial) {
        const Camera cam = test_camera(48, 40);
        const GaussianCloud cloud = random_scene(rng, 25, cam);
        RenderOptions tiled, reference;
        tiled.path = RenderPath::tiled;
        reference.path = RenderPath::reference;
        const RenderedFrame a = render_frame(cloud, cam, {0.1, 0.2, 0.3}, tiled);
        const RenderedFrame b = render_frame(cloud, cam, {0.1, 0.2, 0.3}, reference);
        CHECK(images_equal(a.color, b.color));
        CHECK(images_equal(a.depth, b.depth));
        CHECK(images_equal(a.alpha, b.alpha));
    }
}

TEST_CASE("permuting the cloud leaves the frame bit-identical") {
    Rng rng(77);
    const Camera cam = test_camera(16, 16);
    GaussianCloud cloud = random_scene(rng, 12, cam);
    const RenderedFrame before = render_frame(cloud, cam, {0, 0, 0});
    // Reverse is as good as any permutation: depths are distinct.
    std::reverse(cloud.gaussians.begin(), cloud.gaussians.end());
    const RenderedFrame after = render_frame(cloud, cam, {0, 0, 0});
    CHECK(images_equal(before.color, after.color));
    CHECK(images_equal(before.depth, after.depth));
    CHECK(images_equal(before.alpha, after.alpha));
}

TEST_CASE("alpha never decreases when a Gaussian is added") {
    Rng rng(303);
    // Opacities kept below 0.7 so the transmittance floor is never reached
    // and the monotonicity argument is exact.
    const auto capped_scene = [&](int count, const Camera& cam) {
        GaussianCloud cloud = random_scene(rng, count, cam);
        for (Gaussian& g : cloud.gaussians)
            g.opacity_logit = std::min(g.opacity_logit, logit(0.7));
        return cloud;
    };
    for (int trial = 0; trial < 100; ++trial) {
        const Camera cam = test_camera(12, 12);
        GaussianCloud cloud = capped_scene(1 + trial % 6, cam);
        const RenderedFrame before = render_frame(cloud, cam, {0, 0, 0});
        GaussianCloud extra = capped_scene(1, cam);
        cloud.gaussians.push_back(extra.gaussians[0]);
        const RenderedFrame after = render_frame(cloud, cam, {0, 0, 0});
        for (size_t i = 0; i < before.alpha.data.size(); ++i)
            CHECK(after.alpha.data[i] >= before.alpha.data[i] - 1e-12);
    }
}

TEST_CASE("pixels without coverage keep the exact background") {
    Rng rng(404);
    const Camera cam = test_camera(24, 24);
    GaussianCloud cloud = random_scene(rng, 3, cam);
    for (Gaussian& g : cloud.gaussians) g.log_scale = {-3.5, -3.5, -3.5};
    const Vec3 bg{0.123456789, 0.5, 0.987654321};
    const RenderedFrame frame = render_frame(cloud, cam, bg);
    int empty = 0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            if (!frame.contributors_at(y, x).empty()) continue;
            ++empty;
            const Vec3 c = frame.color.rgb(y, x);
            CHECK(c.x == bg.x);
            CHECK(c.y == bg.y);
            CHECK(c.z == bg.z);
        }
    CHECK(empty > 0);
}

TEST_CASE("isolated opaque splat reports its own depth") {
    const Camera cam = test_camera(16, 16);
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    Gaussian g = unit_gaussian_at({0, 0, 4.2}, 5.0);
    g.log_scale = {-1, -1, -1};
    cloud.gaussians.push_back(g);
    const RenderedFrame frame = render_frame(cloud, cam, {0, 0, 0});
    const auto p = project_gaussian_2d(g, cam, 0);
    REQUIRE(p.has_value());
    const int px = static_cast<int>(std::lround(p->mean2d.x));
    const int py = static_cast<int>(std::lround(p->mean2d.y));
    CHECK(frame.depth.at(py, px) == doctest::Approx(4.2).epsilon(1e-6));
}

TEST_CASE("non-finite parameters are reported with the offending index") {
    const Camera cam = test_camera(8, 8);
    Rng rng(1);
    GaussianCloud cloud = random_scene(rng, 3, cam);
    cloud.gaussians[2].position.x = std::numeric_limits<double>::quiet_NaN();
    try {
        render_frame(cloud, cam, {0, 0, 0});
        FAIL("expected training_state_corrupt");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::training_state_corrupt);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}
