#include "splat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "splat/errors.hpp"
#include "splat/rng.hpp"

namespace fs = std::filesystem;

namespace splat {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

Mat3 euler_xyz_deg(const Vec3& deg) {
    const double ax = deg.x * kPi / 180.0, ay = deg.y * kPi / 180.0, az = deg.z * kPi / 180.0;
    const Mat3 rx{1, 0, 0, 0, std::cos(ax), -std::sin(ax), 0, std::sin(ax), std::cos(ax)};
    const Mat3 ry{std::cos(ay), 0, std::sin(ay), 0, 1, 0, -std::sin(ay), 0, std::cos(ay)};
    const Mat3 rz{std::cos(az), -std::sin(az), 0, std::sin(az), std::cos(az), 0, 0, 0, 1};
    return rz * ry * rx;
}

// Deterministic lattice hash in [0, 1).
double lattice_hash(int64_t x, int64_t y, uint64_t seed) {
    uint64_t h = seed;
    h ^= static_cast<uint64_t>(x) * 0x9E3779B97F4A7C15ull;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
    h ^= static_cast<uint64_t>(y) * 0xC2B2AE3D27D4EB4Full;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    h ^= h >> 31;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise in [-1, 1].
double value_noise(double u, double v, uint64_t seed) {
    const double fu = std::floor(u), fv = std::floor(v);
    const int64_t iu = static_cast<int64_t>(fu), iv = static_cast<int64_t>(fv);
    const double tu = u - fu, tv = v - fv;
    const double a = lattice_hash(iu, iv, seed), b = lattice_hash(iu + 1, iv, seed);
    const double c = lattice_hash(iu, iv + 1, seed), d = lattice_hash(iu + 1, iv + 1, seed);
    const double top = a + (b - a) * tu;
    const double bot = c + (d - c) * tu;
    return 2.0 * (top + (bot - top) * tv) - 1.0;
}

struct Hit {
    double t = std::numeric_limits<double>::max();
    Vec3 color;
};

Vec3 texture_color(const SynthPrimitive& prim, double u, double v, uint64_t seed) {
    const int64_t cu = static_cast<int64_t>(std::floor(u / prim.checker_scale));
    const int64_t cv = static_cast<int64_t>(std::floor(v / prim.checker_scale));
    Vec3 c = ((cu + cv) & 1) == 0 ? prim.color_a : prim.color_b;
    if (prim.noise_amp > 0) {
        // Two octaves keep texture at both checker and pixel granularity.
        const double n = value_noise(u / prim.noise_scale, v / prim.noise_scale, seed) +
                         0.5 * value_noise(2.0 * u / prim.noise_scale + 17.0,
                                           2.0 * v / prim.noise_scale - 31.0, seed ^ 0xABCDEF);
        const double amp = prim.noise_amp * n / 1.5;
        c += Vec3(amp, amp, amp);
    }
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}

// Intersects one primitive; updates hit if closer. Texture seed mixes the
// primitive index so neighboring primitives decorrelate.
void intersect(const SynthPrimitive& prim, size_t prim_index, uint64_t scene_seed,
               const Vec3& origin, const Vec3& dir, Hit& hit) {
    const uint64_t seed = scene_seed * 1315423911ull + prim_index;
    const Mat3 rot = euler_xyz_deg(prim.euler_deg);
    const Vec3 o = rot.transpose() * (origin - prim.center);
    const Vec3 d = rot.transpose() * dir;

    if (prim.kind == SynthPrimitive::Kind::plane) {
        if (std::abs(d.z) < 1e-12) return;
        const double t = -o.z / d.z;
        if (t <= 1e-9 || t >= hit.t) return;
        const double u = o.x + t * d.x, v = o.y + t * d.y;
        if (std::abs(u) > prim.size.x * 0.5 || std::abs(v) > prim.size.y * 0.5) return;
        hit.t = t;
        hit.color = texture_color(prim, u, v, seed);
        return;
    }

    // Box: slab test in the local frame.
    const Vec3 half = prim.size * 0.5;
    double t_near = -std::numeric_limits<double>::max();
    double t_far = std::numeric_limits<double>::max();
    int near_axis = -1;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (std::abs(o[a]) > half[a]) return;
            continue;
        }
        double t0 = (-half[a] - o[a]) / d[a];
        double t1 = (half[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
            t_near = t0;
            near_axis = a;
        }
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return;
    }
    const double t = t_near > 1e-9 ? t_near : t_far;
    if (t <= 1e-9 || t >= hit.t || near_axis < 0) return;
    const Vec3 p = o + d * t;
    const int ua = (near_axis + 1) % 3, va = (near_axis + 2) % 3;
    hit.t = t;
    hit.color = texture_color(prim, p[ua], p[va], seed + 7919 * near_axis);
}

std::optional<Hit> trace(const SynthSceneSpec& spec, const Vec3& origin, const Vec3& dir) {
    Hit hit;
    for (size_t i = 0; i < spec.primitives.size(); ++i)
        intersect(spec.primitives[i], i, spec.seed, origin, dir, hit);
    if (hit.t == std::numeric_limits<double>::max()) return std::nullopt;
    return hit;
}

Camera look_at_camera(const Vec3& position, const Vec3& target, int width, int height,
                      double fov_deg) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_deg * kPi / 180.0);
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);

    const Vec3 forward = (target - position).normalized();
    Vec3 down{0, 1, 0};
    if (std::abs(forward.dot(down)) > 0.999) down = {1, 0, 0};
    const Vec3 right = down.cross(forward).normalized();
    const Vec3 cam_down = forward.cross(right);
    cam.rotation = Mat3{right.x,    right.y,    right.z,
                        cam_down.x, cam_down.y, cam_down.z,
                        forward.x,  forward.y,  forward.z};
    cam.translation = cam.rotation * (-position);
    validate_camera(cam);
    return cam;
}

// World ray through a (real-valued) pixel.
std::pair<Vec3, Vec3> pixel_ray(const Camera& cam, double px, double py) {
    const Vec3 dir_cam{(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0};
    return {cam.center(), cam.rotation.transpose() * dir_cam};
}

}  // namespace

std::optional<double> trace_depth(const SynthSceneSpec& spec, const Camera& cam, double px,
                                  double py) {
    const auto [origin, dir] = pixel_ray(cam, px, py);
    const auto hit = trace(spec, origin, dir);
    if (!hit) return std::nullopt;
    // The camera-space z equals the ray parameter because dir has unit z in
    // camera coordinates.
    return hit->t;
}

Dataset gen_synth_scene(const SynthSceneSpec& spec) {
    if (spec.primitives.empty())
        fail(ErrorCode::empty_scene, "gen_synth_scene: no primitives in the scene");
    if (spec.camera_count < 1)
        fail(ErrorCode::configuration, "gen_synth_scene: need at least one camera");

    Dataset ds;
    bool any_hit = false;
    for (int k = 0; k < spec.camera_count; ++k) {
        const double angle = 2.0 * kPi * k / spec.camera_count;
        const Vec3 pos = spec.ring_center + Vec3{spec.ring_radius * std::cos(angle),
                                                 spec.ring_radius * std::sin(angle), 0.0};
        DatasetView view;
        view.id = k;
        view.name = "view_" + std::to_string(k) + ".png";
        view.camera =
            look_at_camera(pos, spec.ring_target, spec.image_width, spec.image_height,
                           spec.fov_deg);
        view.image = Image(spec.image_width, spec.image_height, 3);
        view.gt_depth = Image(spec.image_width, spec.image_height, 1);
        view.gt_depth_valid = Mask(spec.image_width, spec.image_height, false);
        view.has_gt_depth = true;

        for (int y = 0; y < spec.image_height; ++y)
            for (int x = 0; x < spec.image_width; ++x) {
                const auto [origin, dir] = pixel_ray(view.camera, x, y);
                if (const auto hit = trace(spec, origin, dir)) {
                    view.image.set_rgb(y, x, hit->color);
                    view.gt_depth.at(y, x) = hit->t;
                    view.gt_depth_valid.set(y, x, true);
                    any_hit = true;
                }
            }
        ds.views.push_back(std::move(view));
    }
    if (!any_hit)
        fail(ErrorCode::empty_scene, "gen_synth_scene: no primitive is visible from any camera");

    // Sparse surface points visible from at least two views, with exact
    // projections as observations.
    Rng rng(spec.seed);
    const int max_attempts = spec.sparse_point_count * 50;
    int produced = 0;
    for (int attempt = 0; attempt < max_attempts && produced < spec.sparse_point_count;
         ++attempt) {
        const auto& view = ds.views[rng.uniform_index(ds.views.size())];
        const double px = rng.uniform(2.0, spec.image_width - 3.0);
        const double py = rng.uniform(2.0, spec.image_height - 3.0);
        const auto [origin, dir] = pixel_ray(view.camera, px, py);
        const auto hit = trace(spec, origin, dir);
        if (!hit) continue;
        const Vec3 point = origin + dir * hit->t;

        SparsePoint sp;
        sp.position = point;
        sp.color = hit->color;
        for (const auto& other : ds.views) {
            const Vec3 c = other.camera.to_camera(point);
            if (c.z <= kMinCameraDepth) continue;
            const double ox = other.camera.fx * c.x / c.z + other.camera.cx;
            const double oy = other.camera.fy * c.y / c.z + other.camera.cy;
            if (ox < 0 || ox > other.camera.width - 1 || oy < 0 || oy > other.camera.height - 1)
                continue;
            // Occlusion check: the first hit along this view's ray must be
            // the same surface point.
            const auto depth = trace_depth(spec, other.camera, ox, oy);
            if (!depth || std::abs(*depth - c.z) > 1e-6 * c.z) continue;
            sp.observations.push_back({other.id, {ox, oy}});
        }
        if (sp.observations.size() < 2) continue;
        ds.points.push_back(std::move(sp));
        ++produced;
    }
    return ds;
}

SynthSceneSpec parse_synth_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse, std::string("synth spec: ") + e.what());
    }
    SynthSceneSpec spec;
    auto vec3 = [](const json& a) { return Vec3{a.at(0), a.at(1), a.at(2)}; };
    try {
        spec.camera_count = doc.value("camera_count", spec.camera_count);
        spec.ring_radius = doc.value("ring_radius", spec.ring_radius);
        if (doc.contains("ring_center")) spec.ring_center = vec3(doc["ring_center"]);
        if (doc.contains("ring_target")) spec.ring_target = vec3(doc["ring_target"]);
        spec.image_width = doc.value("image_width", spec.image_width);
        spec.image_height = doc.value("image_height", spec.image_height);
        spec.fov_deg = doc.value("fov_deg", spec.fov_deg);
        spec.sparse_point_count = doc.value("sparse_point_count", spec.sparse_point_count);
        spec.seed = doc.value("seed", spec.seed);
        for (const json& p : doc.value("primitives", json::array())) {
            SynthPrimitive prim;
            const std::string kind = p.value("kind", "plane");
            if (kind == "plane")
                prim.kind = SynthPrimitive::Kind::plane;
            else if (kind == "box")
                prim.kind = SynthPrimitive::Kind::box;
            else
                fail(ErrorCode::configuration, "synth spec: unknown primitive kind '" + kind + "'");
            if (p.contains("center")) prim.center = vec3(p["center"]);
            if (p.contains("euler_deg")) prim.euler_deg = vec3(p["euler_deg"]);
            if (p.contains("size")) prim.size = vec3(p["size"]);
            prim.checker_scale = p.value("checker_scale", prim.checker_scale);
            prim.noise_scale = p.value("noise_scale", prim.noise_scale);
            prim.noise_amp = p.value("noise_amp", prim.noise_amp);
            if (p.contains("color_a")) prim.color_a = vec3(p["color_a"]);
            if (p.contains("color_b")) prim.color_b = vec3(p["color_b"]);
            spec.primitives.push_back(prim);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("synth spec: ") + e.what());
    }
    return spec;
}

SynthSceneSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "synth spec: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_synth_spec(ss.str());
}

void write_dataset(const Dataset& dataset, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root / "sparse");
    fs::create_directories(root / "images");

    // One camera entry per distinct intrinsics tuple.
    std::vector<std::tuple<double, double, double, double, int, int>> intrinsics;
    std::vector<int> camera_of_view(dataset.views.size());
    for (size_t i = 0; i < dataset.views.size(); ++i) {
        const Camera& c = dataset.views[i].camera;
        const auto key = std::make_tuple(c.fx, c.fy, c.cx, c.cy, c.width, c.height);
        auto it = std::find(intrinsics.begin(), intrinsics.end(), key);
        if (it == intrinsics.end()) {
            intrinsics.push_back(key);
            it = std::prev(intrinsics.end());
        }
        camera_of_view[i] = static_cast<int>(it - intrinsics.begin()) + 1;
    }

    {
        std::ofstream out(root / "sparse" / "cameras.txt");
        out << "# Camera list with one line of data per camera:\n";
        out << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
        out.precision(17);
        for (size_t i = 0; i < intrinsics.size(); ++i) {
            const auto& [fx, fy, cx, cy, w, h] = intrinsics[i];
            out << (i + 1) << " PINHOLE " << w << " " << h << " " << fx << " " << fy << " " << cx
                << " " << cy << "\n";
        }
    }

    // Matrix-to-quaternion for the pose rows (rotations here are orthonormal
    // by construction).
    auto to_quat = [](const Mat3& m) {
        Quat q;
        const double tr = m(0, 0) + m(1, 1) + m(2, 2);
        if (tr > 0) {
            double s = std::sqrt(tr + 1.0) * 2;
            q.w = 0.25 * s;
            q.x = (m(2, 1) - m(1, 2)) / s;
            q.y = (m(0, 2) - m(2, 0)) / s;
            q.z = (m(1, 0) - m(0, 1)) / s;
        } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
            double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
            q.w = (m(2, 1) - m(1, 2)) / s;
            q.x = 0.25 * s;
            q.y = (m(0, 1) + m(1, 0)) / s;
            q.z = (m(0, 2) + m(2, 0)) / s;
        } else if (m(1, 1) > m(2, 2)) {
            double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2;
            q.w = (m(0, 2) - m(2, 0)) / s;
            q.x = (m(0, 1) + m(1, 0)) / s;
            q.y = 0.25 * s;
            q.z = (m(1, 2) + m(2, 1)) / s;
        } else {
            double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2;
            q.w = (m(1, 0) - m(0, 1)) / s;
            q.x = (m(0, 2) + m(2, 0)) / s;
            q.y = (m(1, 2) + m(2, 1)) / s;
            q.z = 0.25 * s;
        }
        return q.normalized();
    };

    // Per-view observation lists (pixel plus point id) for images.txt, and
    // the observation index each track entry will reference.
    std::vector<std::vector<std::pair<Vec2, long long>>> obs_per_view(dataset.views.size());
    std::vector<std::vector<std::pair<int, int>>> track_per_point(dataset.points.size());
    std::map<int, size_t> view_index;
    for (size_t i = 0; i < dataset.views.size(); ++i) view_index[dataset.views[i].id] = i;
    for (size_t pi = 0; pi < dataset.points.size(); ++pi) {
        for (const auto& obs : dataset.points[pi].observations) {
            const size_t vi = view_index.at(obs.view_id);
            track_per_point[pi].push_back(
                {dataset.views[vi].id, static_cast<int>(obs_per_view[vi].size())});
            obs_per_view[vi].push_back({obs.pixel, static_cast<long long>(pi + 1)});
        }
    }

    {
        std::ofstream out(root / "sparse" / "images.txt");
        out << "# Image list with two lines of data per image:\n";
        out << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
        out << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
        out.precision(17);
        for (size_t i = 0; i < dataset.views.size(); ++i) {
            const DatasetView& v = dataset.views[i];
            const Quat q = to_quat(v.camera.rotation);
            out << v.id << " " << q.w << " " << q.x << " " << q.y << " " << q.z << " "
                << v.camera.translation.x << " " << v.camera.translation.y << " "
                << v.camera.translation.z << " " << camera_of_view[i] << " " << v.name << "\n";
            bool first = true;
            for (const auto& [px, pid] : obs_per_view[i]) {
                out << (first ? "" : " ") << px.x << " " << px.y << " " << pid;
                first = false;
            }
            out << "\n";
        }
    }

    {
        std::ofstream out(root / "sparse" / "points3D.txt");
        out << "# 3D point list with one line of data per point:\n";
        out << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
        out.precision(17);
        for (size_t pi = 0; pi < dataset.points.size(); ++pi) {
            const SparsePoint& p = dataset.points[pi];
            out << (pi + 1) << " " << p.position.x << " " << p.position.y << " " << p.position.z
                << " " << static_cast<int>(std::lround(p.color.x * 255)) << " "
                << static_cast<int>(std::lround(p.color.y * 255)) << " "
                << static_cast<int>(std::lround(p.color.z * 255)) << " 0";
            for (const auto& [img_id, idx] : track_per_point[pi]) out << " " << img_id << " " << idx;
            out << "\n";
        }
    }

    bool wrote_depth_dir = false;
    for (const DatasetView& v : dataset.views) {
        write_png((root / "images" / v.name).string(), v.image);
        if (v.has_gt_depth) {
            if (!wrote_depth_dir) {
                fs::create_directories(root / "gt_depth");
                wrote_depth_dir = true;
            }
            const std::string stem = fs::path(v.name).stem().string();
            write_depth_pfm((root / "gt_depth" / (stem + ".pfm")).string(), v.gt_depth,
                            v.gt_depth_valid);
        }
    }
}

}  // namespace splat
