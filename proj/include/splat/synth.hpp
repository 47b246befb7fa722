#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splat/io.hpp"
#include "splat/linalg.hpp"

namespace splat {

// Ray-traced test scenes with exact ground truth. World convention matches
// the camera one: +y is down, cameras sit on a ring and look at a target.
struct SynthPrimitive {
    enum class Kind { plane, box };
    Kind kind = Kind::plane;
    Vec3 center;
    Vec3 euler_deg;   // local frame rotation, XYZ order
    Vec3 size;        // plane: x/y extent (z ignored); box: full edge lengths
    double checker_scale = 0.5;  // world units per checker cell
    double noise_scale = 0.25;   // world units per noise lattice cell
    double noise_amp = 0.0;      // +- luminance perturbation
    Vec3 color_a{0.8, 0.3, 0.25};
    Vec3 color_b{0.2, 0.45, 0.85};
};

struct SynthSceneSpec {
    std::vector<SynthPrimitive> primitives;
    int camera_count = 20;
    double ring_radius = 1.0;
    Vec3 ring_center;
    Vec3 ring_target{0, 0, 5};
    int image_width = 96;
    int image_height = 64;
    double fov_deg = 60.0;
    int sparse_point_count = 300;
    uint64_t seed = 0;
};

SynthSceneSpec load_synth_spec(const std::string& path);
SynthSceneSpec parse_synth_spec(const std::string& json_text);

// Ray-traces the scene into a full Dataset: posed images, exact per-view
// depth, and sparse surface points observed by at least two views.
Dataset gen_synth_scene(const SynthSceneSpec& spec);

// Materializes a dataset directory (COLMAP text model + PNG images + PFM
// ground-truth depth) that load_colmap_text reads back.
void write_dataset(const Dataset& dataset, const std::string& dir);

// First-hit depth along the ray through a (real-valued) pixel, if any.
std::optional<double> trace_depth(const SynthSceneSpec& spec, const Camera& cam, double px,
                                  double py);

}  // namespace splat
