#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splat/image.hpp"
#include "splat/scene.hpp"
#include "splat/trainer.hpp"

namespace splat {

// One posed training/evaluation view.
struct DatasetView {
    int id = 0;           // stable view id (the COLMAP image id)
    std::string name;     // image file name
    Camera camera;
    Image image;          // H x W x 3 in [0,1]
    bool has_gt_depth = false;
    Image gt_depth;
    Mask gt_depth_valid;
};

struct Dataset {
    std::vector<DatasetView> views;  // file order
    std::vector<SparsePoint> points; // observations reference view ids
    std::string prior_dir;           // directory of <view_id>.pfm dense priors, may be empty

    const DatasetView* find_view(int id) const;
    // Cameras indexed by view id (for the reprojection diagnostics utility).
    std::vector<Camera> cameras_by_id() const;
};

// ---- COLMAP text models ----
// Loads <root>/sparse/{cameras,images,points3D}.txt (or the three files
// directly in <root>), images from <root>/images/, ground-truth depth from
// <root>/gt_depth/<stem>.pfm when present, and records <root>/priors if it
// exists. Only PINHOLE and SIMPLE_PINHOLE cameras are supported.
Dataset load_colmap_text(const std::string& root);

// ---- Gaussian checkpoint (binary little-endian PLY) ----
// Property layout follows the common splatting convention: x y z, nx ny nz,
// f_dc_*, f_rest_* (channel-major), opacity, scale_*, rot_* (w x y z).
void write_gaussians_ply(const std::string& path, const GaussianCloud& cloud);
GaussianCloud read_gaussians_ply(const std::string& path);

// ---- PFM (single channel, float32) ----
// Rows are stored bottom-up; the scale sign encodes endianness.
void write_pfm(const std::string& path, const Image& map);
Image read_pfm(const std::string& path);
// Depth convention: invalid pixels are stored as 0 and restored to the mask.
void write_depth_pfm(const std::string& path, const Image& depth, const Mask& valid);
std::pair<Image, Mask> read_depth_pfm(const std::string& path);

// ---- PNG (8-bit RGB) ----
void write_png(const std::string& path, const Image& rgb);
Image read_png(const std::string& path);

// ---- Train configuration (strict JSON mirror of TrainConfig) ----
TrainConfig load_train_config(const std::string& path);
TrainConfig parse_train_config(const std::string& json_text);

// ---- Run report (one JSON record per line) ----
void write_run_report(const std::string& path, const TrainResult& result);

}  // namespace splat
