#pragma once

#include "splat/image.hpp"

namespace splat {

// Rectified-pair disparity with validity mask; invalid pixels hold -1.
struct DisparityMap {
    Image disparity;  // H x W, pixels, >= 0 where valid
    Mask valid;
    int d_max = 0;
};

// Census block matching: 7x7 census transform on luma, Hamming costs
// aggregated over a `window` x `window` box, winner-take-all over
// d in [0, d_max] with a uniqueness check, parabola subpixel refinement
// clamped to +-0.5 px. The border band that lacks full support (d_max plus
// the combined window half-extent on the left, the half-extent elsewhere)
// is invalid.
DisparityMap compute_disparity(const Image& left, const Image& right, int d_max, int window = 9,
                               int census_window = 7);

// Disparity of the right image against the left (same geometry, roles
// swapped), computed by matching the mirrored pair.
DisparityMap compute_disparity_right(const Image& left, const Image& right, int d_max,
                                     int window = 9, int census_window = 7);

// Invalidates left-map pixels whose right-map counterpart disagrees by more
// than tol px. Only ever shrinks the valid set; an infinite tol disables the
// check entirely.
DisparityMap lr_consistency(const DisparityMap& d_left, const DisparityMap& d_right, double tol);

Image flip_horizontal(const Image& img);

}  // namespace splat
