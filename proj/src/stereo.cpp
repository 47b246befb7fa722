#include "splat/stereo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "splat/errors.hpp"

namespace splat {

namespace {

std::vector<double> to_luma(const Image& img) {
    std::vector<double> luma(img.pixel_count());
    if (img.channels == 1) {
        luma.assign(img.data.begin(), img.data.end());
        return luma;
    }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Vec3 c = img.rgb(y, x);
            luma[static_cast<size_t>(y) * img.width + x] =
                0.299 * c.x + 0.587 * c.y + 0.114 * c.z;
        }
    return luma;
}

// 7x7 census fits the 48 neighbor comparisons into a uint64.
std::vector<uint64_t> census_transform(const std::vector<double>& luma, int width, int height,
                                       int census_half) {
    std::vector<uint64_t> census(luma.size(), 0);
    for (int y = census_half; y < height - census_half; ++y) {
        for (int x = census_half; x < width - census_half; ++x) {
            const double center = luma[static_cast<size_t>(y) * width + x];
            uint64_t bits = 0;
            for (int dy = -census_half; dy <= census_half; ++dy)
                for (int dx = -census_half; dx <= census_half; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    bits = (bits << 1) |
                           (luma[static_cast<size_t>(y + dy) * width + (x + dx)] > center ? 1u : 0u);
                }
            census[static_cast<size_t>(y) * width + x] = bits;
        }
    }
    return census;
}

// Separable box sum of an integer cost plane.
void box_filter(const std::vector<uint16_t>& src, std::vector<uint32_t>& dst, int width,
                int height, int half) {
    std::vector<uint32_t> rows(src.size(), 0);
    for (int y = 0; y < height; ++y) {
        const size_t row = static_cast<size_t>(y) * width;
        uint32_t acc = 0;
        for (int x = 0; x < std::min(2 * half + 1, width); ++x) acc += src[row + x];
        for (int x = half; x < width - half; ++x) {
            rows[row + x] = acc;
            if (x + half + 1 < width) acc += src[row + x + half + 1];
            if (x - half >= 0) acc -= src[row + x - half];
        }
    }
    for (int x = 0; x < width; ++x) {
        uint32_t acc = 0;
        for (int y = 0; y < std::min(2 * half + 1, height); ++y)
            acc += rows[static_cast<size_t>(y) * width + x];
        for (int y = half; y < height - half; ++y) {
            dst[static_cast<size_t>(y) * width + x] = acc;
            if (y + half + 1 < height) acc += rows[static_cast<size_t>(y + half + 1) * width + x];
            if (y - half >= 0) acc -= rows[static_cast<size_t>(y - half) * width + x];
        }
    }
}

}  // namespace

Image flip_horizontal(const Image& img) {
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

DisparityMap compute_disparity(const Image& left, const Image& right, int d_max, int window,
                               int census_window) {
    if (left.width != right.width || left.height != right.height ||
        left.channels != right.channels)
        fail(ErrorCode::shape_mismatch, "compute_disparity: image shapes differ");
    if (d_max < 1 || d_max >= left.width)
        fail(ErrorCode::configuration, "compute_disparity: d_max must be in [1, width)");
    if (window < 3 || window % 2 == 0 || census_window < 3 || census_window % 2 == 0)
        fail(ErrorCode::configuration, "compute_disparity: windows must be odd and >= 3");

    const int width = left.width, height = left.height;
    const int census_half = census_window / 2;
    const int agg_half = window / 2;
    const int support = census_half + agg_half;

    const auto census_l = census_transform(to_luma(left), width, height, census_half);
    const auto census_r = census_transform(to_luma(right), width, height, census_half);

    // Aggregated cost planes, one per integer disparity.
    const size_t plane_size = static_cast<size_t>(width) * height;
    std::vector<std::vector<uint32_t>> cost(d_max + 1);
    std::vector<uint16_t> raw(plane_size);
    for (int d = 0; d <= d_max; ++d) {
        std::fill(raw.begin(), raw.end(), uint16_t(0));
        for (int y = census_half; y < height - census_half; ++y) {
            const size_t row = static_cast<size_t>(y) * width;
            for (int x = census_half + d; x < width - census_half; ++x)
                raw[row + x] =
                    static_cast<uint16_t>(std::popcount(census_l[row + x] ^ census_r[row + x - d]));
        }
        cost[d].assign(plane_size, 0);
        box_filter(raw, cost[d], width, height, agg_half);
    }

    // Census bit density of the reference image; a window without a single
    // census transition has no texture to match on.
    std::vector<uint32_t> texture(plane_size, 0);
    for (size_t i = 0; i < plane_size; ++i)
        raw[i] = static_cast<uint16_t>(std::popcount(census_l[i]));
    box_filter(raw, texture, width, height, agg_half);

    DisparityMap out;
    out.disparity = Image(width, height, 1, -1.0);
    out.valid = Mask(width, height, false);
    out.d_max = d_max;

    const int x_begin = d_max + support;
    for (int y = support; y < height - support; ++y) {
        for (int x = x_begin; x < width - support; ++x) {
            const size_t idx = static_cast<size_t>(y) * width + x;
            if (texture[idx] == 0) continue;
            int best_d = 0;
            uint32_t best_c = std::numeric_limits<uint32_t>::max();
            for (int d = 0; d <= d_max; ++d) {
                const uint32_t c = cost[d][idx];
                if (c < best_c) {
                    best_c = c;
                    best_d = d;
                }
            }
            // Uniqueness: the best cost outside the +-1 neighborhood of the
            // winner must be strictly worse, else the match is ambiguous.
            uint32_t best_excl = std::numeric_limits<uint32_t>::max();
            for (int d = 0; d <= d_max; ++d) {
                if (std::abs(d - best_d) <= 1) continue;
                best_excl = std::min(best_excl, cost[d][idx]);
            }
            if (best_excl != std::numeric_limits<uint32_t>::max() && best_excl <= best_c) continue;

            double disp = best_d;
            if (best_d > 0 && best_d < d_max) {
                const double c_prev = cost[best_d - 1][idx];
                const double c_next = cost[best_d + 1][idx];
                const double denom = c_prev - 2.0 * static_cast<double>(best_c) + c_next;
                if (denom > 0) {
                    double delta = 0.5 * (c_prev - c_next) / denom;
                    delta = std::clamp(delta, -0.5, 0.5);
                    disp += delta;
                }
            }
            out.disparity.at(y, x) = disp;
            out.valid.set(y, x, true);
        }
    }
    return out;
}

DisparityMap compute_disparity_right(const Image& left, const Image& right, int d_max, int window,
                                     int census_window) {
    DisparityMap mirrored = compute_disparity(flip_horizontal(right), flip_horizontal(left), d_max,
                                              window, census_window);
    DisparityMap out;
    out.disparity = flip_horizontal(mirrored.disparity);
    out.valid = Mask(mirrored.valid.width, mirrored.valid.height);
    for (int y = 0; y < out.valid.height; ++y)
        for (int x = 0; x < out.valid.width; ++x)
            out.valid.set(y, x, mirrored.valid.get(y, out.valid.width - 1 - x));
    out.d_max = d_max;
    return out;
}

DisparityMap lr_consistency(const DisparityMap& d_left, const DisparityMap& d_right, double tol) {
    if (!d_left.valid.same_shape(d_right.valid) || !d_left.disparity.same_shape(d_right.disparity))
        fail(ErrorCode::shape_mismatch, "lr_consistency: map shapes differ");
    DisparityMap out = d_left;
    if (!(tol < std::numeric_limits<double>::infinity())) return out;

    for (int y = 0; y < d_left.valid.height; ++y) {
        for (int x = 0; x < d_left.valid.width; ++x) {
            if (!out.valid.get(y, x)) continue;
            const double dl = out.disparity.at(y, x);
            const int xr = static_cast<int>(std::lround(x - dl));
            bool keep = xr >= 0 && xr < d_right.valid.width && d_right.valid.get(y, xr) &&
                        std::abs(dl - d_right.disparity.at(y, xr)) <= tol;
            if (!keep) {
                out.valid.set(y, x, false);
                out.disparity.at(y, x) = -1.0;
            }
        }
    }
    return out;
}

}  // namespace splat
