#pragma once

#include <cstdint>
#include <vector>

#include "splat/errors.hpp"
#include "splat/linalg.hpp"

namespace splat {

// Dense row-major image, `channels` interleaved doubles per pixel.
// Used for rendered color (3), depth/disparity maps (1) and gradients.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    Vec3 rgb(int y, int x) const {
        const size_t i = (static_cast<size_t>(y) * width + x) * channels;
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set_rgb(int y, int x, const Vec3& v) {
        const size_t i = (static_cast<size_t>(y) * width + x) * channels;
        data[i] = v.x;
        data[i + 1] = v.y;
        data[i + 2] = v.z;
    }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Per-pixel boolean validity mask.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

    bool get(int y, int x) const { return data[static_cast<size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += v != 0;
        return n;
    }
    bool same_shape(const Mask& o) const { return width == o.width && height == o.height; }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        fail(ErrorCode::shape_mismatch, std::string(what) + ": image shapes differ");
}

}  // namespace splat
