#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splat/errors.hpp"
#include "splat/io.hpp"

namespace splat {

namespace {

uint32_t byteswap32(uint32_t v) {
    return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
}

// One whitespace-delimited header token, skipping comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) fail(ErrorCode::parse, "pfm: truncated header");
    return tok;
}

}  // namespace

void write_pfm(const std::string& path, const Image& map) {
    if (map.channels != 1)
        fail(ErrorCode::invalid_parameter, "write_pfm: expected a single-channel map");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "write_pfm: cannot open " + path);
    out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    for (int y = map.height - 1; y >= 0; --y) {
        std::vector<float> row(map.width);
        for (int x = 0; x < map.width; ++x) row[x] = static_cast<float>(map.at(y, x));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail(ErrorCode::io, "write_pfm: write failed for " + path);
}

Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "read_pfm: cannot open " + path);

    const std::string magic = next_token(in);
    if (magic == "PF")
        fail(ErrorCode::parse, "read_pfm: 3-channel PF not supported for depth maps");
    if (magic != "Pf") fail(ErrorCode::parse, "read_pfm: bad magic '" + magic + "'");

    int width = 0, height = 0;
    double scale = 0;
    try {
        width = std::stoi(next_token(in));
        height = std::stoi(next_token(in));
        scale = std::stod(next_token(in));
    } catch (const std::exception&) {
        fail(ErrorCode::parse, "read_pfm: malformed header in " + path);
    }
    if (width <= 0 || height <= 0 || scale == 0)
        fail(ErrorCode::parse, "read_pfm: malformed header in " + path);
    in.get();  // single whitespace after the scale line

    const bool file_little_endian = scale < 0;
    std::vector<float> row(width);
    Image img(width, height, 1);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) fail(ErrorCode::parse, "read_pfm: truncated payload in " + path);
        for (int x = 0; x < width; ++x) {
            float v = row[x];
            if (file_little_endian != (std::endian::native == std::endian::little)) {
                uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = byteswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
            img.at(y, x) = v;
        }
    }
    return img;
}

void write_depth_pfm(const std::string& path, const Image& depth, const Mask& valid) {
    Image masked = depth;
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x)
            if (!valid.get(y, x)) masked.at(y, x) = 0.0;
    write_pfm(path, masked);
}

std::pair<Image, Mask> read_depth_pfm(const std::string& path) {
    Image img = read_pfm(path);
    Mask valid(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) valid.set(y, x, img.at(y, x) != 0.0);
    return {std::move(img), std::move(valid)};
}

}  // namespace splat
