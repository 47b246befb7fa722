#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "splat/errors.hpp"
#include "splat/io.hpp"

namespace splat {

namespace {

std::vector<std::string> required_properties(int rest_count) {
    std::vector<std::string> props = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (int i = 0; i < rest_count; ++i) props.push_back("f_rest_" + std::to_string(i));
    props.insert(props.end(),
                 {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
    return props;
}

}  // namespace

void write_gaussians_ply(const std::string& path, const GaussianCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "write_gaussians_ply: cannot open " + path);

    const int rest = (sh_coeff_count(cloud.sh_degree) - 1) * 3;
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) out << "property float " << n << "\n";
    for (int c = 0; c < 3; ++c) out << "property float f_dc_" << c << "\n";
    for (int i = 0; i < rest; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";

    const int rest_per_channel = sh_coeff_count(cloud.sh_degree) - 1;
    std::vector<float> row;
    for (const Gaussian& g : cloud.gaussians) {
        row.clear();
        row.insert(row.end(), {static_cast<float>(g.position.x), static_cast<float>(g.position.y),
                               static_cast<float>(g.position.z), 0.f, 0.f, 0.f});
        for (int c = 0; c < 3; ++c) row.push_back(static_cast<float>(g.sh[0][c]));
        // f_rest is channel-major: all R coefficients, then G, then B.
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < rest_per_channel; ++k)
                row.push_back(static_cast<float>(g.sh[k + 1][c]));
        row.push_back(static_cast<float>(g.opacity_logit));
        for (int k = 0; k < 3; ++k) row.push_back(static_cast<float>(g.log_scale[k]));
        row.insert(row.end(), {static_cast<float>(g.rotation.w), static_cast<float>(g.rotation.x),
                               static_cast<float>(g.rotation.y), static_cast<float>(g.rotation.z)});
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail(ErrorCode::io, "write_gaussians_ply: write failed for " + path);
}

GaussianCloud read_gaussians_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "read_gaussians_ply: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != "ply")
        fail(ErrorCode::parse, "read_gaussians_ply: missing 'ply' magic");
    if (!std::getline(in, line) || line != "format binary_little_endian 1.0")
        fail(ErrorCode::parse, "read_gaussians_ply: expected binary little-endian format");

    size_t vertex_count = 0;
    std::vector<std::string> prop_names;
    bool in_vertex_element = false;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "element") {
            std::string name;
            size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
            } else {
                if (prop_names.empty())
                    fail(ErrorCode::schema, "read_gaussians_ply: first element must be vertex");
                in_vertex_element = false;
            }
        } else if (word == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            if (type != "float")
                fail(ErrorCode::schema,
                     "read_gaussians_ply: vertex property '" + name + "' is not float32");
            prop_names.push_back(name);
        }
        if (in.eof()) fail(ErrorCode::parse, "read_gaussians_ply: unterminated header");
    }

    std::map<std::string, size_t> index;
    for (size_t i = 0; i < prop_names.size(); ++i) index[prop_names[i]] = i;

    // Infer the SH degree from the f_rest_* count.
    int rest = 0;
    while (index.count("f_rest_" + std::to_string(rest))) ++rest;
    if (rest % 3 != 0)
        fail(ErrorCode::schema, "read_gaussians_ply: f_rest count is not a multiple of 3");
    const int per_channel = rest / 3;
    int degree = -1;
    for (int d = 0; d <= 3; ++d)
        if (sh_coeff_count(d) - 1 == per_channel) degree = d;
    if (degree < 0)
        fail(ErrorCode::schema, "read_gaussians_ply: f_rest count matches no SH degree in 0..3");

    std::string missing;
    for (const std::string& name : required_properties(rest))
        if (!index.count(name)) missing += (missing.empty() ? "" : ", ") + name;
    if (!missing.empty())
        fail(ErrorCode::schema, "read_gaussians_ply: missing properties: " + missing);

    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.gaussians.reserve(vertex_count);
    std::vector<float> row(prop_names.size());
    auto get = [&](const char* name) { return row[index.at(name)]; };
    for (size_t i = 0; i < vertex_count; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) fail(ErrorCode::parse, "read_gaussians_ply: truncated payload");
        Gaussian g;
        g.position = {get("x"), get("y"), get("z")};
        g.sh.assign(sh_coeff_count(degree), Vec3());
        for (int c = 0; c < 3; ++c)
            g.sh[0][c] = row[index.at("f_dc_" + std::to_string(c))];
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < per_channel; ++k)
                g.sh[k + 1][c] = row[index.at("f_rest_" + std::to_string(c * per_channel + k))];
        g.opacity_logit = get("opacity");
        g.log_scale = {get("scale_0"), get("scale_1"), get("scale_2")};
        g.rotation = {get("rot_0"), get("rot_1"), get("rot_2"), get("rot_3")};
        cloud.gaussians.push_back(std::move(g));
    }
    return cloud;
}

}  // namespace splat
