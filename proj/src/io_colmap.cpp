#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "splat/errors.hpp"
#include "splat/io.hpp"

namespace fs = std::filesystem;

namespace splat {

namespace {

[[noreturn]] void parse_fail(const std::string& file, int line_no, const std::string& why) {
    fail(ErrorCode::parse, file + ":" + std::to_string(line_no) + ": " + why);
}

// Lines of a COLMAP text file with their numbers; comments are always
// dropped, blank lines only when keep_blanks is false. images.txt needs the
// blanks: an image without 2D points stores an empty second line.
std::vector<std::pair<int, std::string>> content_lines(const fs::path& path,
                                                       bool keep_blanks = false) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "load_colmap_text: cannot open " + path.string());
    std::vector<std::pair<int, std::string>> lines;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto pos = line.find_first_not_of(" \t\r");
        const bool blank = pos == std::string::npos;
        if (!blank && line[pos] == '#') continue;
        if (blank && !keep_blanks) continue;
        lines.emplace_back(n, blank ? std::string() : line);
    }
    // Trailing blanks carry no content.
    while (!lines.empty() && lines.back().second.empty()) lines.pop_back();
    return lines;
}

struct ColmapCamera {
    Camera cam;
};

std::map<int, ColmapCamera> parse_cameras(const fs::path& path) {
    std::map<int, ColmapCamera> cams;
    for (const auto& [line_no, line] : content_lines(path)) {
        std::istringstream ls(line);
        int id = 0, width = 0, height = 0;
        std::string model;
        if (!(ls >> id >> model >> width >> height))
            parse_fail(path.string(), line_no, "malformed camera line");
        Camera cam;
        cam.width = width;
        cam.height = height;
        if (model == "PINHOLE") {
            if (!(ls >> cam.fx >> cam.fy >> cam.cx >> cam.cy))
                parse_fail(path.string(), line_no, "PINHOLE needs fx fy cx cy");
        } else if (model == "SIMPLE_PINHOLE") {
            double f = 0;
            if (!(ls >> f >> cam.cx >> cam.cy))
                parse_fail(path.string(), line_no, "SIMPLE_PINHOLE needs f cx cy");
            cam.fx = cam.fy = f;
        } else {
            fail(ErrorCode::unsupported_model,
                 "load_colmap_text: unsupported camera model '" + model + "' (camera " +
                     std::to_string(id) + ")");
        }
        cams[id] = {cam};
    }
    return cams;
}

}  // namespace

const DatasetView* Dataset::find_view(int id) const {
    for (const DatasetView& v : views)
        if (v.id == id) return &v;
    return nullptr;
}

std::vector<Camera> Dataset::cameras_by_id() const {
    int max_id = -1;
    for (const DatasetView& v : views) max_id = std::max(max_id, v.id);
    std::vector<Camera> cams(static_cast<size_t>(max_id + 1));
    for (const DatasetView& v : views) cams[v.id] = v.camera;
    return cams;
}

Dataset load_colmap_text(const std::string& root_str) {
    const fs::path root(root_str);
    fs::path model_dir = root / "sparse";
    if (!fs::exists(model_dir / "cameras.txt")) model_dir = root;
    for (const char* name : {"cameras.txt", "images.txt", "points3D.txt"})
        if (!fs::exists(model_dir / name))
            fail(ErrorCode::io, "load_colmap_text: missing " + (model_dir / name).string());

    const auto cameras = parse_cameras(model_dir / "cameras.txt");

    Dataset ds;
    // images.txt: a pose line followed by a 2D-point line per image.
    struct View2D {
        std::vector<Vec2> points;
    };
    std::map<int, View2D> image_points;
    {
        const fs::path path = model_dir / "images.txt";
        const auto lines = content_lines(path, /*keep_blanks=*/true);
        for (size_t i = 0; i < lines.size(); i += 2) {
            const auto& [line_no, line] = lines[i];
            if (line.empty())
                parse_fail(path.string(), line_no, "expected an image pose line");
            std::istringstream ls(line);
            int image_id = 0, camera_id = 0;
            double qw, qx, qy, qz, tx, ty, tz;
            std::string name;
            if (!(ls >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> name))
                parse_fail(path.string(), line_no, "malformed image line");
            auto cam_it = cameras.find(camera_id);
            if (cam_it == cameras.end())
                parse_fail(path.string(), line_no,
                           "image references unknown camera " + std::to_string(camera_id));

            DatasetView view;
            view.id = image_id;
            view.name = name;
            view.camera = cam_it->second.cam;
            view.camera.rotation = Quat{qw, qx, qy, qz}.to_matrix();
            view.camera.translation = {tx, ty, tz};
            validate_camera(view.camera);

            View2D pts;
            if (i + 1 < lines.size()) {
                const auto& [pt_line_no, pt_line] = lines[i + 1];
                std::istringstream ps(pt_line);
                double x, y;
                long long point_id;
                while (ps >> x >> y >> point_id) pts.points.push_back({x, y});
                if (!ps.eof())
                    parse_fail(path.string(), pt_line_no, "malformed 2D point triple");
            }
            image_points[image_id] = std::move(pts);
            ds.views.push_back(std::move(view));
        }
    }

    // Image files and optional ground-truth depth.
    for (DatasetView& view : ds.views) {
        const fs::path img_path = root / "images" / view.name;
        if (!fs::exists(img_path))
            fail(ErrorCode::io, "load_colmap_text: missing image file " + img_path.string());
        view.image = read_png(img_path.string());
        if (view.image.width != view.camera.width || view.image.height != view.camera.height)
            fail(ErrorCode::shape_mismatch,
                 "load_colmap_text: image size of " + view.name + " does not match its camera");
        const fs::path stem = fs::path(view.name).stem();
        const fs::path depth_path = root / "gt_depth" / (stem.string() + ".pfm");
        if (fs::exists(depth_path)) {
            auto [depth, valid] = read_depth_pfm(depth_path.string());
            if (depth.width != view.camera.width || depth.height != view.camera.height)
                fail(ErrorCode::shape_mismatch,
                     "load_colmap_text: gt depth size mismatch for " + view.name);
            view.has_gt_depth = true;
            view.gt_depth = std::move(depth);
            view.gt_depth_valid = std::move(valid);
        }
    }

    // points3D.txt with observation tracks.
    {
        const fs::path path = model_dir / "points3D.txt";
        std::map<int, size_t> view_index;
        for (size_t i = 0; i < ds.views.size(); ++i) view_index[ds.views[i].id] = i;
        for (const auto& [line_no, line] : content_lines(path)) {
            std::istringstream ls(line);
            long long point_id = 0;
            double x, y, z, error;
            int r, g, b;
            if (!(ls >> point_id >> x >> y >> z >> r >> g >> b >> error))
                parse_fail(path.string(), line_no, "malformed 3D point line");
            SparsePoint point;
            point.position = {x, y, z};
            point.color = {r / 255.0, g / 255.0, b / 255.0};
            int image_id = 0, point2d_idx = 0;
            while (ls >> image_id >> point2d_idx) {
                auto vi = view_index.find(image_id);
                if (vi == view_index.end())
                    parse_fail(path.string(), line_no,
                               "track references unknown image " + std::to_string(image_id));
                const auto& pts = image_points.at(image_id).points;
                if (point2d_idx < 0 || point2d_idx >= static_cast<int>(pts.size()))
                    parse_fail(path.string(), line_no,
                               "track references 2D point " + std::to_string(point2d_idx) +
                                   " out of range");
                point.observations.push_back({image_id, pts[point2d_idx]});
            }
            if (!ls.eof()) parse_fail(path.string(), line_no, "malformed track pair");
            ds.points.push_back(std::move(point));
        }
    }

    if (fs::exists(root / "priors")) ds.prior_dir = (root / "priors").string();
    return ds;
}

}  // namespace splat
