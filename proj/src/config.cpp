#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splat/errors.hpp"
#include "splat/io.hpp"

namespace splat {

namespace {

using nlohmann::json;

// Unknown keys are rejected so a typo in lambda/T/tau cannot silently fall
// back to a default.
const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "iterations",       "lambda1",
        "lambda2",          "depth_start_iter",
        "prior_refresh_interval", "baseline_min",
        "baseline_max",     "lr_position",
        "lr_rotation",      "lr_scale",
        "lr_opacity",       "lr_sh",
        "position_lr_final_scale", "densify_interval",
        "densify_start",    "densify_end",
        "densify_grad_threshold", "prune_opacity",
        "seed",             "sh_degree",
        "init_points",      "init_random",
        "prior_source",     "stereo_d_max",
        "stereo_window",    "stereo_census_window",
        "stereo_lr_tolerance", "min_disparity",
        "background",
    };
    return keys;
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse, std::string("config: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::parse, "config: top-level value must be an object");

    for (const auto& [key, value] : doc.items()) {
        if (!known_keys().count(key))
            fail(ErrorCode::configuration, "config: unknown key '" + key + "'");
    }

    TrainConfig cfg;
    try {
        cfg.iterations = doc.value("iterations", cfg.iterations);
        cfg.lambda1 = doc.value("lambda1", cfg.lambda1);
        cfg.lambda2 = doc.value("lambda2", cfg.lambda2);
        cfg.depth_start_iter = doc.value("depth_start_iter", cfg.depth_start_iter);
        cfg.prior_refresh_interval =
            doc.value("prior_refresh_interval", cfg.prior_refresh_interval);
        cfg.baseline_min = doc.value("baseline_min", cfg.baseline_min);
        cfg.baseline_max = doc.value("baseline_max", cfg.baseline_max);
        cfg.lr.position = doc.value("lr_position", cfg.lr.position);
        cfg.lr.rotation = doc.value("lr_rotation", cfg.lr.rotation);
        cfg.lr.log_scale = doc.value("lr_scale", cfg.lr.log_scale);
        cfg.lr.opacity = doc.value("lr_opacity", cfg.lr.opacity);
        cfg.lr.sh = doc.value("lr_sh", cfg.lr.sh);
        cfg.position_lr_final_scale =
            doc.value("position_lr_final_scale", cfg.position_lr_final_scale);
        cfg.densify_interval = doc.value("densify_interval", cfg.densify_interval);
        cfg.densify_start = doc.value("densify_start", cfg.densify_start);
        cfg.densify_end = doc.value("densify_end", cfg.densify_end);
        cfg.densify_grad_threshold =
            doc.value("densify_grad_threshold", cfg.densify_grad_threshold);
        cfg.prune_opacity = doc.value("prune_opacity", cfg.prune_opacity);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.sh_degree = doc.value("sh_degree", cfg.sh_degree);
        cfg.init_points = doc.value("init_points", cfg.init_points);
        cfg.init_random = doc.value("init_random", cfg.init_random);
        cfg.prior_source = doc.value("prior_source", cfg.prior_source);
        cfg.stereo_d_max = doc.value("stereo_d_max", cfg.stereo_d_max);
        cfg.stereo_window = doc.value("stereo_window", cfg.stereo_window);
        cfg.stereo_census_window = doc.value("stereo_census_window", cfg.stereo_census_window);
        cfg.stereo_lr_tolerance = doc.value("stereo_lr_tolerance", cfg.stereo_lr_tolerance);
        cfg.min_disparity = doc.value("min_disparity", cfg.min_disparity);
        if (doc.contains("background")) {
            const auto& bg = doc.at("background");
            if (!bg.is_array() || bg.size() != 3)
                fail(ErrorCode::configuration, "config: background must be an array of 3 numbers");
            cfg.background = {bg[0].get<double>(), bg[1].get<double>(), bg[2].get<double>()};
        }
    } catch (const json::type_error& e) {
        fail(ErrorCode::configuration, std::string("config: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_train_config(ss.str());
}

void write_run_report(const std::string& path, const TrainResult& result) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "run report: cannot open " + path);
    for (const IterationRecord& r : result.records) {
        json rec = {
            {"iteration", r.iteration},
            {"l1", r.l1},
            {"dssim", r.dssim},
            {"depth_loss", r.depth_loss},
            {"total", r.total},
            {"gaussian_count", r.gaussian_count},
            {"depth_valid_fraction", r.depth_valid_fraction},
            {"view_id", r.view_id},
        };
        out << rec.dump() << "\n";
    }
    const json summary = {
        {"summary", true},
        {"mean_train_psnr", result.mean_train_psnr},
        {"mean_train_ssim", result.mean_train_ssim},
        {"final_gaussian_count",
         result.records.empty() ? 0 : result.records.back().gaussian_count},
    };
    out << summary.dump() << "\n";
    if (!out) fail(ErrorCode::io, "run report: write failed for " + path);
}

}  // namespace splat
