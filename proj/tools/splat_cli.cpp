#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "splat/depth_priors.hpp"
#include "splat/errors.hpp"
#include "splat/io.hpp"
#include "splat/losses.hpp"
#include "splat/rasterizer.hpp"
#include "splat/stereo.hpp"
#include "splat/synth.hpp"
#include "splat/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every holdout-th view (by file order) is a test view; 0 disables holdout.
bool is_test_view(size_t index, int holdout_every) {
    return holdout_every > 0 && index % static_cast<size_t>(holdout_every) == 0;
}

std::vector<splat::TrainView> training_views(const splat::Dataset& ds, int holdout_every) {
    std::vector<splat::TrainView> views;
    for (size_t i = 0; i < ds.views.size(); ++i) {
        if (is_test_view(i, holdout_every)) continue;
        views.push_back({ds.views[i].id, ds.views[i].camera, ds.views[i].image});
    }
    return views;
}

std::unique_ptr<splat::PriorProvider> make_provider(const splat::Dataset& ds,
                                                    const std::vector<splat::TrainView>& views,
                                                    const splat::TrainConfig& cfg,
                                                    json& summary) {
    if (cfg.prior_source == "none") return nullptr;

    if (cfg.prior_source == "stereo_self") {
        splat::StereoPriorConfig sp;
        sp.depth_start_iter = cfg.depth_start_iter;
        sp.refresh_interval = cfg.prior_refresh_interval;
        sp.d_max = cfg.stereo_d_max;
        sp.window = cfg.stereo_window;
        sp.census_window = cfg.stereo_census_window;
        sp.lr_tolerance = cfg.stereo_lr_tolerance;
        sp.min_disparity = cfg.min_disparity;
        sp.background = cfg.background;
        if (cfg.baseline_min == 0 && cfg.baseline_max == 0) {
            std::vector<splat::Vec3> pts;
            for (const auto& p : ds.points) pts.push_back(p.position);
            if (pts.empty())
                splat::fail(splat::ErrorCode::configuration,
                            "stereo_self: no sparse points; set baseline_min/baseline_max");
            const auto [lo, hi] = splat::default_baseline_interval(views, pts);
            sp.baseline_min = lo;
            sp.baseline_max = hi;
        } else {
            sp.baseline_min = cfg.baseline_min;
            sp.baseline_max = cfg.baseline_max;
        }
        summary["baseline_interval"] = {sp.baseline_min, sp.baseline_max};
        return std::make_unique<splat::StereoSelfProvider>(sp);
    }

    if (cfg.prior_source == "sfm_sparse") {
        std::map<int, splat::DepthPrior> priors;
        for (const auto& v : views) {
            splat::DepthPrior p = splat::sparse_prior_from_points(ds.points, v.camera);
            p.created_at = cfg.depth_start_iter;
            priors[v.id] = std::move(p);
        }
        return std::make_unique<splat::StaticPriorProvider>(std::move(priors),
                                                            cfg.depth_start_iter);
    }

    // external_aligned: dense relative maps fitted to the SfM projections.
    if (ds.prior_dir.empty())
        splat::fail(splat::ErrorCode::configuration,
                    "external_aligned: dataset has no priors directory");
    std::map<int, splat::DepthPrior> priors;
    for (const auto& v : views) {
        const fs::path path = fs::path(ds.prior_dir) / (std::to_string(v.id) + ".pfm");
        if (!fs::exists(path))
            splat::fail(splat::ErrorCode::io,
                        "external_aligned: missing prior file " + path.string());
        const splat::Image pred = splat::read_pfm(path.string());
        const splat::DepthPrior sparse = splat::sparse_prior_from_points(ds.points, v.camera);
        splat::DepthPrior aligned = splat::align_external_prior(pred, sparse);
        aligned.created_at = cfg.depth_start_iter;
        priors[v.id] = std::move(aligned);
    }
    return std::make_unique<splat::StaticPriorProvider>(std::move(priors), cfg.depth_start_iter);
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, int holdout_every) {
    const splat::Dataset ds = splat::load_colmap_text(data_dir);
    splat::TrainConfig cfg =
        config_path.empty() ? splat::TrainConfig{} : splat::load_train_config(config_path);
    const auto views = training_views(ds, holdout_every);

    json summary;
    auto provider = make_provider(ds, views, cfg, summary);
    const splat::TrainResult result = splat::train(views, ds.points, cfg, provider.get());

    fs::create_directories(out_dir);
    splat::write_gaussians_ply((fs::path(out_dir) / "point_cloud.ply").string(), result.cloud);
    splat::write_run_report((fs::path(out_dir) / "report.jsonl").string(), result);

    summary["iterations"] = cfg.iterations;
    summary["train_views"] = views.size();
    summary["gaussians"] = result.cloud.size();
    summary["mean_train_psnr"] = result.mean_train_psnr;
    summary["mean_train_ssim"] = result.mean_train_ssim;
    std::ofstream sum_out(fs::path(out_dir) / "summary.json");
    sum_out << summary.dump(2) << "\n";
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_render(const std::string& ply_path, const std::string& data_dir, int camera_id,
               std::optional<double> right_baseline, const std::string& out_prefix) {
    const splat::GaussianCloud cloud = splat::read_gaussians_ply(ply_path);
    const splat::Dataset ds = splat::load_colmap_text(data_dir);
    const splat::DatasetView* view = ds.find_view(camera_id);
    if (view == nullptr)
        splat::fail(splat::ErrorCode::configuration,
                    "render: no view with id " + std::to_string(camera_id));

    splat::RenderOptions opts;
    opts.keep_contributors = false;
    const splat::Vec3 background{};
    const splat::RenderedFrame frame =
        splat::render_frame(cloud, view->camera, background, opts);
    splat::write_png(out_prefix + "color.png", frame.color);
    splat::write_depth_pfm(out_prefix + "depth.pfm", frame.depth, frame.depth_mask());

    if (right_baseline) {
        const splat::Camera right_cam = splat::right_pose(view->camera, *right_baseline);
        const splat::RenderedFrame right = splat::render_frame(cloud, right_cam, background, opts);
        splat::write_png(out_prefix + "right.png", right.color);
        splat::write_depth_pfm(out_prefix + "right_depth.pfm", right.depth, right.depth_mask());
    }
    return 0;
}

int run_eval(const std::string& ply_path, const std::string& data_dir, int holdout_every,
             const std::string& subset, const std::string& out_path) {
    const splat::GaussianCloud cloud = splat::read_gaussians_ply(ply_path);
    const splat::Dataset ds = splat::load_colmap_text(data_dir);

    splat::RenderOptions opts;
    opts.keep_contributors = false;
    double psnr = 0, ssim_sum = 0, abs_rel = 0, rmse = 0, delta = 0;
    size_t n_views = 0, n_depth = 0;
    json per_view = json::array();
    for (size_t i = 0; i < ds.views.size(); ++i) {
        const bool test = is_test_view(i, holdout_every);
        if (subset == "test" && !test) continue;
        if (subset == "train" && test) continue;
        const splat::DatasetView& v = ds.views[i];
        const splat::RenderedFrame frame = splat::render_frame(cloud, v.camera, {}, opts);
        const auto vs = splat::eval_view_synthesis(frame.color, v.image);
        psnr += vs.psnr_db;
        ssim_sum += vs.ssim;
        ++n_views;
        json rec = {{"view_id", v.id}, {"psnr", vs.psnr_db}, {"ssim", vs.ssim}};
        if (v.has_gt_depth) {
            splat::Mask mask = frame.depth_mask();
            for (int y = 0; y < mask.height; ++y)
                for (int x = 0; x < mask.width; ++x)
                    mask.set(y, x, mask.get(y, x) && v.gt_depth_valid.get(y, x));
            const auto dm = splat::eval_depth(frame.depth, v.gt_depth, mask);
            abs_rel += dm.abs_rel;
            rmse += dm.rmse;
            delta += dm.delta_125;
            ++n_depth;
            rec["abs_rel"] = dm.abs_rel;
            rec["rmse"] = dm.rmse;
            rec["delta_125"] = dm.delta_125;
        }
        per_view.push_back(rec);
    }
    if (n_views == 0)
        splat::fail(splat::ErrorCode::empty_evaluation, "eval: no views in the selected subset");

    // The Table-style metric set; LPIPS needs a pretrained network and stays
    // null here.
    json metrics = {
        {"abs_rel", n_depth ? json(abs_rel / n_depth) : json(nullptr)},
        {"rmse", n_depth ? json(rmse / n_depth) : json(nullptr)},
        {"delta_125", n_depth ? json(delta / n_depth) : json(nullptr)},
        {"ssim", ssim_sum / n_views},
        {"psnr", psnr / n_views},
        {"lpips", nullptr},
        {"views", per_view},
        {"subset", subset},
    };
    if (out_path.empty()) {
        std::cout << metrics.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        out << metrics.dump(2) << "\n";
        if (!out) splat::fail(splat::ErrorCode::io, "eval: cannot write " + out_path);
    }
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
    const splat::SynthSceneSpec spec = splat::load_synth_spec(spec_path);
    const splat::Dataset ds = splat::gen_synth_scene(spec);
    splat::write_dataset(ds, out_dir);
    std::cout << "{\"views\": " << ds.views.size() << ", \"points\": " << ds.points.size()
              << "}\n";
    return 0;
}

int run_match(const std::string& left_path, const std::string& right_path,
              const std::string& out_path, int d_max, int window) {
    const splat::Image left = splat::read_png(left_path);
    const splat::Image right = splat::read_png(right_path);
    if (d_max <= 0) d_max = left.width / 4;
    const splat::DisparityMap disp = splat::compute_disparity(left, right, d_max, window);
    // Invalid pixels keep the -1 sentinel (disparity 0 is a valid value).
    splat::write_pfm(out_path, disp.disparity);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale differentiable Gaussian splatting with depth-prior supervision"};
    app.require_subcommand(1);

    std::string data_dir, config_path, out_dir, ply_path, out_prefix, subset = "all";
    std::string left_path, right_path, out_path, spec_path;
    int holdout_every = 0, camera_id = 0, d_max = 0, window = 9;
    double right_baseline_value = 0;

    auto* train = app.add_subcommand("train", "Optimize a Gaussian cloud on a dataset");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--config", config_path, "train config JSON");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--holdout-every", holdout_every, "reserve every k-th view for testing");

    auto* render = app.add_subcommand("render", "Render a checkpoint from a dataset camera");
    render->add_option("--ply", ply_path, "gaussian checkpoint")->required();
    render->add_option("--data", data_dir, "dataset directory")->required();
    render->add_option("--camera-id", camera_id, "view id to render")->required();
    auto* rb = render->add_option("--right-baseline", right_baseline_value,
                                  "also render the virtual right view at this baseline");
    render->add_option("--out", out_prefix, "output prefix")->required();

    auto* eval = app.add_subcommand("eval", "Compute image and depth metrics");
    eval->add_option("--ply", ply_path, "gaussian checkpoint")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--holdout-every", holdout_every, "holdout used at training time");
    eval->add_option("--subset", subset, "all | train | test")
        ->check(CLI::IsMember({"all", "train", "test"}));
    eval->add_option("--out", out_path, "metrics JSON path (stdout when omitted)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "scene spec JSON")->required();
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    auto* match = app.add_subcommand("match", "Stereo-match a rectified pair");
    match->add_option("--left", left_path, "left image PNG")->required();
    match->add_option("--right", right_path, "right image PNG")->required();
    match->add_option("--out", out_path, "disparity PFM path")->required();
    match->add_option("--d-max", d_max, "disparity search range (default width/4)");
    match->add_option("--window", window, "aggregation window");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) return run_train(data_dir, config_path, out_dir, holdout_every);
        if (render->parsed())
            return run_render(ply_path, data_dir, camera_id,
                              rb->count() ? std::optional(right_baseline_value) : std::nullopt,
                              out_prefix);
        if (eval->parsed()) return run_eval(ply_path, data_dir, holdout_every, subset, out_path);
        if (synth->parsed()) return run_synth(spec_path, out_dir);
        if (match->parsed()) return run_match(left_path, right_path, out_path, d_max, window);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
