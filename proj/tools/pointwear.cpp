// Command-line front end for the clothed-avatar point cloud pipeline:
// dataset synthesis, cut-map construction, training, inference, metrics,
// and normal-map rendering.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "pointwear/evaluator.hpp"
#include "pointwear/io.hpp"
#include "pointwear/synth.hpp"
#include "pointwear/trainer.hpp"

namespace fs = std::filesystem;
using pw::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalOpts {
  std::optional<uint64_t> seed;
  std::string config_path;
  std::string preset = "desk";
  int threads = 0;
};

pw::TrainConfig effective_train_config(const GlobalOpts& g, const json& cli_overrides) {
  // Precedence: CLI flag > config file > preset defaults.
  pw::TrainConfig cfg = pw::TrainConfig::preset(g.preset);
  if (!g.config_path.empty()) cfg.apply_overrides(pw::io::load_json(g.config_path));
  cfg.apply_overrides(cli_overrides);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

std::vector<std::pair<std::string, pw::PointCloudN>> load_cloud_dir(const fs::path& dir) {
  std::vector<std::pair<std::string, pw::PointCloudN>> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ply") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    std::string stem = f.stem().string();
    // frames emitted by `synth` are named <id>.scan.ply
    if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".scan") {
      stem = stem.substr(0, stem.size() - 5);
    }
    out.emplace_back(stem, pw::io::read_ply(f));
  }
  if (out.empty()) throw pw::ValidationError("no .ply files under " + dir.string());
  return out;
}

int run_synth(const GlobalOpts& g, const std::string& out, int frames, const std::string& skirt) {
  pw::synth::FigureSpec spec;
  pw::synth::DatasetParams params;
  if (!g.config_path.empty()) {
    const json j = pw::io::load_json(g.config_path);
    if (j.contains("figure")) spec = pw::synth::FigureSpec::from_json(j["figure"]);
    params.body_samples = j.value("body_samples", params.body_samples);
    if (j.contains("scan")) {
      const auto& s = j["scan"];
      params.skirt.scan_body_points = s.value("body_points", params.skirt.scan_body_points);
      params.skirt.scan_skirt_points = s.value("skirt_points", params.skirt.scan_skirt_points);
      params.skirt.wrinkle_amplitude = s.value("wrinkle_amplitude", params.skirt.wrinkle_amplitude);
    }
    if (j.contains("mask")) {
      params.mask_resolution = j["mask"].value("resolution", params.mask_resolution);
      params.mask_splat_radius = j["mask"].value("splat_radius", params.mask_splat_radius);
    }
  }
  spec.skirt = pw::synth::skirt_type_from_string(skirt);
  params.frames = frames;
  params.seed = g.seed.value_or(1);
  if (g.preset == "paper") params.body_samples = 47911;
  pw::synth::emit_dataset(spec, params, out);
  std::cout << "dataset written to " << out << "\n";
  return kExitOk;
}

int run_cutmap(const GlobalOpts& g, const std::string& data, const std::string& out,
               const std::string& viz) {
  const fs::path dir(data);
  const json config = pw::io::load_json(dir / "config.json");
  const pw::synth::FigureSpec spec = pw::synth::FigureSpec::from_json(config.at("figure"));
  const pw::synth::Figure fig = pw::synth::make_figure(spec);
  const uint64_t seed = g.seed.value_or(config.value("seed", 1));
  const std::size_t n = config.value("body_samples", std::size_t{4096});

  const pw::SurfaceSamples samples =
      pw::synth::sample_body_surface(fig, n, pw::subseed(seed, "samples"));
  const int resolution = config.at("mask").value("resolution", 512);
  const double splat = config.at("mask").value("splat_radius", 3.0);
  const pw::synth::MaskCameras cams = pw::synth::mask_cameras(fig.body, resolution);

  const pw::io::ImageU8 mask_front = pw::io::read_png(dir / "masks" / "front.png");
  const pw::io::ImageU8 mask_back = pw::io::read_png(dir / "masks" / "back.png");
  const std::vector<std::string> unclothed =
      config.value("unclothed_parts", fig.unclothed_part_names);

  const pw::CutMap map = pw::synth::cut_map_from_masks(fig.body, samples, mask_front, mask_back,
                                                       cams, splat, unclothed);
  pw::save_cut_map(out, map);

  if (!viz.empty()) {
    // Label visualization rendered from the front: unclothed gray, deformed
    // blue-ish, generated green-ish.
    pw::PointCloudN colored = samples.cloud;
    for (std::size_t i = 0; i < colored.size(); ++i) {
      switch (map.labels[i]) {
        case pw::RegionLabel::kUnclothed: colored.normals[i] = pw::Vec3(0.6, 0.6, 0.6); break;
        case pw::RegionLabel::kDeformed: colored.normals[i] = pw::Vec3(-0.5, -0.2, 0.9); break;
        case pw::RegionLabel::kGenerated: colored.normals[i] = pw::Vec3(-0.4, 0.9, -0.4); break;
      }
      colored.normals[i].normalize();
    }
    pw::io::write_png(viz, pw::render_normal_map(colored, cams.front, splat).to_image());
  }

  std::cout << "cutmap: " << map.count(pw::RegionLabel::kUnclothed) << " unclothed, "
            << map.count(pw::RegionLabel::kDeformed) << " deformed, "
            << map.count(pw::RegionLabel::kGenerated) << " generated; " << map.unhit_samples
            << " samples unseen by either view\n";
  return kExitOk;
}

int run_train(const GlobalOpts& g, const std::string& data, const std::string& out,
              const json& overrides) {
  const pw::TrainConfig cfg = effective_train_config(g, overrides);
  const pw::Dataset dataset = pw::Dataset::load(data);
  const pw::TrainResult result = pw::train(cfg, dataset, out);
  std::cout << "trained " << result.epochs_run << " epochs; checkpoint "
            << result.final_checkpoint.string() << "\n";
  return kExitOk;
}

int run_infer(const std::string& checkpoint, const std::string& data, const std::string& pose_arg,
              const std::string& out, const std::vector<std::string>& blend_args) {
  const pw::Dataset dataset = pw::Dataset::load(data);
  auto model = pw::load_checkpoint(checkpoint, dataset.body.vertex_count());

  std::optional<pw::GarmentBlend> blend;
  if (!blend_args.empty()) {
    if (blend_args.size() != 3) {
      throw pw::ArgumentError("--garment-blend expects: ckpt_a ckpt_b alpha");
    }
    auto code_of = [&](const std::string& path) {
      auto m = pw::load_checkpoint(path, dataset.body.vertex_count());
      return Eigen::RowVectorXd(m->codes.global->value.row(0));
    };
    pw::GarmentBlend b;
    b.code_a = code_of(blend_args[0]);
    b.code_b = code_of(blend_args[1]);
    b.alpha = std::stod(blend_args[2]);
    blend = b;
  }

  std::vector<std::pair<std::string, fs::path>> poses;
  if (fs::is_directory(pose_arg)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(pose_arg)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 10 && name.substr(name.size() - 10) == ".pose.json") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::string id = f.filename().string();
      poses.emplace_back(id.substr(0, id.size() - 10), f);
    }
    if (poses.empty()) throw pw::ValidationError("no pose files under " + pose_arg);
  } else {
    poses.emplace_back(fs::path(pose_arg).stem().string(), pose_arg);
  }

  fs::create_directories(out);
  pw::io::save_json(fs::path(out) / "config.json", model->config.to_json());
  for (const auto& [id, path] : poses) {
    const pw::Pose pose = pw::load_pose(path);
    const pw::MergedCloud merged = pw::infer(*model, dataset.body, dataset.cut_map, pose, blend);
    pw::io::write_ply(fs::path(out) / (id + ".ply"), merged.cloud);
    std::cout << id << ": " << merged.cloud.size() << " points\n";
  }
  return kExitOk;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& out,
             const std::string& dump, int resolution, double splat) {
  auto pred_clouds = load_cloud_dir(pred);
  auto gt_clouds = load_cloud_dir(gt);

  std::vector<std::pair<std::string, pw::PointCloudN>> matched_gt;
  for (const auto& [id, cloud] : pred_clouds) {
    bool found = false;
    for (auto& [gid, gcloud] : gt_clouds) {
      if (gid == id) {
        matched_gt.emplace_back(gid, gcloud);
        found = true;
        break;
      }
    }
    if (!found) throw pw::ValidationError("no ground-truth frame for id " + id);
  }

  const pw::eval::Report report =
      pw::eval::evaluate_frames(pred_clouds, matched_gt, resolution, splat, dump);
  pw::io::save_json(out, report.to_json());
  std::cout << "mse " << report.mean_mse << "  cd " << report.mean_cd << "  nml "
            << report.mean_nml << "\n";
  if (report.has_nan()) {
    std::cerr << "error: NaN metric in report\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int run_render(const std::string& cloud_path, const std::string& out, int resolution,
               double splat) {
  const pw::PointCloudN cloud = pw::io::read_ply(cloud_path);
  if (!cloud.has_normals()) throw pw::ValidationError("cloud has no normals to render");
  const pw::eval::EvalCameras cams = pw::eval::EvalCameras::standard(cloud, resolution, splat);
  fs::create_directories(out);
  const std::string stem = fs::path(cloud_path).stem().string();
  for (const pw::OrthoCamera& cam : cams.cameras) {
    const std::string side = cam.view == pw::ViewSide::kFront ? "front" : "back";
    pw::io::write_png(fs::path(out) / (stem + "_" + side + ".png"),
                      pw::render_normal_map(cloud, cam, splat).to_image());
  }
  std::cout << "renders written to " << out << "\n";
  return kExitOk;
}

int run_inspect(const std::string& checkpoint) {
  std::cout << pw::checkpoint_manifest(checkpoint).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud clothed avatar pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root random seed");
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--preset", g.preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--threads", g.threads, "worker thread count");

  auto* synth = app.add_subcommand("synth", "emit a synthetic dataset");
  std::string synth_out;
  int synth_frames = 8;
  std::string synth_skirt = "long";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--frames", synth_frames, "number of frames");
  synth->add_option("--skirt", synth_skirt, "long|short|none")
      ->check(CLI::IsMember({"long", "short", "none"}));

  auto* cutmap = app.add_subcommand("cutmap", "build the clothing-cut map from masks");
  std::string cut_data, cut_out, cut_viz;
  cutmap->add_option("--data", cut_data, "dataset directory")->required();
  cutmap->add_option("--out", cut_out, "output cutmap file")->required();
  cutmap->add_option("--viz", cut_viz, "optional label visualization PNG");

  auto* train = app.add_subcommand("train", "train on a dataset");
  std::string train_data, train_out;
  std::optional<int> train_epochs, train_batch;
  std::optional<double> train_lr;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--epochs", train_epochs, "override epoch count");
  train->add_option("--batch", train_batch, "override batch size");
  train->add_option("--lr", train_lr, "override learning rate");

  auto* infer = app.add_subcommand("infer", "run inference for poses");
  std::string infer_ckpt, infer_data, infer_pose, infer_out;
  std::vector<std::string> infer_blend;
  infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
  infer->add_option("--data", infer_data, "dataset directory (body + cutmap)")->required();
  infer->add_option("--pose", infer_pose, "pose file or directory")->required();
  infer->add_option("--out", infer_out, "output directory")->required();
  infer->add_option("--garment-blend", infer_blend, "ckpt_a ckpt_b alpha")->expected(3);

  auto* eval = app.add_subcommand("eval", "MSE/CD/NML report");
  std::string eval_pred, eval_gt, eval_out = "report.json", eval_dump;
  int eval_res = 1024;
  double eval_splat = 5.0;
  eval->add_option("--pred", eval_pred, "predicted cloud directory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth cloud directory")->required();
  eval->add_option("--out", eval_out, "report JSON path");
  eval->add_option("--dump", eval_dump, "directory for rendered PNGs");
  eval->add_option("--resolution", eval_res, "render resolution");
  eval->add_option("--splat", eval_splat, "splat radius in pixels");

  auto* render = app.add_subcommand("render", "normal-map PNGs for a cloud");
  std::string render_cloud, render_out;
  int render_res = 1024;
  double render_splat = 5.0;
  render->add_option("--cloud", render_cloud, "PLY file")->required();
  render->add_option("--out", render_out, "output directory")->required();
  render->add_option("--resolution", render_res, "render resolution");
  render->add_option("--splat", render_splat, "splat radius in pixels");

  auto* inspect = app.add_subcommand("inspect", "dump a checkpoint manifest");
  std::string inspect_ckpt;
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (g.threads > 0) pw::set_thread_count(g.threads);

  try {
    if (synth->parsed()) return run_synth(g, synth_out, synth_frames, synth_skirt);
    if (cutmap->parsed()) return run_cutmap(g, cut_data, cut_out, cut_viz);
    if (train->parsed()) {
      json overrides;
      if (train_epochs) overrides["epochs"] = *train_epochs;
      if (train_batch) overrides["batch_size"] = *train_batch;
      if (train_lr) overrides["learning_rate"] = *train_lr;
      return run_train(g, train_data, train_out, overrides);
    }
    if (infer->parsed())
      return run_infer(infer_ckpt, infer_data, infer_pose, infer_out, infer_blend);
    if (eval->parsed()) return run_eval(eval_pred, eval_gt, eval_out, eval_dump, eval_res, eval_splat);
    if (render->parsed()) return run_render(render_cloud, render_out, render_res, render_splat);
    if (inspect->parsed()) return run_inspect(inspect_ckpt);
  } catch (const pw::NumericError& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const pw::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const pw::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
