#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pointwear/body.hpp"
#include "pointwear/cutmap.hpp"
#include "pointwear/deformer.hpp"
#include "pointwear/generator.hpp"
#include "pointwear/losses.hpp"
#include "pointwear/nn.hpp"

namespace pw {

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 8;
  double learning_rate = 3.0e-4;
  int normal_loss_start_epoch = 400;
  uint64_t seed = 1;
  std::size_t merge_budget = 47911;  // N after the farthest-point merge
  double flip_probability = 0.5;
  int checkpoint_stride = 50;
  losses::LossWeights loss_weights;

  PoseEncoderConfig pose_encoder;
  PartEncoderConfig part_encoder;
  DecoderConfig decoder;
  GeneratorConfig generator;
  int garment_dim = 64;
  double garment_init_std = 0.01;
  std::size_t part_points = 2048;
  std::vector<std::string> generator_parts = {"left_upper_leg", "left_lower_leg",
                                              "right_upper_leg", "right_lower_leg"};

  static TrainConfig paper_preset();
  static TrainConfig desk_preset();
  static TrainConfig preset(const std::string& name);

  void validate() const;
  io::json to_json() const;
  static TrainConfig from_json(const io::json& j);
  // Overrides fields present in `j` on top of this config.
  void apply_overrides(const io::json& j);
};

struct TrainSample {
  Pose pose;
  PointCloudN gt_scan;
  std::string frame_id;
};

struct Dataset {
  ArticulatedBody body;
  CutMap cut_map;
  std::vector<TrainSample> frames;
  io::json config;

  static Dataset load(const std::filesystem::path& dir);
};

// x -> -x on scan and pose, with left/right joints swapped. Involutive.
TrainSample augment_flip(const TrainSample& sample, const ArticulatedBody& body);
Pose flip_pose(const Pose& pose, const ArticulatedBody& body);

struct MergedCloud {
  PointCloudN cloud;
  std::vector<RegionLabel> provenance;  // branch of origin per point
};

// Concatenates the three branches and downsamples to exactly n by farthest
// point sampling (skipped when n equals the union size).
MergedCloud merge_branches(const PointCloudN& unclothed, const PointCloudN& deformed,
                           const PointCloudN& generated, std::size_t n, uint64_t seed);

/// All trainable state plus the module instances that own it.
struct Model {
  TrainConfig config;
  nn::ParamStore store;
  std::unique_ptr<PoseEncoder> pose_encoder;
  std::unique_ptr<PoseDecoder> decoder;
  std::unique_ptr<PartEncoder> part_encoder;
  std::unique_ptr<PatchGenerator> generator;
  GarmentCodes codes;

  static std::unique_ptr<Model> build(const TrainConfig& config, std::size_t body_vertex_count);
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, int epoch);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path,
                                       std::size_t body_vertex_count);
io::json checkpoint_manifest(const std::filesystem::path& path);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path log_path;
  int epochs_run = 0;
  losses::LossTerms last_terms;
};

// End-to-end optimization of the networks and garment codes. Deterministic
// given config.seed. Writes checkpoints/epoch_*.ckpt (always epoch 1 and the
// final epoch), model.ckpt, and a JSON-lines loss log under out_dir. Aborts
// with the last finite-loss checkpoint on a non-finite loss.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::filesystem::path& out_dir);

struct GarmentBlend {
  Eigen::RowVectorXd code_a;
  Eigen::RowVectorXd code_b;
  double alpha = 0.0;
};

// Full inference: replicate unclothed samples, deform the near-body region,
// generate the loose region, merge to config.merge_budget points.
MergedCloud infer(const Model& model, const ArticulatedBody& body, const CutMap& cut_map,
                  const Pose& pose, const std::optional<GarmentBlend>& blend = std::nullopt);

}  // namespace pw
