#include "pointwear/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace pw {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

TrainConfig TrainConfig::paper_preset() { return TrainConfig{}; }

TrainConfig TrainConfig::desk_preset() {
  TrainConfig c;
  c.epochs = 300;
  c.normal_loss_start_epoch = 120;  // activation point scaled with the schedule
  c.merge_budget = 3072;
  c.checkpoint_stride = 50;
  c.pose_encoder.abstraction_counts = {512, 128, 32, 16};
  c.pose_encoder.feature_dim = 64;
  c.pose_encoder.group_k = 8;
  c.part_encoder.abstraction_counts = {128, 32};
  c.part_encoder.feature_dim = 64;
  c.part_encoder.group_k = 8;
  c.decoder.pose_dim = 64;
  c.decoder.width = 96;
  c.generator.patches = 4;
  c.generator.points = 1024;
  c.generator.pose_dim = 64;
  c.generator.width = 64;
  c.part_points = 512;
  return c;
}

TrainConfig TrainConfig::preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ArgumentError("unknown preset: " + name);
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw ArgumentError("train config: bad schedule");
  if (normal_loss_start_epoch < 1 || normal_loss_start_epoch > epochs) {
    throw ArgumentError("train config: normal loss start epoch out of range");
  }
  if (merge_budget < 1) throw ArgumentError("train config: merge budget must be positive");
  if (flip_probability < 0.0 || flip_probability > 1.0) {
    throw ArgumentError("train config: flip probability out of range");
  }
  loss_weights.validate();
  pose_encoder.validate();
  generator.validate();
  if (decoder.pose_dim != pose_encoder.feature_dim) {
    throw ArgumentError("train config: decoder pose dim must match the pose encoder");
  }
  if (generator.pose_dim != part_encoder.feature_dim) {
    throw ArgumentError("train config: generator pose dim must match the part encoder");
  }
  if (decoder.garment_dim != garment_dim || generator.garment_dim != garment_dim) {
    throw ArgumentError("train config: garment code dims disagree");
  }
  if (generator_parts.empty()) throw ArgumentError("train config: no generator parts");
}

io::json TrainConfig::to_json() const {
  io::json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["normal_loss_start_epoch"] = normal_loss_start_epoch;
  j["seed"] = seed;
  j["merge_budget"] = merge_budget;
  j["flip_probability"] = flip_probability;
  j["checkpoint_stride"] = checkpoint_stride;
  j["loss_weights"] = {{"lambda_cd", loss_weights.lambda_cd}, {"lambda_n", loss_weights.lambda_n},
                       {"lambda_rd", loss_weights.lambda_rd}, {"lambda_rg", loss_weights.lambda_rg},
                       {"lambda_col", loss_weights.lambda_col}, {"epsilon", loss_weights.epsilon}};
  j["pose_encoder"] = {{"abstraction_counts", pose_encoder.abstraction_counts},
                       {"feature_dim", pose_encoder.feature_dim},
                       {"group_k", pose_encoder.group_k}};
  j["part_encoder"] = {{"abstraction_counts", part_encoder.abstraction_counts},
                       {"feature_dim", part_encoder.feature_dim},
                       {"group_k", part_encoder.group_k}};
  j["decoder"] = {{"pose_dim", decoder.pose_dim},       {"garment_dim", decoder.garment_dim},
                  {"width", decoder.width},             {"hidden_layers", decoder.hidden_layers},
                  {"skip_layer", decoder.skip_layer}};
  j["generator"] = {{"patches", generator.patches},   {"points", generator.points},
                    {"pose_dim", generator.pose_dim}, {"garment_dim", generator.garment_dim},
                    {"width", generator.width},       {"hidden_layers", generator.hidden_layers}};
  j["garment_dim"] = garment_dim;
  j["garment_init_std"] = garment_init_std;
  j["part_points"] = part_points;
  j["generator_parts"] = generator_parts;
  return j;
}

void TrainConfig::apply_overrides(const io::json& j) {
  epochs = j.value("epochs", epochs);
  batch_size = j.value("batch_size", batch_size);
  learning_rate = j.value("learning_rate", learning_rate);
  normal_loss_start_epoch = j.value("normal_loss_start_epoch", normal_loss_start_epoch);
  seed = j.value("seed", seed);
  merge_budget = j.value("merge_budget", merge_budget);
  flip_probability = j.value("flip_probability", flip_probability);
  checkpoint_stride = j.value("checkpoint_stride", checkpoint_stride);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    loss_weights.lambda_cd = w.value("lambda_cd", loss_weights.lambda_cd);
    loss_weights.lambda_n = w.value("lambda_n", loss_weights.lambda_n);
    loss_weights.lambda_rd = w.value("lambda_rd", loss_weights.lambda_rd);
    loss_weights.lambda_rg = w.value("lambda_rg", loss_weights.lambda_rg);
    loss_weights.lambda_col = w.value("lambda_col", loss_weights.lambda_col);
    loss_weights.epsilon = w.value("epsilon", loss_weights.epsilon);
  }
  if (j.contains("pose_encoder")) {
    const auto& e = j["pose_encoder"];
    pose_encoder.abstraction_counts =
        e.value("abstraction_counts", pose_encoder.abstraction_counts);
    pose_encoder.feature_dim = e.value("feature_dim", pose_encoder.feature_dim);
    pose_encoder.group_k = e.value("group_k", pose_encoder.group_k);
  }
  if (j.contains("part_encoder")) {
    const auto& e = j["part_encoder"];
    part_encoder.abstraction_counts =
        e.value("abstraction_counts", part_encoder.abstraction_counts);
    part_encoder.feature_dim = e.value("feature_dim", part_encoder.feature_dim);
    part_encoder.group_k = e.value("group_k", part_encoder.group_k);
  }
  if (j.contains("decoder")) {
    const auto& d = j["decoder"];
    decoder.pose_dim = d.value("pose_dim", decoder.pose_dim);
    decoder.garment_dim = d.value("garment_dim", decoder.garment_dim);
    decoder.width = d.value("width", decoder.width);
    decoder.hidden_layers = d.value("hidden_layers", decoder.hidden_layers);
    decoder.skip_layer = d.value("skip_layer", decoder.skip_layer);
  }
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    generator.patches = g.value("patches", generator.patches);
    generator.points = g.value("points", generator.points);
    generator.pose_dim = g.value("pose_dim", generator.pose_dim);
    generator.garment_dim = g.value("garment_dim", generator.garment_dim);
    generator.width = g.value("width", generator.width);
    generator.hidden_layers = g.value("hidden_layers", generator.hidden_layers);
  }
  garment_dim = j.value("garment_dim", garment_dim);
  garment_init_std = j.value("garment_init_std", garment_init_std);
  part_points = j.value("part_points", part_points);
  generator_parts = j.value("generator_parts", generator_parts);
}

TrainConfig TrainConfig::from_json(const io::json& j) {
  TrainConfig c;
  if (j.contains("preset")) c = preset(j["preset"].get<std::string>());
  c.apply_overrides(j);
  return c;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::load(const fs::path& dir) {
  Dataset ds;
  ds.body = load_body(dir / "body.json");
  ds.cut_map = load_cut_map(dir / "cutmap.bin");
  if (fs::exists(dir / "config.json")) ds.config = io::load_json(dir / "config.json");

  for (const BaryRecord& b : ds.cut_map.sample_refs) {
    for (uint32_t v : b.vertex_ids) {
      if (v >= ds.body.vertex_count()) {
        throw ValidationError("cut map references a vertex beyond the body");
      }
    }
  }

  const fs::path frames_dir = dir / "frames";
  std::vector<fs::path> pose_files;
  if (fs::exists(frames_dir)) {
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 10 && name.substr(name.size() - 10) == ".pose.json") {
        pose_files.push_back(entry.path());
      }
    }
  }
  std::sort(pose_files.begin(), pose_files.end());
  for (const fs::path& pf : pose_files) {
    TrainSample s;
    std::string id = pf.filename().string();
    id = id.substr(0, id.size() - 10);
    s.frame_id = id;
    s.pose = load_pose(pf);
    s.gt_scan = io::read_ply(frames_dir / (id + ".scan.ply"));
    if (s.gt_scan.size() == 0) throw ValidationError("empty scan for frame " + id);
    if (!s.gt_scan.has_normals()) throw ValidationError("scan missing normals for frame " + id);
    if (s.pose.joint_rotations.size() != ds.body.joint_count()) {
      throw ValidationError("pose joint count mismatch for frame " + id);
    }
    ds.frames.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Flip augmentation

namespace {

// Joint pairing by part name; joints and parts are index-aligned in the body
// format. "left_*" pairs with "right_*", everything else maps to itself.
std::vector<uint32_t> mirror_joint_map(const ArticulatedBody& body) {
  if (body.part_count() != body.joint_count()) {
    throw ValidationError("flip: body parts and joints are not aligned");
  }
  std::vector<uint32_t> map(body.joint_count());
  for (std::size_t j = 0; j < body.joint_count(); ++j) {
    const std::string& name = body.part_names[j];
    std::string other;
    if (name.rfind("left_", 0) == 0) {
      other = "right_" + name.substr(5);
    } else if (name.rfind("right_", 0) == 0) {
      other = "left_" + name.substr(6);
    } else {
      map[j] = static_cast<uint32_t>(j);
      continue;
    }
    const int idx = body.part_index(other);
    if (idx < 0) throw ValidationError("flip: unpaired left/right part: " + name);
    map[j] = static_cast<uint32_t>(idx);
  }
  return map;
}

Mat3 mirror_rotation(const Mat3& r) {
  Mat3 m = r;
  // diag(-1,1,1) * R * diag(-1,1,1): flip the off-diagonal x row/column.
  m(0, 1) = -m(0, 1);
  m(0, 2) = -m(0, 2);
  m(1, 0) = -m(1, 0);
  m(2, 0) = -m(2, 0);
  return m;
}

}  // namespace

Pose flip_pose(const Pose& pose, const ArticulatedBody& body) {
  const auto map = mirror_joint_map(body);
  Pose out;
  out.joint_rotations.resize(pose.joint_rotations.size());
  for (std::size_t j = 0; j < pose.joint_rotations.size(); ++j) {
    out.joint_rotations[j] = mirror_rotation(pose.joint_rotations[map[j]]);
  }
  out.root_translation = pose.root_translation;
  out.root_translation.x() = -out.root_translation.x();
  return out;
}

TrainSample augment_flip(const TrainSample& sample, const ArticulatedBody& body) {
  TrainSample out;
  out.frame_id = sample.frame_id;
  out.pose = flip_pose(sample.pose, body);
  out.gt_scan.points.resize(sample.gt_scan.size());
  out.gt_scan.normals.resize(sample.gt_scan.normals.size());
  for (std::size_t i = 0; i < sample.gt_scan.size(); ++i) {
    Vec3 p = sample.gt_scan.points[i];
    p.x() = -p.x();
    out.gt_scan.points[i] = p;
  }
  for (std::size_t i = 0; i < sample.gt_scan.normals.size(); ++i) {
    Vec3 n = sample.gt_scan.normals[i];
    n.x() = -n.x();
    out.gt_scan.normals[i] = n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Branch merge

MergedCloud merge_branches(const PointCloudN& unclothed, const PointCloudN& deformed,
                           const PointCloudN& generated, std::size_t n, uint64_t seed) {
  const std::size_t total = unclothed.size() + deformed.size() + generated.size();
  if (n > total) throw ArgumentError("merge_branches: budget exceeds the union size");

  PointCloudN union_cloud;
  std::vector<RegionLabel> tags;
  union_cloud.points.reserve(total);
  union_cloud.normals.reserve(total);
  tags.reserve(total);
  auto push = [&](const PointCloudN& c, RegionLabel tag) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      union_cloud.points.push_back(c.points[i]);
      union_cloud.normals.push_back(c.has_normals() ? c.normals[i] : Vec3(0, 0, 1));
      tags.push_back(tag);
    }
  };
  push(unclothed, RegionLabel::kUnclothed);
  push(deformed, RegionLabel::kDeformed);
  push(generated, RegionLabel::kGenerated);

  if (n == total) return MergedCloud{std::move(union_cloud), std::move(tags)};

  const auto keep = farthest_point_sample(union_cloud.points, n, seed);
  MergedCloud out;
  out.cloud.points.reserve(n);
  out.cloud.normals.reserve(n);
  out.provenance.reserve(n);
  for (uint32_t id : keep) {
    out.cloud.points.push_back(union_cloud.points[id]);
    out.cloud.normals.push_back(union_cloud.normals[id]);
    out.provenance.push_back(tags[id]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

std::unique_ptr<Model> Model::build(const TrainConfig& config, std::size_t body_vertex_count) {
  config.validate();
  auto model = std::make_unique<Model>();
  model->config = config;
  Rng rng(subseed(config.seed, "init"));
  model->pose_encoder =
      std::make_unique<PoseEncoder>(model->store, "pose_enc", config.pose_encoder, rng);
  model->decoder = std::make_unique<PoseDecoder>(model->store, "decoder", config.decoder, rng);
  model->part_encoder =
      std::make_unique<PartEncoder>(model->store, "part_enc", config.part_encoder, rng);
  model->generator =
      std::make_unique<PatchGenerator>(model->store, "generator", config.generator, rng);
  model->codes = make_garment_codes(model->store, body_vertex_count, config.garment_dim,
                                    config.garment_init_std, rng);
  return model;
}

void save_checkpoint(const fs::path& path, const Model& model, int epoch) {
  io::ArchiveWriter w;
  w.meta["kind"] = "checkpoint";
  w.meta["epoch"] = epoch;
  w.meta["seed"] = model.config.seed;
  w.meta["config"] = model.config.to_json();
  w.meta["body_vertices"] = model.codes.local->value.rows();
  model.store.save(w);
  w.save(path);
}

std::unique_ptr<Model> load_checkpoint(const fs::path& path, std::size_t body_vertex_count) {
  const io::Archive a = io::Archive::load(path);
  if (a.meta().value("kind", "") != "checkpoint") throw ValidationError("not a checkpoint");
  const std::size_t ckpt_verts = a.meta().value("body_vertices", std::size_t{0});
  if (ckpt_verts != body_vertex_count) {
    throw ValidationError("checkpoint was trained for a body with " + std::to_string(ckpt_verts) +
                          " vertices, got " + std::to_string(body_vertex_count));
  }
  TrainConfig config = TrainConfig::from_json(a.meta().at("config"));
  auto model = Model::build(config, body_vertex_count);
  model->store.load(a);
  return model;
}

io::json checkpoint_manifest(const fs::path& path) {
  const io::Archive a = io::Archive::load(path);
  io::json j = a.meta();
  io::json names = io::json::array();
  for (const std::string& n : a.names()) {
    names.push_back({{"name", n}, {"shape", a.shape(n)}});
  }
  j["tensors"] = names;
  j.erase("arrays");
  return j;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct SampleSet {
  SurfaceSamples canonical;  // all samples on the canonical mesh
  std::vector<uint32_t> unclothed_ids;
  std::vector<uint32_t> deformed_ids;
  std::vector<BaryRecord> deformed_barys;
  std::vector<BaryRecord> unclothed_barys;
  Matrix deformed_positions;  // canonical, N_d x 3
  bool has_generated = false;
};

SampleSet make_sample_set(const ArticulatedBody& body, const CutMap& map) {
  SampleSet s;
  s.canonical = cut_map_samples(map, body, body.canonical_vertices);
  s.unclothed_ids = map.indices_of(RegionLabel::kUnclothed);
  s.deformed_ids = map.indices_of(RegionLabel::kDeformed);
  s.has_generated = map.count(RegionLabel::kGenerated) > 0;
  for (uint32_t id : s.deformed_ids) s.deformed_barys.push_back(map.sample_refs[id]);
  for (uint32_t id : s.unclothed_ids) s.unclothed_barys.push_back(map.sample_refs[id]);
  s.deformed_positions.resize(static_cast<Eigen::Index>(s.deformed_ids.size()), 3);
  for (std::size_t i = 0; i < s.deformed_ids.size(); ++i) {
    s.deformed_positions.row(static_cast<Eigen::Index>(i)) =
        s.canonical.cloud.points[s.deformed_ids[i]].transpose();
  }
  return s;
}

struct FrameContext {
  Pose pose;
  PointCloudN scan;
  std::vector<Vec3> posed_vertices;
  std::vector<RigidTransform> deformed_transforms;
  PointCloudN unclothed;  // posed copy branch
  std::vector<PointCloudN> part_clouds;
  std::vector<nn::SaPlan> part_plans;
  std::unique_ptr<MeshDistanceField> body_field;
};

std::unique_ptr<FrameContext> build_frame_context(const TrainConfig& config,
                                                  const ArticulatedBody& body,
                                                  const SampleSet& samples,
                                                  const TrainSample& sample,
                                                  const PartEncoder* part_encoder,
                                                  uint64_t part_seed) {
  auto ctx = std::make_unique<FrameContext>();
  ctx->pose = sample.pose;
  ctx->scan = sample.gt_scan;

  const auto bones = forward_kinematics(body, sample.pose);
  ctx->posed_vertices = skin_vertices(body, bones);
  const auto per_vertex = vertex_transforms(body, bones);

  ctx->deformed_transforms.resize(samples.deformed_barys.size());
  for (std::size_t i = 0; i < samples.deformed_barys.size(); ++i) {
    ctx->deformed_transforms[i] =
        point_transform(samples.deformed_barys[i], per_vertex, static_cast<std::int64_t>(i));
  }

  ctx->unclothed.points.resize(samples.unclothed_ids.size());
  ctx->unclothed.normals.resize(samples.unclothed_ids.size());
  for (std::size_t i = 0; i < samples.unclothed_ids.size(); ++i) {
    const uint32_t id = samples.unclothed_ids[i];
    const RigidTransform t =
        point_transform(samples.unclothed_barys[i], per_vertex, static_cast<std::int64_t>(id));
    ctx->unclothed.points[i] = t.apply(samples.canonical.cloud.points[id]);
    ctx->unclothed.normals[i] = t.rotate(samples.canonical.cloud.normals[id]);
  }

  if (samples.has_generated) {
    ctx->part_clouds = sample_part_points(body, ctx->posed_vertices, config.generator_parts,
                                          config.part_points, part_seed);
    for (const PointCloudN& pc : ctx->part_clouds) {
      ctx->part_plans.push_back(part_encoder->plan(pc));
    }
    ctx->body_field = std::make_unique<MeshDistanceField>(body.posed_mesh(ctx->posed_vertices));
  }
  return ctx;
}

struct StepOutput {
  losses::LossTerms terms;
  std::vector<std::pair<ad::Parameter*, Matrix>> grads;
};

StepOutput run_sample(Model& model, const nn::SaPlan& ed_plan, const SampleSet& samples,
                      const FrameContext& ctx, bool normal_active, double grad_scale) {
  const losses::LossWeights& w = model.config.loss_weights;
  ad::Tape tape;

  std::vector<ad::Var> point_parts;
  std::vector<ad::Var> normal_parts;

  if (!ctx.unclothed.points.empty()) {
    point_parts.push_back(tape.constant(points_to_matrix(ctx.unclothed.points)));
    normal_parts.push_back(tape.constant(points_to_matrix(ctx.unclothed.normals)));
  }

  std::optional<DeformForward> def;
  if (!samples.deformed_barys.empty()) {
    def = deform_forward(tape, *model.pose_encoder, ed_plan, ctx.posed_vertices, *model.decoder,
                         model.codes, samples.deformed_barys, samples.deformed_positions,
                         ctx.deformed_transforms);
    point_parts.push_back(def->posed_points);
    normal_parts.push_back(def->posed_normals);
  }

  std::optional<PatchGenerator::Out> gen;
  if (samples.has_generated) {
    ad::Var pose_code = model.part_encoder->encode_parts(tape, ctx.part_plans, ctx.part_clouds);
    gen = model.generator->forward(tape, pose_code, tape.param(*model.codes.global));
    point_parts.push_back(gen->points);
    normal_parts.push_back(gen->normals);
  }
  if (point_parts.empty()) throw ValidationError("training sample has no branches");

  ad::Var union_points = point_parts.size() == 1 ? point_parts[0] : tape.concat_rows(point_parts);
  ad::Var union_normals =
      normal_parts.size() == 1 ? normal_parts[0] : tape.concat_rows(normal_parts);

  std::vector<ad::Var> terms;
  std::vector<double> lambdas;

  ad::Var cd = losses::chamfer_node(tape, union_points, ctx.scan);
  terms.push_back(cd);
  lambdas.push_back(w.lambda_cd);

  ad::Var nml = tape.constant(Matrix::Zero(1, 1));
  if (normal_active) {
    nml = losses::normal_node(tape, union_points.value(), union_normals, ctx.scan);
  }
  terms.push_back(nml);
  lambdas.push_back(normal_active ? w.lambda_n : 0.0);

  ad::Var rd = def ? losses::displacement_reg_node(tape, def->displacements)
                   : tape.constant(Matrix::Zero(1, 1));
  terms.push_back(rd);
  lambdas.push_back(w.lambda_rd);

  ad::Var rg = def ? losses::garment_reg_node(tape, def->local_codes,
                                              tape.param(*model.codes.global))
                   : tape.sum_squares(tape.param(*model.codes.global));
  terms.push_back(rg);
  lambdas.push_back(w.lambda_rg);

  ad::Var col = gen ? losses::collision_node(tape, gen->points, *ctx.body_field, w.epsilon)
                    : tape.constant(Matrix::Zero(1, 1));
  terms.push_back(col);
  lambdas.push_back(w.lambda_col);

  ad::Var total = tape.weighted_sum(terms, lambdas);

  StepOutput out;
  out.terms.cd = cd.value()(0, 0);
  out.terms.nml = normal_active ? nml.value()(0, 0) : 0.0;
  out.terms.rd = rd.value()(0, 0);
  out.terms.rg = rg.value()(0, 0);
  out.terms.col = col.value()(0, 0);
  out.terms.normal_active = normal_active;
  tape.backward(total, grad_scale, &out.grads);
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset, const fs::path& out_dir) {
  config.validate();
  if (dataset.frames.empty()) throw ArgumentError("train: dataset has no frames");
  dataset.cut_map.validate();

  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "checkpoints");
  io::save_json(out_dir / "config.json", config.to_json());

  auto model = Model::build(config, dataset.body.vertex_count());
  const SampleSet samples = make_sample_set(dataset.body, dataset.cut_map);

  const std::size_t union_size = samples.unclothed_ids.size() + samples.deformed_ids.size() +
                                 (samples.has_generated ? config.generator.points : 0);
  if (config.merge_budget > union_size) {
    throw ValidationError("merge budget " + std::to_string(config.merge_budget) +
                          " exceeds the merged union size " + std::to_string(union_size));
  }

  const nn::SaPlan ed_plan = model->pose_encoder->plan(dataset.body.canonical_vertices);

  // Frame contexts are pose-dependent but epoch-independent; cache both flip
  // variants lazily.
  std::vector<std::array<std::unique_ptr<FrameContext>, 2>> contexts(dataset.frames.size());
  auto context_for = [&](std::size_t f, bool flipped) -> FrameContext& {
    auto& slot = contexts[f][flipped ? 1 : 0];
    if (!slot) {
      const TrainSample sample =
          flipped ? augment_flip(dataset.frames[f], dataset.body) : dataset.frames[f];
      slot = build_frame_context(config, dataset.body, samples, sample, model->part_encoder.get(),
                                 subseed(config.seed, "parts", f, flipped ? 1 : 0));
    }
    return *slot;
  };

  io::JsonlLogger log(out_dir / "train_log.jsonl");
  Rng order_rng(subseed(config.seed, "order"));
  Rng flip_rng(subseed(config.seed, "flip"));
  const auto params = model->store.pointers();
  nn::AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};

  // Rolling copy of the last parameter state with finite losses.
  std::vector<Matrix> last_good;
  int last_good_epoch = 0;
  auto snapshot = [&]() {
    last_good.clear();
    for (const ad::Parameter* p : params) last_good.push_back(p->value);
  };
  auto restore_and_abort = [&](const std::string& why) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = last_good[i];
    save_checkpoint(out_dir / "checkpoints" / "abort_last_good.ckpt", *model, last_good_epoch);
    throw NumericError(why + "; last good state saved from epoch " +
                       std::to_string(last_good_epoch));
  };
  snapshot();

  TrainResult result;
  result.log_path = out_dir / "train_log.jsonl";
  int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const bool normal_active = epoch >= config.normal_loss_start_epoch;

    std::vector<std::size_t> order(dataset.frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::size_t count = end - begin;

      std::vector<std::pair<std::size_t, bool>> batch(count);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (std::size_t i = 0; i < count; ++i) {
        batch[i] = {order[begin + i], uni(flip_rng) < config.flip_probability};
      }
      // Contexts are built on demand; do it before the parallel section.
      for (const auto& [f, flipped] : batch) context_for(f, flipped);

      const auto t0 = std::chrono::steady_clock::now();
      std::vector<StepOutput> outputs(count);
      parallel_for_each(count, [&](std::size_t i) {
        const auto& [f, flipped] = batch[i];
        outputs[i] = run_sample(*model, ed_plan, samples, context_for(f, flipped), normal_active,
                                1.0 / static_cast<double>(count));
      });

      losses::LossTerms mean;
      mean.normal_active = normal_active;
      for (const StepOutput& o : outputs) {
        for (const auto& [p, g] : o.grads) p->grad += g;
        mean.cd += o.terms.cd / static_cast<double>(count);
        mean.nml += o.terms.nml / static_cast<double>(count);
        mean.rd += o.terms.rd / static_cast<double>(count);
        mean.rg += o.terms.rg / static_cast<double>(count);
        mean.col += o.terms.col / static_cast<double>(count);
      }
      const double total = mean.total(config.loss_weights);
      if (!std::isfinite(total)) restore_and_abort("non-finite loss at epoch " +
                                                   std::to_string(epoch));

      adam_step(params, adam, ++step);
      model->store.zero_grads();

      const double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
      log.append({{"epoch", epoch},
                  {"step", step},
                  {"cd", mean.cd},
                  {"nml", mean.nml},
                  {"rd", mean.rd},
                  {"rg", mean.rg},
                  {"col", mean.col},
                  {"total", total},
                  {"ms", ms}});
      result.last_terms = mean;
    }

    snapshot();
    last_good_epoch = epoch;
    if (epoch == 1 || epoch == config.epochs ||
        (config.checkpoint_stride > 0 && epoch % config.checkpoint_stride == 0)) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(out_dir / "checkpoints" / name, *model, epoch);
    }
    result.epochs_run = epoch;
  }

  result.final_checkpoint = out_dir / "model.ckpt";
  save_checkpoint(result.final_checkpoint, *model, config.epochs);
  return result;
}

// ---------------------------------------------------------------------------
// Inference

MergedCloud infer(const Model& model, const ArticulatedBody& body, const CutMap& cut_map,
                  const Pose& pose, const std::optional<GarmentBlend>& blend) {
  if (model.codes.local->value.rows() != static_cast<Eigen::Index>(body.vertex_count())) {
    throw ValidationError("infer: checkpoint does not match this body");
  }
  if (pose.joint_rotations.size() != body.joint_count()) {
    throw ValidationError("infer: pose does not match this body");
  }
  const TrainConfig& config = model.config;
  const SampleSet samples = make_sample_set(body, cut_map);

  const auto bones = forward_kinematics(body, pose);
  const auto posed_vertices = skin_vertices(body, bones);
  const auto per_vertex = vertex_transforms(body, bones);

  Eigen::RowVectorXd garment_row = model.codes.global->value.row(0);
  if (blend) {
    if (blend->code_a.size() != garment_row.size() || blend->code_b.size() != garment_row.size()) {
      throw ValidationError("infer: garment blend code dims mismatch");
    }
    garment_row = (1.0 - blend->alpha) * blend->code_a + blend->alpha * blend->code_b;
  }

  // Unclothed: replicate the posed body samples.
  PointCloudN unclothed;
  unclothed.points.resize(samples.unclothed_ids.size());
  unclothed.normals.resize(samples.unclothed_ids.size());
  for (std::size_t i = 0; i < samples.unclothed_ids.size(); ++i) {
    const uint32_t id = samples.unclothed_ids[i];
    const RigidTransform t =
        point_transform(samples.unclothed_barys[i], per_vertex, static_cast<std::int64_t>(id));
    unclothed.points[i] = t.apply(samples.canonical.cloud.points[id]);
    unclothed.normals[i] = t.rotate(samples.canonical.cloud.normals[id]);
  }

  // Deformed branch.
  PointCloudN deformed;
  if (!samples.deformed_barys.empty()) {
    std::vector<RigidTransform> transforms(samples.deformed_barys.size());
    for (std::size_t i = 0; i < transforms.size(); ++i) {
      transforms[i] =
          point_transform(samples.deformed_barys[i], per_vertex, static_cast<std::int64_t>(i));
    }
    ad::Tape tape;
    const nn::SaPlan plan = model.pose_encoder->plan(body.canonical_vertices);
    // The garment blend only swaps the global code row; local codes stay.
    GarmentCodes codes = model.codes;
    DeformForward fwd;
    if (blend) {
      ad::Parameter blended("garment.global.blend", garment_row);
      GarmentCodes blended_codes{model.codes.local, &blended};
      fwd = deform_forward(tape, *model.pose_encoder, plan, posed_vertices, *model.decoder,
                           blended_codes, samples.deformed_barys, samples.deformed_positions,
                           transforms);
      deformed.points = matrix_to_points(fwd.posed_points.value());
      deformed.normals = matrix_to_points(fwd.posed_normals.value());
    } else {
      fwd = deform_forward(tape, *model.pose_encoder, plan, posed_vertices, *model.decoder, codes,
                           samples.deformed_barys, samples.deformed_positions, transforms);
      deformed.points = matrix_to_points(fwd.posed_points.value());
      deformed.normals = matrix_to_points(fwd.posed_normals.value());
    }
  }

  // Generated branch.
  PointCloudN generated;
  if (samples.has_generated) {
    const auto part_clouds =
        sample_part_points(body, posed_vertices, config.generator_parts, config.part_points,
                           subseed(config.seed, "infer_parts"));
    std::vector<nn::SaPlan> plans;
    for (const PointCloudN& pc : part_clouds) plans.push_back(model.part_encoder->plan(pc));
    ad::Tape tape;
    ad::Var pose_code = model.part_encoder->encode_parts(tape, plans, part_clouds);
    const GeneratedCloud gen = generate(*model.generator, pose_code.value().row(0), garment_row);
    generated = gen.cloud;
  }

  return merge_branches(unclothed, deformed, generated, config.merge_budget,
                        subseed(config.seed, "merge"));
}

}  // namespace pw
