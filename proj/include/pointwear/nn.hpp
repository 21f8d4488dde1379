#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pointwear/io.hpp"
#include "pointwear/tape.hpp"

namespace pw::nn {

class ParamStore {
 public:
  ad::Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        Matrix init);
  ad::Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<ad::Parameter>>& all() const { return params_; }
  std::vector<ad::Parameter*> pointers() const;
  void zero_grads();
  std::size_t scalar_count() const;

  void save(io::ArchiveWriter& w) const;
  // Loads values by name; throws ValidationError on missing names or shape
  // mismatches.
  void load(const io::Archive& a);

 private:
  std::vector<std::unique_ptr<ad::Parameter>> params_;
};

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

struct Linear {
  ad::Parameter* weight = nullptr;  // in x out
  ad::Parameter* bias = nullptr;    // 1 x out

  static Linear make(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                     bool zero_init = false);
  ad::Var apply(ad::Tape& tape, ad::Var x) const;
};

/// Dense layers with softplus between them; no activation after the last.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp make(ParamStore& store, const std::string& name, const std::vector<int>& dims,
                  Rng& rng);
  ad::Var apply(ad::Tape& tape, ad::Var x, bool activate_last = false) const;
  int out_dim() const;
};

// ---------------------------------------------------------------------------
// Hierarchical set abstraction over a point cloud, with optional feature
// propagation back to every input point. Center selection and grouping are
// pure functions of the point multiset: farthest-point traversal seeded at
// the point farthest from the centroid and k-nearest grouping, with exact
// ties broken by lexicographic coordinate order. Permuting the input permutes
// the output rows and changes nothing else.

struct SaLevelConfig {
  int centers = 0;
  int k = 8;
  std::vector<int> mlp;  // widths appended to the input dim
};

struct SetEncoderConfig {
  std::vector<SaLevelConfig> levels;
  std::vector<std::vector<int>> fp_mlp;  // per downward step; used in dense mode
  int in_feature_dim = 3;
  int out_dim = 64;

  // Standard stack: 4 levels whose widths scale with the output size.
  static SetEncoderConfig dense_default(int out_dim, const std::vector<int>& center_counts, int k);
  static SetEncoderConfig global_default(int out_dim, const std::vector<int>& center_counts, int k);

  void validate(std::size_t point_count) const;
};

struct FpInterp {
  std::vector<std::array<uint32_t, 3>> idx;
  std::vector<std::array<double, 3>> w;
};

struct SaLevelPlan {
  std::vector<uint32_t> center_idx;    // into the previous level's points
  std::vector<uint32_t> neighbor_idx;  // centers*k rows, into the previous level
  Matrix rel_pos;                      // centers*k x 3
  std::vector<Vec3> positions;         // the centers
};

struct SaPlan {
  std::vector<SaLevelPlan> levels;
  std::vector<FpInterp> fp;  // fp[l] maps level l+1 features onto level l points
  std::size_t input_count = 0;
};

SaPlan build_sa_plan(const std::vector<Vec3>& positions, const SetEncoderConfig& config,
                     bool with_fp);

// Deterministic multiset-stable farthest point traversal used by the plan.
std::vector<uint32_t> stable_fps(const std::vector<Vec3>& points, std::size_t n);

class SetEncoder {
 public:
  SetEncoder(ParamStore& store, const std::string& name, SetEncoderConfig config, bool dense,
             Rng& rng);

  // Per-point features for all input points (requires a plan with fp data).
  ad::Var forward_dense(ad::Tape& tape, const SaPlan& plan, const Matrix& features) const;
  // Single pooled feature row (1 x out_dim).
  ad::Var forward_global(ad::Tape& tape, const SaPlan& plan, const Matrix& features) const;

  const SetEncoderConfig& config() const { return config_; }

 private:
  SetEncoderConfig config_;
  bool dense_;
  std::vector<Mlp> sa_mlps_;
  std::vector<Mlp> fp_mlps_;
  Linear global_head_;

  std::vector<ad::Var> run_sa(ad::Tape& tape, const SaPlan& plan, const Matrix& features) const;
};

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 3.0e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1.0e-8;
};

// One bias-corrected update over accumulated gradients; `step` counts from 1.
void adam_step(const std::vector<ad::Parameter*>& params, const AdamConfig& config, int64_t step);

}  // namespace pw::nn
