#pragma once

#include <string>
#include <vector>

#include "pointwear/body.hpp"
#include "pointwear/nn.hpp"
#include "pointwear/tape.hpp"

namespace pw {

struct PoseEncoderConfig {
  std::vector<int> abstraction_counts = {2048, 512, 128, 32};
  int feature_dim = 256;  // M_p
  int group_k = 16;

  void validate() const;
};

/// Learnable clothing identity: one local code row per template vertex plus a
/// single global row shared with the generator.
struct GarmentCodes {
  ad::Parameter* local = nullptr;   // N_t x M_g
  ad::Parameter* global = nullptr;  // 1 x M_g

  int dim() const { return local ? static_cast<int>(local->value.cols()) : 0; }
};

GarmentCodes make_garment_codes(nn::ParamStore& store, std::size_t vertex_count, int code_dim,
                                double init_std, Rng& rng);

/// Multi-scale set-abstraction encoder over the canonical template. Positions
/// are the canonical vertices; the posed vertex coordinates enter as
/// features. Emits one feature row per vertex.
class PoseEncoder {
 public:
  PoseEncoder(nn::ParamStore& store, const std::string& name, const PoseEncoderConfig& config,
              Rng& rng);

  // The plan depends only on the canonical vertices; build once per body.
  nn::SaPlan plan(const std::vector<Vec3>& canonical_vertices) const;

  ad::Var forward(ad::Tape& tape, const nn::SaPlan& plan,
                  const std::vector<Vec3>& posed_vertices) const;

  const PoseEncoderConfig& config() const { return config_; }

 private:
  PoseEncoderConfig config_;
  std::unique_ptr<nn::SetEncoder> encoder_;
};

struct DecoderConfig {
  int pose_dim = 256;
  int garment_dim = 64;
  int width = 256;
  int hidden_layers = 4;
  int skip_layer = 2;  // input re-joined before this hidden layer

  int input_dim() const { return pose_dim + 2 * garment_dim + 3; }
};

/// Feed-forward pose decoder with an input skip connection and two heads:
/// unconstrained displacement and a normalized normal. Both heads start at
/// zero weights so an untrained model reproduces the plainly-skinned body;
/// the normal head bias starts at (0,0,1).
class PoseDecoder {
 public:
  PoseDecoder(nn::ParamStore& store, const std::string& name, const DecoderConfig& config,
              Rng& rng);

  struct Out {
    ad::Var displacement;  // N x 3
    ad::Var normal;        // N x 3, unit rows
  };
  Out forward(ad::Tape& tape, ad::Var features) const;

  const DecoderConfig& config() const { return config_; }

 private:
  DecoderConfig config_;
  std::vector<nn::Linear> hidden_;
  nn::Linear head_displacement_;
  nn::Linear head_normal_;
};

/// One deformed-branch forward pass on a tape.
struct DeformForward {
  ad::Var displacements;    // canonical, N_d x 3
  ad::Var normals;          // canonical, unit, N_d x 3
  ad::Var posed_points;     // N_d x 3
  ad::Var posed_normals;    // N_d x 3
  ad::Var local_codes;      // N_d x M_g, the interpolated garment codes
};

DeformForward deform_forward(ad::Tape& tape, const PoseEncoder& encoder, const nn::SaPlan& plan,
                             const std::vector<Vec3>& posed_vertices, const PoseDecoder& decoder,
                             const GarmentCodes& codes,
                             const std::vector<BaryRecord>& deformed_samples,
                             const Matrix& canonical_sample_positions,
                             const std::vector<RigidTransform>& sample_transforms);

struct DeformerOutput {
  std::vector<Vec3> displacements;
  std::vector<Vec3> canonical_normals;
  std::vector<Vec3> posed_points;
  std::vector<Vec3> posed_normals;
};

// Inference-only convenience wrapper around deform_forward.
DeformerOutput deform(const ArticulatedBody& body, const Pose& pose, const PoseEncoder& encoder,
                      const nn::SaPlan& plan, const PoseDecoder& decoder,
                      const GarmentCodes& codes,
                      const std::vector<BaryRecord>& deformed_samples);

// Rows of an Nx3 matrix as Vec3 list.
std::vector<Vec3> matrix_to_points(const Matrix& m);
Matrix points_to_matrix(const std::vector<Vec3>& pts);

}  // namespace pw
