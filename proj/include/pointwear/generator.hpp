#pragma once

#include <string>
#include <vector>

#include "pointwear/body.hpp"
#include "pointwear/nn.hpp"
#include "pointwear/tape.hpp"

namespace pw {

struct GeneratorConfig {
  int patches = 8;        // K surface elements
  int points = 32768;     // N_g, split evenly across patches
  int pose_dim = 256;     // M_p, pooled part code width
  int garment_dim = 64;   // M_g
  int width = 256;        // patch decoder width
  int hidden_layers = 3;

  int grid_side() const;
  void validate() const;  // patches divide points; per-patch count is square
};

struct PartEncoderConfig {
  std::vector<int> abstraction_counts = {512, 128, 32};
  int feature_dim = 256;  // M_p
  int group_k = 16;
};

// Area-weighted samples from each named part's posed sub-mesh, exactly
// n_per_part each. A face belongs to the part of the majority of its corners
// (lowest part id on ties).
std::vector<PointCloudN> sample_part_points(const ArticulatedBody& body,
                                            const std::vector<Vec3>& posed_vertices,
                                            const std::vector<std::string>& part_names,
                                            std::size_t n_per_part, uint64_t seed);

/// Shared-weight per-part set encoder pooled across parts by elementwise max.
class PartEncoder {
 public:
  PartEncoder(nn::ParamStore& store, const std::string& name, const PartEncoderConfig& config,
              Rng& rng);

  nn::SaPlan plan(const PointCloudN& part_cloud) const;

  // Pooled 1 x M_p part pose code. Plans and clouds are index-aligned.
  ad::Var encode_parts(ad::Tape& tape, const std::vector<nn::SaPlan>& plans,
                       const std::vector<PointCloudN>& part_clouds) const;

  const PartEncoderConfig& config() const { return config_; }

 private:
  PartEncoderConfig config_;
  std::unique_ptr<nn::SetEncoder> encoder_;
};

/// Patch-morphing point generator: each patch carries its own decoder that
/// maps a fixed unit-square lattice to 3D positions and normals, conditioned
/// on the style row (pose code concatenated with the global garment code)
/// through per-layer affine feature modulation. No skinning anywhere in this
/// path.
class PatchGenerator {
 public:
  PatchGenerator(nn::ParamStore& store, const std::string& name, const GeneratorConfig& config,
                 Rng& rng);

  struct Out {
    ad::Var points;   // N_g x 3
    ad::Var normals;  // N_g x 3, unit rows
  };
  Out forward(ad::Tape& tape, ad::Var pose_code, ad::Var garment_code) const;

  const GeneratorConfig& config() const { return config_; }
  const Matrix& grid() const { return grid_; }  // per-patch lattice, g*g x 2

 private:
  struct PatchLayer {
    nn::Linear main;
    nn::Linear film_scale;
    nn::Linear film_shift;
  };
  struct Patch {
    std::vector<PatchLayer> layers;
    nn::Linear head;
  };

  GeneratorConfig config_;
  Matrix grid_;
  std::vector<Patch> patches_;
};

struct GeneratedCloud {
  PointCloudN cloud;
  std::vector<uint32_t> patch_of_point;
};

// Inference-only wrapper; consumes only the two codes.
GeneratedCloud generate(const PatchGenerator& generator, const Eigen::RowVectorXd& pose_code,
                        const Eigen::RowVectorXd& garment_code);

}  // namespace pw
