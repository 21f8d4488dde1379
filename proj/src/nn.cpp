#include "pointwear/nn.hpp"

#include <algorithm>
#include <cmath>

namespace pw::nn {

ad::Parameter& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                  Matrix init) {
  if (init.rows() != rows || init.cols() != cols) {
    throw ArgumentError("ParamStore::create: init shape mismatch for " + name);
  }
  for (const auto& p : params_) {
    if (p->name == name) throw ArgumentError("duplicate parameter name: " + name);
  }
  params_.push_back(std::make_unique<ad::Parameter>(name, std::move(init)));
  return *params_.back();
}

ad::Parameter* ParamStore::find(const std::string& name) {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::vector<ad::Parameter*> ParamStore::pointers() const {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grads() {
  for (const auto& p : params_) p->zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::save(io::ArchiveWriter& w) const {
  for (const auto& p : params_) {
    // Row-major copy so shapes read naturally in the file.
    std::vector<double> buf(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        buf[static_cast<std::size_t>(r) * p->value.cols() + c] = p->value(r, c);
      }
    }
    w.add_f64("param/" + p->name, buf.data(),
              {static_cast<std::size_t>(p->value.rows()), static_cast<std::size_t>(p->value.cols())});
  }
}

void ParamStore::load(const io::Archive& a) {
  for (const auto& p : params_) {
    const std::string key = "param/" + p->name;
    if (!a.has(key)) throw ValidationError("checkpoint missing parameter: " + p->name);
    const auto& shape = a.shape(key);
    if (shape.size() != 2 || shape[0] != static_cast<std::size_t>(p->value.rows()) ||
        shape[1] != static_cast<std::size_t>(p->value.cols())) {
      throw ValidationError("checkpoint shape mismatch for parameter: " + p->name);
    }
    const auto buf = a.f64(key);
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        p->value(r, c) = buf[static_cast<std::size_t>(r) * p->value.cols() + c];
      }
    }
  }
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> uni(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uni(rng);
  }
  return m;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Linear Linear::make(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                    bool zero_init) {
  Linear l;
  Matrix w = zero_init ? Matrix::Zero(in, out) : xavier_uniform(in, out, rng);
  l.weight = &store.create(name + ".w", in, out, std::move(w));
  l.bias = &store.create(name + ".b", 1, out, Matrix::Zero(1, out));
  return l;
}

ad::Var Linear::apply(ad::Tape& tape, ad::Var x) const {
  return tape.add_rowvec(tape.matmul(x, tape.param(*weight)), tape.param(*bias));
}

Mlp Mlp::make(ParamStore& store, const std::string& name, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw ArgumentError("Mlp::make: need at least in/out dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(
        Linear::make(store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return m;
}

ad::Var Mlp::apply(ad::Tape& tape, ad::Var x, bool activate_last) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].apply(tape, x);
    if (i + 1 < layers.size() || activate_last) x = tape.softplus(x);
  }
  return x;
}

int Mlp::out_dim() const {
  return static_cast<int>(layers.back().weight->value.cols());
}

// ---------------------------------------------------------------------------
// Plans

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

std::vector<uint32_t> stable_fps(const std::vector<Vec3>& points, std::size_t n) {
  const std::size_t total = points.size();
  if (n < 1 || n > total) throw ArgumentError("stable_fps: n out of range");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(total);

  uint32_t start = 0;
  double best = -1.0;
  for (uint32_t i = 0; i < total; ++i) {
    const double d = (points[i] - centroid).squaredNorm();
    if (d > best || (d == best && lex_less(points[i], points[start]))) {
      best = d;
      start = i;
    }
  }

  std::vector<uint32_t> picked{start};
  std::vector<double> min_sq(total);
  for (std::size_t i = 0; i < total; ++i) min_sq[i] = (points[i] - points[start]).squaredNorm();

  while (picked.size() < n) {
    uint32_t next = 0;
    double far = -1.0;
    for (uint32_t i = 0; i < total; ++i) {
      if (min_sq[i] > far || (min_sq[i] == far && lex_less(points[i], points[next]))) {
        far = min_sq[i];
        next = i;
      }
    }
    picked.push_back(next);
    for (std::size_t i = 0; i < total; ++i) {
      min_sq[i] = std::min(min_sq[i], (points[i] - points[next]).squaredNorm());
    }
  }
  return picked;
}

namespace {

// k nearest by (squared distance, lexicographic coordinates).
std::vector<uint32_t> knn_stable(const std::vector<Vec3>& pool, const Vec3& query, int k) {
  std::vector<uint32_t> ids(pool.size());
  for (uint32_t i = 0; i < pool.size(); ++i) ids[i] = i;
  const int kk = std::min<int>(k, static_cast<int>(pool.size()));
  std::partial_sort(ids.begin(), ids.begin() + kk, ids.end(), [&](uint32_t a, uint32_t b) {
    const double da = (pool[a] - query).squaredNorm();
    const double db = (pool[b] - query).squaredNorm();
    if (da != db) return da < db;
    return lex_less(pool[a], pool[b]);
  });
  std::vector<uint32_t> out(ids.begin(), ids.begin() + kk);
  // Pad by repeating the nearest when the pool is smaller than k.
  while (static_cast<int>(out.size()) < k) out.push_back(out.front());
  return out;
}

FpInterp build_fp_interp(const std::vector<Vec3>& coarse, const std::vector<Vec3>& fine) {
  FpInterp fp;
  fp.idx.resize(fine.size());
  fp.w.resize(fine.size());
  parallel_for_each(fine.size(), [&](std::size_t i) {
    const auto nn = knn_stable(coarse, fine[i], 3);
    std::array<double, 3> weights{};
    double total = 0.0;
    bool exact = false;
    for (int j = 0; j < 3; ++j) {
      const double d2 = (coarse[nn[j]] - fine[i]).squaredNorm();
      if (d2 < 1e-20) {
        // Coincident point: copy its feature verbatim.
        weights = {0.0, 0.0, 0.0};
        weights[j] = 1.0;
        exact = true;
        break;
      }
      weights[j] = 1.0 / d2;
      total += weights[j];
    }
    if (!exact) {
      for (int j = 0; j < 3; ++j) weights[j] /= total;
    }
    fp.idx[i] = {nn[0], nn[1], nn[2]};
    fp.w[i] = weights;
  });
  return fp;
}

}  // namespace

SaPlan build_sa_plan(const std::vector<Vec3>& positions, const SetEncoderConfig& config,
                     bool with_fp) {
  config.validate(positions.size());
  SaPlan plan;
  plan.input_count = positions.size();

  std::vector<std::vector<Vec3>> level_positions;
  level_positions.push_back(positions);

  for (const SaLevelConfig& lvl : config.levels) {
    const std::vector<Vec3>& prev = level_positions.back();
    SaLevelPlan lp;
    lp.center_idx = stable_fps(prev, static_cast<std::size_t>(lvl.centers));
    lp.positions.resize(lp.center_idx.size());
    for (std::size_t c = 0; c < lp.center_idx.size(); ++c) {
      lp.positions[c] = prev[lp.center_idx[c]];
    }

    lp.neighbor_idx.resize(lp.positions.size() * lvl.k);
    lp.rel_pos.resize(static_cast<Eigen::Index>(lp.positions.size()) * lvl.k, 3);
    std::vector<std::vector<uint32_t>> neigh(lp.positions.size());
    parallel_for_each(lp.positions.size(),
                      [&](std::size_t c) { neigh[c] = knn_stable(prev, lp.positions[c], lvl.k); });
    for (std::size_t c = 0; c < lp.positions.size(); ++c) {
      for (int j = 0; j < lvl.k; ++j) {
        const uint32_t nb = neigh[c][j];
        lp.neighbor_idx[c * lvl.k + j] = nb;
        lp.rel_pos.row(static_cast<Eigen::Index>(c * lvl.k + j)) =
            (prev[nb] - lp.positions[c]).transpose();
      }
    }
    level_positions.push_back(lp.positions);
    plan.levels.push_back(std::move(lp));
  }

  if (with_fp) {
    plan.fp.resize(plan.levels.size());
    for (std::size_t l = 0; l < plan.levels.size(); ++l) {
      plan.fp[l] = build_fp_interp(level_positions[l + 1], level_positions[l]);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// SetEncoder

SetEncoderConfig SetEncoderConfig::dense_default(int out_dim,
                                                 const std::vector<int>& center_counts, int k) {
  SetEncoderConfig cfg;
  cfg.out_dim = out_dim;
  cfg.in_feature_dim = 3;
  const int half = std::max(8, out_dim / 2);
  const int quarter = std::max(8, out_dim / 4);
  std::vector<std::vector<int>> widths = {
      {quarter, half}, {half, out_dim}, {out_dim, out_dim}, {out_dim, out_dim}};
  for (std::size_t i = 0; i < center_counts.size(); ++i) {
    SaLevelConfig lvl;
    lvl.centers = center_counts[i];
    lvl.k = k;
    lvl.mlp = widths[std::min(i, widths.size() - 1)];
    cfg.levels.push_back(lvl);
  }
  cfg.fp_mlp.assign(center_counts.size(), {out_dim});
  return cfg;
}

SetEncoderConfig SetEncoderConfig::global_default(int out_dim,
                                                  const std::vector<int>& center_counts, int k) {
  SetEncoderConfig cfg = dense_default(out_dim, center_counts, k);
  cfg.fp_mlp.clear();
  return cfg;
}

void SetEncoderConfig::validate(std::size_t point_count) const {
  if (levels.empty()) throw ArgumentError("set encoder: no levels");
  if (out_dim <= 0) throw ArgumentError("set encoder: out_dim must be positive");
  std::size_t prev = point_count;
  for (const SaLevelConfig& lvl : levels) {
    // Abstraction counts strictly decrease down the hierarchy.
    if (lvl.centers <= 0 || static_cast<std::size_t>(lvl.centers) >= prev) {
      throw ArgumentError("set encoder: abstraction counts must strictly decrease");
    }
    if (lvl.k <= 0) throw ArgumentError("set encoder: k must be positive");
    if (lvl.mlp.empty()) throw ArgumentError("set encoder: empty level mlp");
    prev = static_cast<std::size_t>(lvl.centers);
  }
}

SetEncoder::SetEncoder(ParamStore& store, const std::string& name, SetEncoderConfig config,
                       bool dense, Rng& rng)
    : config_(std::move(config)), dense_(dense) {
  int feat_dim = config_.in_feature_dim;
  for (std::size_t l = 0; l < config_.levels.size(); ++l) {
    std::vector<int> dims;
    dims.push_back(feat_dim + 3);  // neighbor feature plus relative position
    for (int wdt : config_.levels[l].mlp) dims.push_back(wdt);
    sa_mlps_.push_back(Mlp::make(store, name + ".sa" + std::to_string(l), dims, rng));
    feat_dim = dims.back();
  }

  if (dense_) {
    if (config_.fp_mlp.size() != config_.levels.size()) {
      throw ArgumentError("set encoder: fp_mlp count must match levels");
    }
    // Walk downward: input is interpolated deeper features concatenated with
    // that level's skip features.
    int deeper = feat_dim;
    for (std::size_t l = config_.levels.size(); l-- > 0;) {
      const int skip =
          (l == 0) ? config_.in_feature_dim
                   : sa_mlps_[l - 1].out_dim();
      std::vector<int> dims;
      dims.push_back(deeper + skip);
      for (int wdt : config_.fp_mlp[l]) dims.push_back(wdt);
      if (l == 0 && dims.back() != config_.out_dim) dims.push_back(config_.out_dim);
      fp_mlps_.insert(fp_mlps_.begin(),
                      Mlp::make(store, name + ".fp" + std::to_string(l), dims, rng));
      deeper = dims.back();
    }
  } else {
    global_head_ = Linear::make(store, name + ".head", feat_dim, config_.out_dim, rng);
  }
}

std::vector<ad::Var> SetEncoder::run_sa(ad::Tape& tape, const SaPlan& plan,
                                        const Matrix& features) const {
  if (plan.levels.size() != config_.levels.size()) {
    throw ArgumentError("set encoder: plan does not match config");
  }
  if (features.cols() != config_.in_feature_dim ||
      features.rows() != static_cast<Eigen::Index>(plan.input_count)) {
    throw ArgumentError("set encoder: feature shape mismatch");
  }

  std::vector<ad::Var> level_feats;
  level_feats.push_back(tape.constant(features));
  for (std::size_t l = 0; l < plan.levels.size(); ++l) {
    const SaLevelPlan& lp = plan.levels[l];
    ad::Var gathered = tape.gather_rows(level_feats.back(), lp.neighbor_idx);
    ad::Var grouped = tape.concat_cols({tape.constant(lp.rel_pos), gathered});
    ad::Var transformed = sa_mlps_[l].apply(tape, grouped, /*activate_last=*/true);
    level_feats.push_back(tape.segment_max(transformed, config_.levels[l].k));
  }
  return level_feats;
}

ad::Var SetEncoder::forward_dense(ad::Tape& tape, const SaPlan& plan, const Matrix& features) const {
  if (!dense_) throw ArgumentError("set encoder built in global mode");
  if (plan.fp.size() != plan.levels.size()) {
    throw ArgumentError("set encoder: plan lacks interpolation data");
  }
  std::vector<ad::Var> level_feats = run_sa(tape, plan, features);

  ad::Var current = level_feats.back();
  for (std::size_t l = plan.levels.size(); l-- > 0;) {
    ad::Var interpolated = tape.weighted_rows(current, plan.fp[l].idx, plan.fp[l].w);
    ad::Var merged = tape.concat_cols({interpolated, level_feats[l]});
    const bool last = (l == 0);
    current = fp_mlps_[l].apply(tape, merged, /*activate_last=*/!last);
  }
  return current;
}

ad::Var SetEncoder::forward_global(ad::Tape& tape, const SaPlan& plan, const Matrix& features) const {
  if (dense_) throw ArgumentError("set encoder built in dense mode");
  std::vector<ad::Var> level_feats = run_sa(tape, plan, features);
  ad::Var pooled = tape.colwise_max(level_feats.back());
  return global_head_.apply(tape, pooled);
}

// ---------------------------------------------------------------------------

void adam_step(const std::vector<ad::Parameter*>& params, const AdamConfig& config, int64_t step) {
  if (step < 1) throw ArgumentError("adam_step: step counts from 1");
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (ad::Parameter* p : params) {
    p->adam_m = config.beta1 * p->adam_m + (1.0 - config.beta1) * p->grad;
    p->adam_v = config.beta2 * p->adam_v.array().matrix() +
                (1.0 - config.beta2) * p->grad.cwiseProduct(p->grad);
    const Matrix m_hat = p->adam_m / bc1;
    const Matrix v_hat = p->adam_v / bc2;
    p->value.array() -= config.lr * m_hat.array() / (v_hat.array().sqrt() + config.eps);
  }
}

}  // namespace pw::nn
