#ifndef LSE_SYNTHETIC_HPP
#define LSE_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "lse/manifest.hpp"
#include "lse/types.hpp"

namespace lse {

/// Planted-model generator. Every class y gets a latent code c_y; the seen
/// codes form a scaled orthonormal system, so the instance-level code matrix
/// over the seen instances has exactly orthonormal rows. Each modality
/// decodes codes through a random full-rank linear map with orthonormal
/// columns (the Q factor of a Gaussian draw, scaled to unit-variance
/// entries). Under this construction the closed-form reconstruction of an
/// unseen prototype is exactly proportional to its planted visual pattern,
/// so noiseless recovery is forced; with generic Gaussian decoders the ridge
/// inverses leave a residual linear distortion and recovery is only
/// approximate. With noise_sigma = 0 every modality matrix has rank at most
/// latent_dim.
struct SynthSpec {
  int num_classes = 12;
  int per_class = 20;
  int visual_dim = 30;
  int semantic_dim = 10;
  int latent_dim = 8;
  double noise_sigma = 0.0;  // additive Gaussian noise on visual columns
  /// Additive Gaussian noise on the informative semantic prototypes: models
  /// class descriptions that only approximate the visual patterns. Applied
  /// before instance expansion, so semantic columns still equal their class
  /// prototypes exactly.
  double prototype_noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int unseen_classes = 0;  // 0 => num_classes / 3, at least 1

  struct ExtraSemantic {
    int dim = 10;
    /// false => pure noise: iid instance columns and iid prototypes, carrying
    /// no class information at all.
    bool informative = true;
  };
  std::vector<ExtraSemantic> extra_semantics;

  int resolved_unseen() const {
    int u = unseen_classes > 0 ? unseen_classes : std::max(1, num_classes / 3);
    return u;
  }
};

inline Dataset generate_synthetic(const SynthSpec& spec) {
  if (spec.num_classes < 3 || spec.per_class < 1)
    throw ValidationError("synthetic spec needs >= 3 classes and >= 1 instance per class");
  if (spec.latent_dim < 1 ||
      spec.latent_dim > std::min(spec.visual_dim, spec.semantic_dim))
    throw ValidationError("infeasible dims: latent_dim must satisfy 1 <= d <= min(F1, F2)");
  const int unseen = spec.resolved_unseen();
  if (unseen >= spec.num_classes - 1)
    throw ValidationError("infeasible split: need at least 2 seen classes");
  const int seen = spec.num_classes - unseen;
  if (spec.latent_dim > seen)
    throw ValidationError("infeasible dims: latent_dim cannot exceed the seen class "
                          "count (orthonormal per-class codes)");
  for (const auto& ex : spec.extra_semantics)
    if (ex.dim < (ex.informative ? spec.latent_dim : 1))
      throw ValidationError("infeasible dims: extra semantic modality too small");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto randn = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = gauss(rng);
    return m;
  };
  // Q factor of a Gaussian draw: orthonormal columns, r >= c.
  auto random_orthonormal_cols = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(randn(r, c));
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(r, c));
  };

  const int m_classes = spec.num_classes;
  const int d = spec.latent_dim;
  const double code_scale = 1.0 / std::sqrt(static_cast<double>(spec.per_class));
  const Eigen::Index n = static_cast<Eigen::Index>(m_classes) * spec.per_class;

  // Seen-class codes: d x seen with orthonormal rows, scaled so the expanded
  // seen-instance code matrix has exactly orthonormal rows. Unseen codes are
  // random unit vectors at the same scale.
  Eigen::MatrixXd class_codes(d, m_classes);
  class_codes.leftCols(seen) =
      random_orthonormal_cols(seen, d).transpose() * code_scale;
  for (int z = seen; z < m_classes; ++z) {
    Eigen::VectorXd v = randn(d, 1);
    class_codes.col(z) = v * (code_scale / v.norm());
  }

  Dataset ds;
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (int y = 0; y < m_classes; ++y)
    for (int i = 0; i < spec.per_class; ++i) ds.labels.push_back(y);
  for (int y = 0; y < seen; ++y) ds.split.seen.push_back(y);
  for (int y = seen; y < m_classes; ++y) ds.split.unseen.push_back(y);

  std::vector<int> all_ids(m_classes);
  for (int y = 0; y < m_classes; ++y) all_ids[static_cast<std::size_t>(y)] = y;

  // Visual modality: decode each instance's class code, plus optional noise.
  {
    Eigen::MatrixXd decoder = random_orthonormal_cols(spec.visual_dim, d) *
                              std::sqrt(static_cast<double>(spec.visual_dim));
    ModalityMatrix vis;
    vis.name = "visual";
    vis.kind = ModalityKind::kVisual;
    vis.values.resize(spec.visual_dim, n);
    for (Eigen::Index j = 0; j < n; ++j)
      vis.values.col(j) = decoder * class_codes.col(ds.labels[static_cast<std::size_t>(j)]);
    if (spec.noise_sigma > 0.0)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index r = 0; r < vis.values.rows(); ++r)
          vis.values(r, j) += spec.noise_sigma * gauss(rng);
    ds.modalities.push_back(std::move(vis));
  }

  auto add_semantic = [&](const std::string& name, int dim, bool informative) {
    Eigen::MatrixXd protos;
    if (informative) {
      Eigen::MatrixXd decoder = random_orthonormal_cols(dim, d) *
                                std::sqrt(static_cast<double>(dim));
      protos = decoder * class_codes;
      if (spec.prototype_noise_sigma > 0.0)
        protos += spec.prototype_noise_sigma * randn(dim, m_classes);
    } else {
      protos = randn(dim, m_classes);
    }
    ModalityMatrix sem;
    sem.name = name;
    sem.kind = ModalityKind::kSemantic;
    if (informative) {
      sem.values.resize(dim, n);
      for (Eigen::Index j = 0; j < n; ++j)
        sem.values.col(j) = protos.col(ds.labels[static_cast<std::size_t>(j)]);
    } else {
      sem.values = randn(dim, n);
    }
    ds.modalities.push_back(std::move(sem));
    PrototypeMatrix p;
    p.modality_name = name;
    p.class_ids = all_ids;
    p.vectors = std::move(protos);
    ds.prototypes.push_back(std::move(p));
  };

  add_semantic("semantic", spec.semantic_dim, true);
  for (std::size_t k = 0; k < spec.extra_semantics.size(); ++k)
    add_semantic("semantic" + std::to_string(k + 2), spec.extra_semantics[k].dim,
                 spec.extra_semantics[k].informative);

  ds.validate();
  return ds;
}

/// Writes a dataset to `dir` as binary matrices, a label file and a
/// manifest.json, loadable with assemble_dataset.
inline std::filesystem::path write_dataset(const Dataset& ds,
                                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  for (const auto& mod : ds.modalities) {
    const std::string file = "X_" + mod.name + ".lsem";
    io::write_matrix(mod.values, dir / file);
    m.modalities.push_back({mod.name, file, mod.kind});
  }
  write_labels(ds.labels, dir / "labels.txt");
  m.labels_path = "labels.txt";
  m.split = ds.split;
  for (const auto& p : ds.prototypes) {
    const std::string file = "protos_" + p.modality_name + ".lsem";
    io::write_matrix(p.vectors, dir / file);
    m.prototypes.push_back({p.modality_name, file, p.class_ids});
  }
  m.class_names = ds.class_names;
  const std::filesystem::path manifest_path = dir / "manifest.json";
  write_manifest(m, manifest_path);
  return manifest_path;
}

}  // namespace lse

#endif  // LSE_SYNTHETIC_HPP
