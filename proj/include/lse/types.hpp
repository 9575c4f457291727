#ifndef LSE_TYPES_HPP
#define LSE_TYPES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lse/errors.hpp"
#include "lse/matrix_io.hpp"

namespace lse {

enum class ModalityKind { kVisual, kSemantic };

inline std::string to_string(ModalityKind k) {
  return k == ModalityKind::kVisual ? "visual" : "semantic";
}

inline ModalityKind modality_kind_from_string(const std::string& s) {
  if (s == "visual") return ModalityKind::kVisual;
  if (s == "semantic") return ModalityKind::kSemantic;
  throw ValidationError("unknown modality kind '" + s + "' (expected visual|semantic)");
}

/// One modality's feature matrix: rows are feature dimensions, column j is
/// instance j. All modalities of a Dataset share the column ordering.
struct ModalityMatrix {
  std::string name;
  ModalityKind kind = ModalityKind::kVisual;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  void validate() const {
    if (rows() < 1 || cols() < 1)
      throw ValidationError("modality '" + name + "' must be at least 1x1, got " +
                            std::to_string(rows()) + "x" + std::to_string(cols()));
    for (Eigen::Index c = 0; c < cols(); ++c)
      for (Eigen::Index r = 0; r < rows(); ++r)
        if (!std::isfinite(values(r, c)))
          throw ValidationError("non-finite value in modality '" + name +
                                "' at row " + std::to_string(r) + ", col " +
                                std::to_string(c));
  }
};

/// Loads and validates one modality matrix (binary or CSV, sniffed).
inline ModalityMatrix load_matrix(const std::filesystem::path& path,
                                  std::string name = {},
                                  ModalityKind kind = ModalityKind::kVisual) {
  ModalityMatrix m;
  m.name = name.empty() ? path.stem().string() : std::move(name);
  m.kind = kind;
  m.values = io::read_matrix(path);
  m.validate();
  return m;
}

inline void save_matrix(const ModalityMatrix& m, const std::filesystem::path& path) {
  io::write_matrix(m.values, path);
}

using LabelVector = std::vector<int>;

/// Disjoint seen/unseen class-id sets.
struct ClassSplit {
  std::vector<int> seen;
  std::vector<int> unseen;

  bool is_seen(int id) const {
    return std::find(seen.begin(), seen.end(), id) != seen.end();
  }
  bool is_unseen(int id) const {
    return std::find(unseen.begin(), unseen.end(), id) != unseen.end();
  }
  std::vector<int> all_sorted() const {
    std::vector<int> ids(seen);
    ids.insert(ids.end(), unseen.begin(), unseen.end());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void validate() const {
    std::set<int> s(seen.begin(), seen.end()), u(unseen.begin(), unseen.end());
    if (s.size() != seen.size() || u.size() != unseen.size())
      throw ValidationError("class split contains duplicate ids");
    for (int id : seen)
      if (u.count(id))
        throw ValidationError("seen/unseen overlap: class " + std::to_string(id) +
                              " appears in both sets");
    for (int id : seen)
      if (id < 0) throw ValidationError("negative class id in split");
    for (int id : unseen)
      if (id < 0) throw ValidationError("negative class id in split");
    if (seen.empty()) throw ValidationError("seen class set is empty");
  }
};

/// Per-class semantic vectors for one class-semantic modality; one column per
/// listed class id.
struct PrototypeMatrix {
  std::string modality_name;
  std::vector<int> class_ids;
  Eigen::MatrixXd vectors;

  /// Column index of a class id, or -1 when absent.
  Eigen::Index find(int class_id) const {
    auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end()) return -1;
    return static_cast<Eigen::Index>(it - class_ids.begin());
  }

  /// Columns for the requested ids, in the requested order.
  /// Throws when a prototype is missing.
  Eigen::MatrixXd columns_for(const std::vector<int>& ids) const {
    Eigen::MatrixXd out(vectors.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Eigen::Index col = find(ids[i]);
      if (col < 0)
        throw ValidationError("missing prototype: class " + std::to_string(ids[i]) +
                              " has no column in prototype matrix '" +
                              modality_name + "'");
      out.col(static_cast<Eigen::Index>(i)) = vectors.col(col);
    }
    return out;
  }
};

/// LSE hyperparameters. lambda balances decoding vs encoding error and is
/// restricted to [0,1): lambda = 1 would require inverting lambda*X*X^T,
/// singular whenever X is rank-deficient.
struct Hyperparams {
  double lambda = 0.1;
  int latent_dim = 1;

  void validate(Eigen::Index num_instances = -1) const {
    if (!(lambda >= 0.0 && lambda < 1.0) || !std::isfinite(lambda))
      throw ValidationError("lambda must lie in [0,1), got " + std::to_string(lambda));
    if (latent_dim < 1)
      throw ValidationError("latent_dim must be >= 1, got " +
                            std::to_string(latent_dim));
    if (num_instances >= 0 && latent_dim > num_instances)
      throw ValidationError("latent_dim " + std::to_string(latent_dim) +
                            " exceeds instance count " + std::to_string(num_instances));
  }
};

/// Aligned modalities + labels + class split + per-modality prototypes.
/// Modality 0 is the designated visual modality.
struct Dataset {
  std::vector<ModalityMatrix> modalities;
  LabelVector labels;
  ClassSplit split;
  std::vector<PrototypeMatrix> prototypes;
  std::map<int, std::string> class_names;

  Eigen::Index num_instances() const {
    return modalities.empty() ? 0 : modalities.front().cols();
  }

  const ModalityMatrix& modality(const std::string& name) const {
    for (const auto& m : modalities)
      if (m.name == name) return m;
    throw ValidationError("unknown modality '" + name + "'");
  }

  const ModalityMatrix& visual() const {
    if (modalities.empty()) throw ValidationError("dataset has no modalities");
    return modalities.front();
  }

  const PrototypeMatrix& prototypes_for(const std::string& modality_name) const {
    for (const auto& p : prototypes)
      if (p.modality_name == modality_name) return p;
    throw ValidationError("no prototype matrix for modality '" + modality_name + "'");
  }

  std::vector<std::string> semantic_modality_names() const {
    std::vector<std::string> out;
    for (const auto& m : modalities)
      if (m.kind == ModalityKind::kSemantic) out.push_back(m.name);
    return out;
  }

  /// Indices of instances whose label is a seen class, in instance order.
  std::vector<Eigen::Index> seen_instance_indices() const {
    std::set<int> s(split.seen.begin(), split.seen.end());
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (s.count(labels[j])) idx.push_back(static_cast<Eigen::Index>(j));
    return idx;
  }

  std::vector<Eigen::Index> unseen_instance_indices() const {
    std::set<int> u(split.unseen.begin(), split.unseen.end());
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (u.count(labels[j])) idx.push_back(static_cast<Eigen::Index>(j));
    return idx;
  }

  /// New Dataset restricted to the given instance columns (order preserved
  /// as passed). Split, prototypes and names are carried over.
  Dataset select_instances(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    out.split = split;
    out.prototypes = prototypes;
    out.class_names = class_names;
    out.labels.reserve(idx.size());
    for (Eigen::Index j : idx) out.labels.push_back(labels.at(static_cast<std::size_t>(j)));
    out.modalities.reserve(modalities.size());
    for (const auto& m : modalities) {
      ModalityMatrix sub;
      sub.name = m.name;
      sub.kind = m.kind;
      sub.values.resize(m.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i)
        sub.values.col(static_cast<Eigen::Index>(i)) = m.values.col(idx[i]);
      out.modalities.push_back(std::move(sub));
    }
    return out;
  }

  /// Checks every Dataset invariant; throws ValidationError naming the one
  /// violated.
  void validate() const {
    if (modalities.empty()) throw ValidationError("dataset has no modalities");
    if (modalities.front().kind != ModalityKind::kVisual)
      throw ValidationError("modality 0 ('" + modalities.front().name +
                            "') must be the visual modality");
    std::set<std::string> names;
    for (const auto& m : modalities) {
      m.validate();
      if (!names.insert(m.name).second)
        throw ValidationError("duplicate modality name '" + m.name + "'");
    }
    const Eigen::Index n = num_instances();
    for (const auto& m : modalities)
      if (m.cols() != n)
        throw ValidationError("instance misalignment: modality '" + m.name +
                              "' has " + std::to_string(m.cols()) +
                              " columns, expected " + std::to_string(n));

    if (static_cast<Eigen::Index>(labels.size()) != n)
      throw ValidationError("label count " + std::to_string(labels.size()) +
                            " does not match instance count " + std::to_string(n));
    split.validate();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] < 0)
        throw ValidationError("negative label at instance " + std::to_string(j));
      if (!split.is_seen(labels[j]) && !split.is_unseen(labels[j]))
        throw ValidationError("label " + std::to_string(labels[j]) +
                              " at instance " + std::to_string(j) +
                              " is in neither the seen nor the unseen set");
    }

    // Exactly one prototype matrix per semantic modality.
    for (const auto& m : modalities) {
      if (m.kind != ModalityKind::kSemantic) continue;
      int hits = 0;
      for (const auto& p : prototypes)
        if (p.modality_name == m.name) ++hits;
      if (hits != 1)
        throw ValidationError("semantic modality '" + m.name + "' needs exactly one "
                              "prototype matrix, found " + std::to_string(hits));
    }
    for (const auto& p : prototypes) {
      const ModalityMatrix* m = nullptr;
      for (const auto& cand : modalities)
        if (cand.name == p.modality_name) m = &cand;
      if (m == nullptr)
        throw ValidationError("prototype matrix references unknown modality '" +
                              p.modality_name + "'");
      if (m->kind != ModalityKind::kSemantic)
        throw ValidationError("prototype matrix '" + p.modality_name +
                              "' must reference a semantic modality");
      if (p.vectors.rows() != m->rows())
        throw ValidationError("prototype dimensionality " +
                              std::to_string(p.vectors.rows()) +
                              " does not match modality '" + p.modality_name +
                              "' rows " + std::to_string(m->rows()));
      if (p.vectors.cols() != static_cast<Eigen::Index>(p.class_ids.size()))
        throw ValidationError("prototype matrix '" + p.modality_name + "' lists " +
                              std::to_string(p.class_ids.size()) + " classes but has " +
                              std::to_string(p.vectors.cols()) + " columns");
      std::set<int> ids(p.class_ids.begin(), p.class_ids.end());
      if (ids.size() != p.class_ids.size())
        throw ValidationError("duplicate class id in prototype matrix '" +
                              p.modality_name + "'");
      if (!p.vectors.allFinite())
        throw ValidationError("non-finite value in prototype matrix '" +
                              p.modality_name + "'");
      // Prototypes must cover every class of the split.
      for (int id : split.all_sorted())
        if (p.find(id) < 0)
          throw ValidationError("missing prototype: class " + std::to_string(id) +
                                " has no column in prototype matrix '" +
                                p.modality_name + "'");
    }
  }
};

}  // namespace lse

#endif  // LSE_TYPES_HPP
