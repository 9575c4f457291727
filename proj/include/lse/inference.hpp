#ifndef LSE_INFERENCE_HPP
#define LSE_INFERENCE_HPP

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lse/model.hpp"
#include "lse/types.hpp"

namespace lse {

/// Candidate-class prototypes mapped into the visual feature space:
/// column j is U_vis^T (U_sem a_j). Classifying against these in the visual
/// space sidesteps the hubness problem of semantic-space matching.
struct ReconstructedPrototypes {
  std::vector<int> class_ids;
  Eigen::MatrixXd vectors;
  std::string source_modality;
};

/// Non-negative per-modality fusion weights; at least one must be positive.
struct FusionWeights {
  std::vector<std::pair<std::string, double>> weights;

  void validate() const {
    bool any = false;
    for (const auto& [name, w] : weights) {
      if (!(w >= 0.0))
        throw ValidationError("negative fusion weight " + std::to_string(w) +
                              " for modality '" + name + "'");
      if (w > 0.0) any = true;
    }
    if (!any) throw ValidationError("all fusion weights are zero");
  }

  double weight_for(const std::string& name) const {
    for (const auto& [n, w] : weights)
      if (n == name) return w;
    throw ValidationError("no fusion weight for modality '" + name + "'");
  }
};

/// Maps semantic prototypes through the latent space into the visual space:
/// vectors = U_vis^T U_sem A. When the model was trained standardized, A is
/// transformed with the semantic modality's recorded statistics first and the
/// output lives in the standardized visual space.
inline ReconstructedPrototypes reconstruct_prototypes(
    const LseModel& model, const PrototypeMatrix& protos,
    const std::string& visual_modality, const std::string& semantic_modality) {
  const Eigen::MatrixXd& u_vis = model.encoder(visual_modality);
  const Eigen::MatrixXd& u_sem = model.encoder(semantic_modality);
  if (protos.vectors.rows() != u_sem.cols())
    throw ValidationError("prototype dimensionality " +
                          std::to_string(protos.vectors.rows()) +
                          " does not match encoder '" + semantic_modality +
                          "' input dimension " + std::to_string(u_sem.cols()));
  ReconstructedPrototypes out;
  out.class_ids = protos.class_ids;
  out.source_modality = semantic_modality;
  const Eigen::MatrixXd a = model.apply_standardize(semantic_modality, protos.vectors);
  out.vectors = u_vis.transpose() * (u_sem * a);
  return out;
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Cosine of the instance against every prototype column. Zero prototype
/// columns score -inf so they are never selected over a real candidate.
inline Eigen::VectorXd cosine_scores(const Eigen::VectorXd& instance,
                                     const Eigen::MatrixXd& prototypes) {
  const double inorm = instance.norm();
  if (!(inorm > 0.0)) throw ValidationError("zero test instance");
  const Eigen::VectorXd unit = instance / inorm;
  Eigen::VectorXd scores(prototypes.cols());
  for (Eigen::Index j = 0; j < prototypes.cols(); ++j) {
    const double pnorm = prototypes.col(j).norm();
    scores[j] = pnorm > 0.0 ? unit.dot(prototypes.col(j)) / pnorm : kNegInf;
  }
  return scores;
}

/// Argmax over candidates; ties break toward the lowest class id.
inline int argmax_class(const Eigen::VectorXd& scores,
                        const std::vector<int>& class_ids) {
  int best_id = -1;
  double best = kNegInf;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const int id = class_ids[static_cast<std::size_t>(j)];
    if (scores[j] > best || (scores[j] == best && (best_id < 0 || id < best_id))) {
      best = scores[j];
      best_id = id;
    }
  }
  if (best_id < 0 || best == kNegInf)
    throw ValidationError("no valid candidate: all prototype columns are zero");
  return best_id;
}

}  // namespace detail

/// Nearest reconstructed prototype under cosine similarity. Returns the
/// predicted class id and the per-candidate score vector.
inline std::pair<int, Eigen::VectorXd> classify(const Eigen::VectorXd& instance,
                                                const ReconstructedPrototypes& protos) {
  if (instance.size() != protos.vectors.rows())
    throw ValidationError("instance dimension " + std::to_string(instance.size()) +
                          " does not match prototype rows " +
                          std::to_string(protos.vectors.rows()));
  Eigen::VectorXd scores = detail::cosine_scores(instance, protos.vectors);
  return {detail::argmax_class(scores, protos.class_ids), std::move(scores)};
}

/// Weighted multi-modality prediction: per-class score is the weighted sum
/// of cosines across modalities. Zero-weight modalities do not contribute;
/// a one-hot weight vector reproduces single-modality classify exactly.
inline std::pair<int, Eigen::VectorXd> classify_fused(
    const Eigen::VectorXd& instance,
    const std::vector<ReconstructedPrototypes>& protos_list,
    const FusionWeights& weights) {
  if (protos_list.empty()) throw ValidationError("no prototype sets to fuse");
  weights.validate();
  if (weights.weights.size() != protos_list.size())
    throw ValidationError("fusion weights must cover exactly the fused modalities");
  const auto& ids = protos_list.front().class_ids;
  for (const auto& p : protos_list)
    if (p.class_ids != ids)
      throw ValidationError("class-id order mismatch between fused prototype sets");

  Eigen::VectorXd fused = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ids.size()));
  for (const auto& p : protos_list) {
    const double alpha = weights.weight_for(p.source_modality);
    if (alpha == 0.0) continue;
    Eigen::VectorXd s = detail::cosine_scores(instance, p.vectors);
    for (Eigen::Index j = 0; j < fused.size(); ++j)
      fused[j] = (s[j] == detail::kNegInf || fused[j] == detail::kNegInf)
                     ? detail::kNegInf
                     : fused[j] + alpha * s[j];
  }
  return {detail::argmax_class(fused, ids), std::move(fused)};
}

struct BatchPrediction {
  std::vector<int> labels;        // one per instance
  Eigen::MatrixXd scores;         // instances x candidates
  std::vector<int> candidate_ids; // column order of `scores`
};

namespace detail {

inline BatchPrediction predict_rows(const Eigen::MatrixXd& instances,
                                    const std::vector<ReconstructedPrototypes>& sets,
                                    const FusionWeights& weights) {
  BatchPrediction out;
  out.candidate_ids = sets.front().class_ids;
  out.labels.resize(static_cast<std::size_t>(instances.cols()));
  out.scores.resize(instances.cols(), static_cast<Eigen::Index>(out.candidate_ids.size()));
  for (Eigen::Index t = 0; t < instances.cols(); ++t) {
    auto [label, scores] = sets.size() == 1
                               ? classify(instances.col(t), sets.front())
                               : classify_fused(instances.col(t), sets, weights);
    out.labels[static_cast<std::size_t>(t)] = label;
    out.scores.row(t) = scores.transpose();
  }
  return out;
}

}  // namespace detail

/// Batch prediction restricted to the given candidate class ids (the
/// scenario's candidate set). Single-modality form.
inline BatchPrediction predict_batch(const LseModel& model,
                                     const ModalityMatrix& instances,
                                     const PrototypeMatrix& candidates,
                                     const std::vector<int>& candidate_ids,
                                     const std::string& semantic_modality) {
  if (candidate_ids.empty()) throw ValidationError("empty candidate class set");
  PrototypeMatrix restricted;
  restricted.modality_name = candidates.modality_name;
  restricted.class_ids = candidate_ids;
  restricted.vectors = candidates.columns_for(candidate_ids);
  auto protos = reconstruct_prototypes(model, restricted,
                                       model.modality_names.front(),
                                       semantic_modality);
  Eigen::MatrixXd x =
      model.apply_standardize(model.modality_names.front(), instances.values);
  FusionWeights one{{{semantic_modality, 1.0}}};
  return detail::predict_rows(x, {std::move(protos)}, one);
}

/// Fused form: one prototype set per semantic modality, weighted by
/// `weights`.
inline BatchPrediction predict_batch(const LseModel& model,
                                     const ModalityMatrix& instances,
                                     const std::vector<PrototypeMatrix>& candidates,
                                     const std::vector<int>& candidate_ids,
                                     const FusionWeights& weights) {
  if (candidate_ids.empty()) throw ValidationError("empty candidate class set");
  if (candidates.empty()) throw ValidationError("no candidate prototype matrices");
  std::vector<ReconstructedPrototypes> sets;
  sets.reserve(candidates.size());
  for (const auto& c : candidates) {
    PrototypeMatrix restricted;
    restricted.modality_name = c.modality_name;
    restricted.class_ids = candidate_ids;
    restricted.vectors = c.columns_for(candidate_ids);
    sets.push_back(reconstruct_prototypes(model, restricted,
                                          model.modality_names.front(),
                                          c.modality_name));
  }
  Eigen::MatrixXd x =
      model.apply_standardize(model.modality_names.front(), instances.values);
  return detail::predict_rows(x, sets, weights);
}

}  // namespace lse

#endif  // LSE_INFERENCE_HPP
