#ifndef LSE_METRICS_HPP
#define LSE_METRICS_HPP

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

#include "lse/errors.hpp"
#include "lse/types.hpp"

namespace lse {

/// Mean over distinct ground-truth classes of the within-class accuracy.
/// Robust to class imbalance, unlike the per-image rate.
inline double per_class_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (truth.empty()) throw ValidationError("empty label lists");
  if (pred.size() != truth.size())
    throw ValidationError("prediction/truth length mismatch: " +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()));
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [hits, total] = per_class[truth[i]];
    ++total;
    if (pred[i] == truth[i]) ++hits;
  }
  double sum = 0.0;
  for (const auto& [cls, ht] : per_class)
    sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return sum / static_cast<double>(per_class.size());
}

inline double per_image_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (truth.empty()) throw ValidationError("empty label lists");
  if (pred.size() != truth.size())
    throw ValidationError("prediction/truth length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Fraction of instances whose ground-truth class ranks among the k highest
/// scores. Ties rank the lower class id first, consistent with prediction.
inline double top_k_accuracy(const Eigen::MatrixXd& scores,
                             const std::vector<int>& candidate_ids,
                             const LabelVector& truth, int k) {
  if (k < 1 || k > static_cast<int>(candidate_ids.size()))
    throw ValidationError("k = " + std::to_string(k) + " out of range [1, " +
                          std::to_string(candidate_ids.size()) + "]");
  if (scores.rows() != static_cast<Eigen::Index>(truth.size()) ||
      scores.cols() != static_cast<Eigen::Index>(candidate_ids.size()))
    throw ValidationError("score matrix shape does not match labels/candidates");
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index tcol = -1;
    for (std::size_t j = 0; j < candidate_ids.size(); ++j)
      if (candidate_ids[j] == truth[static_cast<std::size_t>(i)])
        tcol = static_cast<Eigen::Index>(j);
    if (tcol < 0)
      throw ValidationError("truth label " +
                            std::to_string(truth[static_cast<std::size_t>(i)]) +
                            " is not a candidate");
    const double ts = scores(i, tcol);
    const int tid = candidate_ids[static_cast<std::size_t>(tcol)];
    int rank = 1;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (j == tcol) continue;
      const double s = scores(i, j);
      const int id = candidate_ids[static_cast<std::size_t>(j)];
      if (s > ts || (s == ts && id < tid)) ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

/// Mean over queries of average precision; AP averages precision@position
/// over the relevant hit positions (interpolation-free).
inline double mean_average_precision(
    const std::vector<std::vector<int>>& rankings,
    const std::vector<std::set<int>>& relevance) {
  if (rankings.empty()) throw ValidationError("no queries");
  if (rankings.size() != relevance.size())
    throw ValidationError("rankings/relevance count mismatch");
  double sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t pos = 0; pos < rankings[q].size(); ++pos) {
      if (relevance[q].count(rankings[q][pos])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
      }
    }
    if (hits == 0)
      throw ValidationError("query " + std::to_string(q) +
                            " has no relevant instance in the pool");
    sum += ap / static_cast<double>(hits);
  }
  return sum / static_cast<double>(rankings.size());
}

/// counts(t, p) = number of instances of truth class t predicted as p,
/// rows/columns ordered as candidate_ids.
inline Eigen::MatrixXi confusion_matrix(const LabelVector& pred,
                                        const LabelVector& truth,
                                        const std::vector<int>& candidate_ids) {
  if (pred.size() != truth.size())
    throw ValidationError("prediction/truth length mismatch");
  std::map<int, Eigen::Index> col;
  for (std::size_t j = 0; j < candidate_ids.size(); ++j)
    col[candidate_ids[j]] = static_cast<Eigen::Index>(j);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(
      static_cast<Eigen::Index>(candidate_ids.size()),
      static_cast<Eigen::Index>(candidate_ids.size()));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto t = col.find(truth[i]);
    auto p = col.find(pred[i]);
    if (t == col.end())
      throw ValidationError("unknown label " + std::to_string(truth[i]) +
                            " not in candidate set");
    if (p == col.end())
      throw ValidationError("unknown label " + std::to_string(pred[i]) +
                            " not in candidate set");
    counts(t->second, p->second) += 1;
  }
  return counts;
}

/// One evaluation's results: accuracies, top@k, optional retrieval mAP, the
/// confusion matrix, and everything needed to reproduce the run.
struct EvalReport {
  std::string scenario;  // TZSL | U-U | S-S | U-T | S-T | ZSR
  double per_class_accuracy = 0.0;
  double per_image_accuracy = 0.0;
  std::map<int, double> topk;
  std::optional<double> map_score;
  Eigen::MatrixXi confusion;
  std::vector<int> candidate_ids;
  std::map<int, std::string> class_names;
  Hyperparams hyper;
  nlohmann::json options;  // semantic modality, fusion, seeds, flags
  std::size_t test_instances = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario;
    j["per_class_accuracy"] = per_class_accuracy;
    j["per_image_accuracy"] = per_image_accuracy;
    nlohmann::json jk;
    for (const auto& [k, v] : topk) jk[std::to_string(k)] = v;
    j["topk"] = std::move(jk);
    j["map"] = map_score ? nlohmann::json(*map_score) : nlohmann::json(nullptr);
    j["candidate_ids"] = candidate_ids;
    std::vector<std::vector<int>> rows;
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
      std::vector<int> row(static_cast<std::size_t>(confusion.cols()));
      for (Eigen::Index c = 0; c < confusion.cols(); ++c)
        row[static_cast<std::size_t>(c)] = confusion(r, c);
      rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    if (!class_names.empty()) {
      nlohmann::json names;
      for (const auto& [id, name] : class_names) names[std::to_string(id)] = name;
      j["class_names"] = std::move(names);
    }
    j["hyper"] = {{"lambda", hyper.lambda}, {"latent_dim", hyper.latent_dim}};
    j["options"] = options;
    j["test_instances"] = test_instances;
    j["warnings"] = warnings;
    return j;
  }

  /// Stable-schema CSV: a fixed header plus one data row.
  std::string to_csv() const {
    const std::string top1 = topk.count(1) ? format_double(topk.at(1)) : "";
    const std::string top5 = topk.count(5) ? format_double(topk.at(5)) : "";
    const std::string map_s = map_score ? format_double(*map_score) : "";
    return "scenario,per_class_accuracy,per_image_accuracy,top1,top5,map,"
           "lambda,latent_dim,test_instances\n" +
           scenario + "," + format_double(per_class_accuracy) + "," +
           format_double(per_image_accuracy) + "," + top1 + "," + top5 + "," +
           map_s + "," + format_double(hyper.lambda) + "," +
           std::to_string(hyper.latent_dim) + "," +
           std::to_string(test_instances) + "\n";
  }

  std::string to_text() const {
    std::string s;
    s += "scenario:            " + scenario + "\n";
    s += "per-class accuracy:  " + format_double(per_class_accuracy) + "\n";
    s += "per-image accuracy:  " + format_double(per_image_accuracy) + "\n";
    for (const auto& [k, v] : topk)
      s += "top@" + std::to_string(k) + ":               " + format_double(v) + "\n";
    if (map_score) s += "mAP:                 " + format_double(*map_score) + "\n";
    s += "lambda:              " + format_double(hyper.lambda) + "\n";
    s += "latent dim:          " + std::to_string(hyper.latent_dim) + "\n";
    s += "test instances:      " + std::to_string(test_instances) + "\n";
    for (const auto& w : warnings) s += "warning: " + w + "\n";
    return s;
  }

  std::string confusion_csv() const {
    std::string s = "truth\\pred";
    for (int id : candidate_ids) s += "," + std::to_string(id);
    s += "\n";
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
      s += std::to_string(candidate_ids[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < confusion.cols(); ++c)
        s += "," + std::to_string(confusion(r, c));
      s += "\n";
    }
    return s;
  }

private:
  static std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
};

}  // namespace lse

#endif  // LSE_METRICS_HPP
