#ifndef LSE_HARNESS_HPP
#define LSE_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lse/inference.hpp"
#include "lse/manifest.hpp"
#include "lse/metrics.hpp"
#include "lse/model.hpp"
#include "lse/synthetic.hpp"

namespace lse {

enum class TestSource { kSeen, kUnseen };
enum class CandidateSet { kSeen, kUnseen, kTotal };

/// One GZSL scenario: where the test instances come from and which classes
/// are candidates. U-U is traditional ZSL; S-S is ordinary supervised
/// classification on a held-out fifth of the seen instances.
struct ScenarioSpec {
  std::string name;
  TestSource test_source = TestSource::kUnseen;
  CandidateSet candidate_set = CandidateSet::kUnseen;
  double seen_train_fraction = 0.8;

  static ScenarioSpec from_name(const std::string& name) {
    if (name == "U-U") return {"U-U", TestSource::kUnseen, CandidateSet::kUnseen, 0.8};
    if (name == "S-S") return {"S-S", TestSource::kSeen, CandidateSet::kSeen, 0.8};
    if (name == "U-T") return {"U-T", TestSource::kUnseen, CandidateSet::kTotal, 0.8};
    if (name == "S-T") return {"S-T", TestSource::kSeen, CandidateSet::kTotal, 0.8};
    throw ValidationError("unknown scenario '" + name +
                          "' (expected U-U|S-S|U-T|S-T)");
  }
};

struct EvalOptions {
  std::string semantic_modality;        // empty => first semantic modality
  std::optional<FusionWeights> fusion;  // overrides semantic_modality when set
  bool fast_lse = false;
  bool standardize = false;
  std::vector<int> topk{1, 5};
  std::uint64_t seed = 0;
  bool strict = false;
  int threads = 1;
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(
                                   std::max(threads, 1)), n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string default_semantic(const Dataset& ds) {
  auto names = ds.semantic_modality_names();
  if (names.empty())
    throw ValidationError("dataset has no semantic modality to predict from");
  return names.front();
}

/// Semantic modalities a prediction will use, in scoring order.
inline std::vector<std::string> semantic_names_used(const Dataset& ds,
                                                    const EvalOptions& opts) {
  if (opts.fusion) {
    opts.fusion->validate();
    std::vector<std::string> names;
    for (const auto& [name, w] : opts.fusion->weights) names.push_back(name);
    if (names.size() < 1) throw ValidationError("empty fusion weight list");
    return names;
  }
  return {opts.semantic_modality.empty() ? default_semantic(ds)
                                         : opts.semantic_modality};
}

/// Flags class pairs sharing (numerically) identical prototype vectors; such
/// candidates are indistinguishable and drag accuracy toward chance.
inline void warn_duplicate_prototypes(const PrototypeMatrix& p,
                                      std::vector<std::string>& warnings) {
  for (Eigen::Index a = 0; a < p.vectors.cols(); ++a) {
    for (Eigen::Index b = a + 1; b < p.vectors.cols(); ++b) {
      const double scale = std::max(1.0, p.vectors.col(a).norm());
      if ((p.vectors.col(a) - p.vectors.col(b)).norm() <= 1e-12 * scale)
        warnings.push_back(
            "duplicate prototype: classes " +
            std::to_string(p.class_ids[static_cast<std::size_t>(a)]) + " and " +
            std::to_string(p.class_ids[static_cast<std::size_t>(b)]) +
            " share the same vector in modality '" + p.modality_name +
            "'; predictions between them are chance-level");
    }
  }
}

/// Seeded, class-stratified 80/20-style split of the seen instances.
/// Returns (train_indices, test_indices), each ascending.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>
stratified_seen_split(const Dataset& ds, double train_fraction, std::uint64_t seed,
                      std::vector<std::string>& warnings) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("seen train fraction must lie in (0,1)");
  std::vector<int> classes(ds.split.seen);
  std::sort(classes.begin(), classes.end());
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> train, test;
  for (int c : classes) {
    std::vector<Eigen::Index> members;
    for (std::size_t j = 0; j < ds.labels.size(); ++j)
      if (ds.labels[j] == c) members.push_back(static_cast<Eigen::Index>(j));
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    if (members.size() == 1) {
      n_train = 1;
      warnings.push_back("class " + std::to_string(c) +
                         " has a single instance; it is absent from the test split");
    } else {
      n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    }
    train.insert(train.end(), members.begin(),
                 members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

inline std::vector<int> candidate_ids_for(const Dataset& ds, CandidateSet set) {
  std::vector<int> ids;
  switch (set) {
    case CandidateSet::kSeen: ids = ds.split.seen; break;
    case CandidateSet::kUnseen: ids = ds.split.unseen; break;
    case CandidateSet::kTotal: return ds.split.all_sorted();
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline nlohmann::json options_json(const EvalOptions& opts,
                                   const std::vector<std::string>& semantics) {
  nlohmann::json j;
  j["semantic_modalities"] = semantics;
  if (opts.fusion) {
    nlohmann::json w;
    for (const auto& [name, alpha] : opts.fusion->weights) w[name] = alpha;
    j["fusion_weights"] = std::move(w);
  }
  j["fast_lse"] = opts.fast_lse;
  j["standardize"] = opts.standardize;
  j["seed"] = opts.seed;
  return j;
}

/// Shared classification pipeline behind TZSL and the four GZSL scenarios.
inline EvalReport evaluate_scenario(const Dataset& ds, const Hyperparams& hyper,
                                    const ScenarioSpec& scenario,
                                    const EvalOptions& opts,
                                    const std::string& tag) {
  ds.validate();
  EvalReport report;
  report.scenario = tag;
  report.hyper = hyper;
  report.class_names = ds.class_names;

  const bool touches_unseen = scenario.test_source == TestSource::kUnseen ||
                              scenario.candidate_set != CandidateSet::kSeen;
  if (touches_unseen && ds.split.unseen.empty())
    throw ValidationError("scenario " + scenario.name +
                          " requires at least one unseen class");

  std::vector<Eigen::Index> train_idx, test_idx;
  if (scenario.test_source == TestSource::kUnseen) {
    train_idx = ds.seen_instance_indices();
    test_idx = ds.unseen_instance_indices();
    if (test_idx.empty())
      throw ValidationError("no unseen-class test instances in the dataset");
  } else {
    std::tie(train_idx, test_idx) = stratified_seen_split(
        ds, scenario.seen_train_fraction, opts.seed, report.warnings);
    if (test_idx.empty())
      throw ValidationError("seen-instance split produced an empty test set");
  }

  Dataset training = ds.select_instances(train_idx);
  if (opts.fast_lse) training = fast_compact(training);
  const LseModel model = train(training, hyper, {opts.standardize});
  for (const auto& d : model.diagnostics) report.warnings.push_back(d);

  const std::vector<std::string> semantics = semantic_names_used(ds, opts);
  for (const auto& name : semantics)
    warn_duplicate_prototypes(ds.prototypes_for(name), report.warnings);

  report.candidate_ids = candidate_ids_for(ds, scenario.candidate_set);
  report.options = options_json(opts, semantics);
  report.options["scenario_definition"] = {
      {"test_source", scenario.test_source == TestSource::kUnseen ? "unseen" : "seen"},
      {"candidate_set", scenario.candidate_set == CandidateSet::kSeen     ? "seen"
                        : scenario.candidate_set == CandidateSet::kUnseen ? "unseen"
                                                                          : "total"},
      {"seen_train_fraction", scenario.seen_train_fraction}};

  ModalityMatrix test_instances;
  test_instances.name = ds.visual().name;
  test_instances.kind = ModalityKind::kVisual;
  test_instances.values.resize(ds.visual().rows(),
                               static_cast<Eigen::Index>(test_idx.size()));
  LabelVector truth;
  truth.reserve(test_idx.size());
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    test_instances.values.col(static_cast<Eigen::Index>(i)) =
        ds.visual().values.col(test_idx[i]);
    truth.push_back(ds.labels[static_cast<std::size_t>(test_idx[i])]);
  }

  BatchPrediction pred;
  if (opts.fusion) {
    std::vector<PrototypeMatrix> protos;
    for (const auto& name : semantics) protos.push_back(ds.prototypes_for(name));
    pred = predict_batch(model, test_instances, protos, report.candidate_ids,
                         *opts.fusion);
  } else {
    pred = predict_batch(model, test_instances, ds.prototypes_for(semantics.front()),
                         report.candidate_ids, semantics.front());
  }

  report.test_instances = truth.size();
  report.per_class_accuracy = lse::per_class_accuracy(pred.labels, truth);
  report.per_image_accuracy = lse::per_image_accuracy(pred.labels, truth);
  report.confusion = confusion_matrix(pred.labels, truth, report.candidate_ids);
  for (int k : opts.topk)
    if (k >= 1 && k <= static_cast<int>(report.candidate_ids.size()))
      report.topk[k] = top_k_accuracy(pred.scores, report.candidate_ids, truth, k);
  return report;
}

}  // namespace detail

/// Traditional zero-shot learning: train on seen instances, classify unseen
/// test instances against unseen candidates only.
inline EvalReport run_tzsl(const Dataset& ds, const Hyperparams& hyper,
                           const EvalOptions& opts = {}) {
  return detail::evaluate_scenario(ds, hyper, ScenarioSpec::from_name("U-U"), opts,
                                   "TZSL");
}

/// One of the four generalized ZSL scenarios (U-U, S-S, U-T, S-T). For S-S
/// and S-T the seeded, class-stratified 80/20 instance split selects the
/// training subset.
inline EvalReport run_gzsl(const Dataset& ds, const Hyperparams& hyper,
                           const ScenarioSpec& scenario, const EvalOptions& opts = {}) {
  return detail::evaluate_scenario(ds, hyper, scenario, opts, scenario.name);
}

/// Zero-shot retrieval: each unseen class prototype queries the unseen test
/// pool, ranked by cosine against the reconstructed visual prototype; scored
/// by mAP. The report also carries the U-U classification metrics of the
/// same pool.
inline EvalReport run_zsr(const Dataset& ds, const Hyperparams& hyper,
                          const EvalOptions& opts = {}) {
  ds.validate();
  if (ds.split.unseen.empty())
    throw ValidationError("retrieval requires at least one unseen class");
  EvalReport report =
      detail::evaluate_scenario(ds, hyper, ScenarioSpec::from_name("U-U"), opts, "ZSR");

  // Rebuild the model and the unseen pool for the ranking stage.
  Dataset training = ds.select_instances(ds.seen_instance_indices());
  if (opts.fast_lse) training = fast_compact(training);
  const LseModel model = train(training, hyper, {opts.standardize});
  const std::vector<std::string> semantics = detail::semantic_names_used(ds, opts);

  const auto pool_idx = ds.unseen_instance_indices();
  Eigen::MatrixXd pool(ds.visual().rows(), static_cast<Eigen::Index>(pool_idx.size()));
  LabelVector pool_labels;
  for (std::size_t i = 0; i < pool_idx.size(); ++i) {
    pool.col(static_cast<Eigen::Index>(i)) = ds.visual().values.col(pool_idx[i]);
    pool_labels.push_back(ds.labels[static_cast<std::size_t>(pool_idx[i])]);
  }
  pool = model.apply_standardize(model.modality_names.front(), pool);

  std::vector<int> queries(ds.split.unseen);
  std::sort(queries.begin(), queries.end());

  // Reconstructed visual prototypes per semantic modality, query order.
  std::vector<ReconstructedPrototypes> sets;
  for (const auto& name : semantics) {
    PrototypeMatrix restricted;
    restricted.modality_name = name;
    restricted.class_ids = queries;
    restricted.vectors = ds.prototypes_for(name).columns_for(queries);
    sets.push_back(reconstruct_prototypes(model, restricted,
                                          model.modality_names.front(), name));
  }
  FusionWeights weights =
      opts.fusion ? *opts.fusion : FusionWeights{{{semantics.front(), 1.0}}};

  std::vector<std::vector<int>> rankings;
  std::vector<std::set<int>> relevance;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::set<int> rel;
    for (std::size_t i = 0; i < pool_labels.size(); ++i)
      if (pool_labels[i] == queries[q]) rel.insert(static_cast<int>(i));
    if (rel.empty()) {
      const std::string msg = "unseen class " + std::to_string(queries[q]) +
                              " has no test instances; excluded from retrieval";
      if (opts.strict) throw ValidationError(msg);
      report.warnings.push_back(msg);
      continue;
    }
    // Weighted cosine of every pool instance against this query's
    // reconstruction, mirroring the fused classification score.
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(pool.cols());
    for (std::size_t m = 0; m < sets.size(); ++m) {
      const double alpha = weights.weight_for(sets[m].source_modality);
      if (alpha == 0.0) continue;
      const Eigen::VectorXd proto = sets[m].vectors.col(static_cast<Eigen::Index>(q));
      const double pnorm = proto.norm();
      for (Eigen::Index t = 0; t < pool.cols(); ++t) {
        const double tnorm = pool.col(t).norm();
        const double c = (pnorm > 0.0 && tnorm > 0.0)
                             ? proto.dot(pool.col(t)) / (pnorm * tnorm)
                             : detail::kNegInf;
        scores[t] = (c == detail::kNegInf || scores[t] == detail::kNegInf)
                        ? detail::kNegInf
                        : scores[t] + alpha * c;
      }
    }
    std::vector<int> order(static_cast<std::size_t>(pool.cols()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    rankings.push_back(std::move(order));
    relevance.push_back(std::move(rel));
  }
  if (rankings.empty())
    throw ValidationError("no retrieval query has test instances");
  report.map_score = mean_average_precision(rankings, relevance);
  return report;
}

/// Class-wise cross-validation plan for selecting (lambda, d).
struct CvPlan {
  int folds = 5;
  std::vector<double> lambda_grid;
  std::vector<int> dim_grid;
  std::uint64_t seed = 0;
};

struct CvCell {
  double lambda = 0.0;
  int dim = 0;
  bool feasible = true;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracy;
};

struct CvResult {
  Hyperparams best;
  double best_score = 0.0;
  std::vector<CvCell> table;
  std::vector<std::string> warnings;
};

/// Partitions the seen classes into `folds` groups; each group in turn plays
/// the unseen role while the remaining classes train the model. Selects the
/// (lambda, d) pair maximizing the mean held-out per-class accuracy.
/// Deterministic given the plan seed; fold assignment depends on the class
/// ids, not their order in the split.
inline CvResult cross_validate(const Dataset& ds, const CvPlan& plan,
                               const EvalOptions& opts = {}) {
  ds.validate();
  if (plan.folds < 2) throw ValidationError("cross-validation needs >= 2 folds");
  if (plan.lambda_grid.empty() || plan.dim_grid.empty())
    throw ValidationError("empty hyperparameter grid");
  std::vector<int> classes(ds.split.seen);
  std::sort(classes.begin(), classes.end());
  if (static_cast<int>(classes.size()) < plan.folds)
    throw ValidationError("fewer seen classes (" + std::to_string(classes.size()) +
                          ") than folds (" + std::to_string(plan.folds) + ")");

  std::mt19937_64 rng(plan.seed);
  std::shuffle(classes.begin(), classes.end(), rng);
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(plan.folds));
  for (std::size_t i = 0; i < classes.size(); ++i)
    folds[i % folds.size()].push_back(classes[i]);

  // Pre-split per fold: the fold's classes validate, the rest train.
  struct FoldData {
    Dataset training;
    Dataset full;  // train + validation instances, fold split applied
  };
  std::vector<FoldData> fold_data;
  for (auto& fold : folds) {
    std::sort(fold.begin(), fold.end());
    std::vector<int> train_classes;
    for (int c : classes)
      if (std::find(fold.begin(), fold.end(), c) == fold.end())
        train_classes.push_back(c);
    std::sort(train_classes.begin(), train_classes.end());

    std::set<int> fold_set(fold.begin(), fold.end());
    std::set<int> train_set(train_classes.begin(), train_classes.end());
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < ds.labels.size(); ++j)
      if (fold_set.count(ds.labels[j]) || train_set.count(ds.labels[j]))
        keep.push_back(static_cast<Eigen::Index>(j));
    Dataset fold_ds = ds.select_instances(keep);
    fold_ds.split.seen = train_classes;
    fold_ds.split.unseen = fold;

    FoldData fd;
    fd.training = fold_ds.select_instances(fold_ds.seen_instance_indices());
    fd.full = std::move(fold_ds);
    fold_data.push_back(std::move(fd));
  }

  CvResult result;
  result.table.reserve(plan.lambda_grid.size() * plan.dim_grid.size());
  for (double lambda : plan.lambda_grid)
    for (int dim : plan.dim_grid)
      result.table.push_back({lambda, dim, true, 0.0, {}});

  std::mutex warn_mutex;
  detail::parallel_for(result.table.size(), opts.threads, [&](std::size_t cell_idx) {
    CvCell& cell = result.table[cell_idx];
    Hyperparams h{cell.lambda, cell.dim};
    double sum = 0.0;
    for (const auto& fd : fold_data) {
      Dataset training = fd.training;
      if (opts.fast_lse) training = fast_compact(training);
      if (cell.dim > training.num_instances()) {
        cell.feasible = false;
        std::lock_guard<std::mutex> lock(warn_mutex);
        result.warnings.push_back(
            "skipping infeasible cell lambda=" + std::to_string(cell.lambda) +
            " d=" + std::to_string(cell.dim) + ": d exceeds fold training size " +
            std::to_string(training.num_instances()));
        return;
      }
      EvalOptions cell_opts = opts;
      cell_opts.fusion.reset();  // fusion weights are searched separately
      EvalReport rep = detail::evaluate_scenario(
          fd.full, h, ScenarioSpec::from_name("U-U"), cell_opts, "CV");
      cell.fold_accuracy.push_back(rep.per_class_accuracy);
      sum += rep.per_class_accuracy;
    }
    cell.mean_accuracy = sum / static_cast<double>(fold_data.size());
  });

  std::sort(result.warnings.begin(), result.warnings.end());
  const CvCell* best = nullptr;
  for (const auto& cell : result.table) {
    if (!cell.feasible) continue;
    if (best == nullptr || cell.mean_accuracy > best->mean_accuracy) best = &cell;
  }
  if (best == nullptr)
    throw ValidationError("every grid cell was infeasible for this dataset");
  result.best = Hyperparams{best->lambda, best->dim};
  result.best_score = best->mean_accuracy;
  return result;
}

struct FusionSearchOptions {
  double grid_step = 0.1;
  /// Score candidate weights on the unseen test instances, as the original
  /// evaluation protocol does. This leaks test data into model selection and
  /// is off by default; the default carves a class-wise validation split out
  /// of the seen classes instead.
  bool paper_protocol = false;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  bool fast_lse = false;
  bool standardize = false;
  bool strict = false;
  int threads = 1;
};

struct FusionSearchResult {
  FusionWeights best;
  double best_score = 0.0;
  std::vector<std::pair<std::vector<double>, double>> table;
  bool paper_protocol = false;
};

namespace detail {

/// All weight vectors on the step-h simplex, lexicographically ascending.
inline std::vector<std::vector<double>> simplex_grid(std::size_t k, double step) {
  const double inv = 1.0 / step;
  const long long total = std::llround(inv);
  if (total < 1 || std::abs(static_cast<double>(total) * step - 1.0) > 1e-9)
    throw ValidationError("grid step must evenly divide 1, got " +
                          std::to_string(step));
  std::vector<std::vector<double>> grid;
  std::vector<long long> parts(k, 0);
  auto recurse = [&](auto&& self, std::size_t pos, long long remaining) -> void {
    if (pos + 1 == k) {
      parts[pos] = remaining;
      std::vector<double> w(k);
      for (std::size_t i = 0; i < k; ++i)
        w[i] = static_cast<double>(parts[i]) / static_cast<double>(total);
      grid.push_back(std::move(w));
      return;
    }
    for (long long take = 0; take <= remaining; ++take) {
      parts[pos] = take;
      self(self, pos + 1, remaining - take);
    }
  };
  recurse(recurse, 0, total);
  return grid;
}

}  // namespace detail

/// Grid search for per-modality fusion weights on the step-h simplex.
/// Ties return the lexicographically first weight vector.
inline FusionSearchResult search_fusion_weights(const Dataset& ds,
                                                const Hyperparams& hyper,
                                                const std::vector<std::string>& modalities,
                                                const FusionSearchOptions& opts = {}) {
  ds.validate();
  if (modalities.size() < 2)
    throw ValidationError("fusion search needs at least 2 semantic modalities");
  for (const auto& name : modalities) {
    if (ds.modality(name).kind != ModalityKind::kSemantic)
      throw ValidationError("fusion modality '" + name + "' is not semantic");
    ds.prototypes_for(name);  // throws when absent
  }

  // Validation protocol: either the unseen test data (paper protocol,
  // leaky) or a class-wise carve-out from the seen classes.
  Dataset eval_ds = ds;
  if (!opts.paper_protocol) {
    if (ds.split.seen.size() < 3)
      throw ValidationError("class-wise fusion validation needs >= 3 seen classes; "
                            "use the paper-protocol flag for tiny datasets");
    std::vector<int> classes(ds.split.seen);
    std::sort(classes.begin(), classes.end());
    std::mt19937_64 rng(opts.seed);
    std::shuffle(classes.begin(), classes.end(), rng);
    std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(
            opts.validation_fraction * static_cast<double>(classes.size()))),
        1, classes.size() - 2);
    std::vector<int> val(classes.begin(),
                         classes.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<int> tr(classes.begin() + static_cast<std::ptrdiff_t>(n_val),
                        classes.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());
    std::set<int> keep_set(classes.begin(), classes.end());
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < ds.labels.size(); ++j)
      if (keep_set.count(ds.labels[j])) keep.push_back(static_cast<Eigen::Index>(j));
    eval_ds = ds.select_instances(keep);
    eval_ds.split.seen = tr;
    eval_ds.split.unseen = val;
  }

  EvalOptions eopts;
  eopts.fast_lse = opts.fast_lse;
  eopts.standardize = opts.standardize;
  eopts.strict = opts.strict;
  eopts.topk = {1};

  const auto grid = detail::simplex_grid(modalities.size(), opts.grid_step);
  FusionSearchResult result;
  result.paper_protocol = opts.paper_protocol;
  result.table.resize(grid.size());
  detail::parallel_for(grid.size(), opts.threads, [&](std::size_t g) {
    FusionWeights w;
    for (std::size_t i = 0; i < modalities.size(); ++i)
      w.weights.emplace_back(modalities[i], grid[g][i]);
    EvalOptions cell = eopts;
    cell.fusion = w;
    EvalReport rep = detail::evaluate_scenario(
        eval_ds, hyper, ScenarioSpec::from_name("U-U"), cell, "fusion-search");
    result.table[g] = {grid[g], rep.per_class_accuracy};
  });

  std::size_t best_idx = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (result.table[g].second > result.table[best_idx].second) best_idx = g;
  for (std::size_t i = 0; i < modalities.size(); ++i)
    result.best.weights.emplace_back(modalities[i], grid[best_idx][i]);
  result.best_score = result.table[best_idx].second;
  return result;
}

// ---------------------------------------------------------------------------
// Experiment configs: one JSON document driving a batch of scenarios.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::vector<double> lambda_grid{0.1};
  std::vector<int> dim_grid;
  std::vector<std::string> scenarios{"U-U"};
  std::uint64_t seed = 0;
  int folds = 5;
  bool fast_lse = false;
  bool standardize = false;
  std::string semantic_modality;
  struct Fusion {
    bool enabled = false;
    double step = 0.1;
    bool paper_protocol = false;
    std::vector<std::string> modalities;
  } fusion;
  std::vector<int> topk{1, 5};
  std::filesystem::path output_dir;
};

inline ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  nlohmann::json j = detail::load_json(path);
  ExperimentConfig cfg;
  try {
    const std::filesystem::path base = path.parent_path();
    cfg.manifest = base / j.at("manifest").get<std::string>();
    if (j.contains("lambda_grid"))
      cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    else if (j.contains("lambda"))
      cfg.lambda_grid = {j.at("lambda").get<double>()};
    if (j.contains("dim_grid"))
      cfg.dim_grid = j.at("dim_grid").get<std::vector<int>>();
    else if (j.contains("dim"))
      cfg.dim_grid = {j.at("dim").get<int>()};
    cfg.scenarios = j.value("scenarios", cfg.scenarios);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.folds = j.value("folds", cfg.folds);
    cfg.fast_lse = j.value("fast_lse", cfg.fast_lse);
    cfg.standardize = j.value("standardize", cfg.standardize);
    cfg.semantic_modality = j.value("semantic_modality", cfg.semantic_modality);
    if (j.contains("fusion")) {
      const auto& jf = j.at("fusion");
      cfg.fusion.enabled = jf.value("enabled", true);
      cfg.fusion.step = jf.value("step", cfg.fusion.step);
      cfg.fusion.paper_protocol = jf.value("paper_protocol", false);
      cfg.fusion.modalities =
          jf.value("modalities", std::vector<std::string>{});
    }
    cfg.topk = j.value("topk", cfg.topk);
    if (j.contains("output_dir"))
      cfg.output_dir = base / j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid experiment config " + path.string() + ": " +
                          e.what());
  }
  if (cfg.dim_grid.empty())
    throw ValidationError("experiment config must set dim or dim_grid");
  return cfg;
}

struct ExperimentResult {
  Hyperparams hyper;
  std::optional<CvResult> cv;
  std::optional<FusionSearchResult> fusion;
  std::vector<EvalReport> reports;
};

/// Runs every scenario of the config: hyperparameters come from class-wise
/// cross-validation when a grid has more than one cell; fusion weights are
/// searched when requested. Report order follows the config's scenario list.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  Dataset ds = assemble_dataset(cfg.manifest);
  ExperimentResult result;

  EvalOptions opts;
  opts.fast_lse = cfg.fast_lse;
  opts.standardize = cfg.standardize;
  opts.semantic_modality = cfg.semantic_modality;
  opts.seed = cfg.seed;
  opts.topk = cfg.topk;
  opts.threads = threads;

  if (cfg.lambda_grid.size() * cfg.dim_grid.size() > 1) {
    CvPlan plan{cfg.folds, cfg.lambda_grid, cfg.dim_grid, cfg.seed};
    result.cv = cross_validate(ds, plan, opts);
    result.hyper = result.cv->best;
  } else {
    result.hyper = Hyperparams{cfg.lambda_grid.front(), cfg.dim_grid.front()};
  }

  if (cfg.fusion.enabled) {
    std::vector<std::string> mods = cfg.fusion.modalities.empty()
                                        ? ds.semantic_modality_names()
                                        : cfg.fusion.modalities;
    FusionSearchOptions fopts;
    fopts.grid_step = cfg.fusion.step;
    fopts.paper_protocol = cfg.fusion.paper_protocol;
    fopts.seed = cfg.seed;
    fopts.fast_lse = cfg.fast_lse;
    fopts.standardize = cfg.standardize;
    fopts.threads = threads;
    result.fusion = search_fusion_weights(ds, result.hyper, mods, fopts);
    opts.fusion = result.fusion->best;
  }

  for (const auto& name : cfg.scenarios) {
    if (name == "TZSL") {
      result.reports.push_back(run_tzsl(ds, result.hyper, opts));
    } else if (name == "ZSR") {
      result.reports.push_back(run_zsr(ds, result.hyper, opts));
    } else {
      result.reports.push_back(
          run_gzsl(ds, result.hyper, ScenarioSpec::from_name(name), opts));
    }
  }
  return result;
}

/// Writes one JSON + confusion CSV per scenario plus a combined summary
/// table (per-class accuracy per scenario, mAP for ZSR) in CSV and text.
inline void write_experiment_outputs(const ExperimentResult& result,
                                     const ExperimentConfig& cfg) {
  const auto dir = cfg.output_dir.empty() ? std::filesystem::path(".")
                                          : cfg.output_dir;
  std::filesystem::create_directories(dir);
  for (const auto& rep : result.reports) {
    detail::dump_json(rep.to_json(), dir / ("report_" + rep.scenario + ".json"));
    std::ofstream csv(dir / ("confusion_" + rep.scenario + ".csv"));
    csv << rep.confusion_csv();
  }
  std::string header = "metric";
  std::string row = "LSE";
  for (const auto& rep : result.reports) {
    header += "," + rep.scenario;
    char buf[32];
    const double value = rep.scenario == "ZSR" && rep.map_score
                             ? *rep.map_score
                             : rep.per_class_accuracy;
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * value);
    row += std::string(",") + buf;
  }
  std::ofstream summary_csv(dir / "summary.csv");
  summary_csv << header << "\n" << row << "\n";
  std::ofstream summary_txt(dir / "summary.txt");
  summary_txt << "Performance (%) per scenario (per-class accuracy; mAP for ZSR)\n"
              << header << "\n"
              << row << "\n";
}

}  // namespace lse

#endif  // LSE_HARNESS_HPP
