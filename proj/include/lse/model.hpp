#ifndef LSE_MODEL_HPP
#define LSE_MODEL_HPP

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <json.hpp>

#include "lse/kernel.hpp"
#include "lse/types.hpp"

namespace lse {

/// Per-feature standardization statistics for one modality (row-wise mean and
/// standard deviation over the training instances).
struct StandardizeStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.colwise() - mean).array().colwise() / stddev.array();
  }
};

/// Trained LSE model: the shared latent code matrix C (d x N, orthonormal
/// rows), one encoder U_i (d x F_i) per modality, and the retained
/// eigenvalues of Omega in descending order.
struct LseModel {
  Hyperparams hyper;
  Eigen::MatrixXd code;
  std::vector<Eigen::MatrixXd> encoders;
  std::vector<std::string> modality_names;
  std::vector<ModalityKind> modality_kinds;
  Eigen::VectorXd eigenvalues;
  std::vector<StandardizeStats> standardize;  // empty unless enabled
  std::vector<std::string> diagnostics;

  Eigen::Index latent_dim() const { return code.rows(); }

  std::size_t modality_index(const std::string& name) const {
    for (std::size_t i = 0; i < modality_names.size(); ++i)
      if (modality_names[i] == name) return i;
    throw ValidationError("unknown modality '" + name + "' in model");
  }

  const Eigen::MatrixXd& encoder(const std::string& name) const {
    return encoders.at(modality_index(name));
  }

  bool standardized() const { return !standardize.empty(); }

  /// Applies the recorded training transform of a modality to new columns.
  Eigen::MatrixXd apply_standardize(const std::string& name,
                                    const Eigen::MatrixXd& x) const {
    if (!standardized()) return x;
    return standardize.at(modality_index(name)).apply(x);
  }
};

namespace detail {

/// Full eigensystem of a symmetric kernel, eigenvalues descending.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // column j pairs with eigenvalues[j]
};

inline EigenSystem eigendecompose(const KernelMatrix& omega) {
  const Eigen::Index n = omega.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega.values);
  if (es.info() == Eigen::Success) {
    // Eigen returns ascending order; flip.
    EigenSystem sys;
    sys.eigenvalues = es.eigenvalues().reverse();
    sys.eigenvectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      sys.eigenvectors.col(j) = es.eigenvectors().col(n - 1 - j);
    return sys;
  }
  // The tridiagonal QL iteration can stall on kernels with large clusters of
  // exactly equal eigenvalues (rank-deficient planted data). For a symmetric
  // PSD kernel the SVD is the same decomposition, so retry along that route
  // with Rayleigh-quotient eigenvalues.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(omega.values, Eigen::ComputeFullU);
  if (svd.info() != Eigen::Success)
    throw NumericError("symmetric eigensolver did not converge on the " +
                       std::to_string(n) + "x" + std::to_string(n) +
                       " kernel (QL iteration limit reached, SVD fallback "
                       "failed as well)");
  EigenSystem sys;
  sys.eigenvectors = svd.matrixU();
  sys.eigenvalues.resize(n);
  for (Eigen::Index j = 0; j < n; ++j)
    sys.eigenvalues[j] =
        sys.eigenvectors.col(j).dot(omega.values * sys.eigenvectors.col(j));
  // Singular values are |eigenvalue|; re-sort by the signed Rayleigh values.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return sys.eigenvalues[a] > sys.eigenvalues[b];
  });
  EigenSystem sorted;
  sorted.eigenvalues.resize(n);
  sorted.eigenvectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    sorted.eigenvalues[j] = sys.eigenvalues[order[static_cast<std::size_t>(j)]];
    sorted.eigenvectors.col(j) =
        sys.eigenvectors.col(order[static_cast<std::size_t>(j)]);
  }
  return sorted;
}

/// Sign convention: the largest-magnitude entry of each eigenvector is
/// positive (first such entry on exact magnitude ties).
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index imax = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  if (v[imax] < 0.0) v = -v;
}

/// Rows of the code matrix are the first d eigenvectors, sign-fixed.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> take_top_codes(
    const EigenSystem& sys, int d) {
  const Eigen::Index n = sys.eigenvectors.rows();
  if (d < 1 || d > n)
    throw ValidationError("latent dimension " + std::to_string(d) +
                          " must lie in [1, " + std::to_string(n) + "]");
  Eigen::MatrixXd code(d, n);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd v = sys.eigenvectors.col(j);
    fix_sign(v);
    code.row(j) = v.transpose();
  }
  return {std::move(code), sys.eigenvalues.head(d)};
}

}  // namespace detail

/// Top-d eigenvectors of Omega as rows of the code matrix C, with the
/// retained eigenvalues in descending order. C C^T = I_d and
/// Tr[C Omega C^T] equals the sum of the returned eigenvalues.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> solve_latent_codes(
    const KernelMatrix& omega, int d) {
  return detail::take_top_codes(detail::eigendecompose(omega), d);
}

/// Closed-form encoder U = C X^T (lambda X X^T + (1-lambda) I)^{-1}; the
/// unique stationary point of the per-modality objective given orthonormal C.
inline Eigen::MatrixXd derive_encoder(const Eigen::MatrixXd& code,
                                      const Eigen::MatrixXd& x, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw ValidationError("lambda must lie in [0,1), got " + std::to_string(lambda));
  if (code.cols() != x.cols())
    throw ValidationError("code has " + std::to_string(code.cols()) +
                          " columns but modality has " + std::to_string(x.cols()) +
                          " instances");
  auto llt = detail::factor_ridge_gram(x, lambda);
  // Solve A Z = X C^T for Z (F x d), then U = Z^T.
  Eigen::MatrixXd z = llt.solve(x * code.transpose());
  return z.transpose();
}

struct TrainOptions {
  bool standardize = false;
};

/// Trains an LSE model on a dataset whose instances are all from seen
/// classes (the caller filters; see Dataset::seen_instance_indices).
///
/// Steps: per-modality kernels Delta_i, their sum Omega, the top-d
/// eigenvectors of Omega as the shared code matrix, and each encoder in
/// closed form. Deterministic; eigenvector signs follow the fixed
/// convention.
inline LseModel train(const Dataset& ds, const Hyperparams& hyper,
                      const TrainOptions& opts = {}) {
  ds.validate();
  const Eigen::Index n = ds.num_instances();
  hyper.validate(n);
  for (int label : ds.labels)
    if (!ds.split.is_seen(label))
      throw ValidationError("training dataset contains unseen-class instance "
                            "(label " + std::to_string(label) + "); filter first");
  std::set<int> distinct(ds.labels.begin(), ds.labels.end());
  if (distinct.size() < 2)
    throw ValidationError("training requires at least 2 distinct seen classes, got " +
                          std::to_string(distinct.size()));

  LseModel model;
  model.hyper = hyper;

  std::vector<Eigen::MatrixXd> views;
  views.reserve(ds.modalities.size());
  for (const auto& m : ds.modalities) {
    model.modality_names.push_back(m.name);
    model.modality_kinds.push_back(m.kind);
    if (opts.standardize) {
      StandardizeStats st;
      st.mean = m.values.rowwise().mean();
      Eigen::MatrixXd centered = m.values.colwise() - st.mean;
      st.stddev = (centered.array().square().rowwise().sum() /
                   static_cast<double>(std::max<Eigen::Index>(n - 1, 1)))
                      .sqrt();
      // Constant features pass through unscaled.
      for (Eigen::Index r = 0; r < st.stddev.size(); ++r)
        if (st.stddev[r] <= 0.0) st.stddev[r] = 1.0;
      views.push_back(centered.array().colwise() / st.stddev.array());
      model.standardize.push_back(std::move(st));
    } else {
      views.push_back(m.values);
    }
  }

  std::vector<KernelMatrix> deltas;
  deltas.reserve(views.size());
  for (const auto& x : views) deltas.push_back(compute_delta(x, hyper.lambda));
  const KernelMatrix omega = aggregate_kernels(deltas);

  auto [code, eigenvalues] = solve_latent_codes(omega, hyper.latent_dim);
  model.code = std::move(code);
  model.eigenvalues = std::move(eigenvalues);

  const double top = std::max(model.eigenvalues[0], 0.0);
  if (model.eigenvalues[model.eigenvalues.size() - 1] <= 1e-12 * std::max(top, 1e-300))
    model.diagnostics.push_back(
        "latent_dim " + std::to_string(hyper.latent_dim) +
        " exceeds the numerical rank of the aggregate kernel; trailing "
        "code directions carry (near-)zero eigenvalues");

  for (const auto& x : views)
    model.encoders.push_back(derive_encoder(model.code, x, hyper.lambda));
  return model;
}

/// Compacts a training dataset to one instance per seen class: visual-kind
/// columns become per-class means, semantic-kind columns become the class
/// prototypes, labels become the class ids (ascending). Instances of
/// unseen classes are dropped. This shrinks the eigenproblem from N
/// instances to the number of seen classes.
inline Dataset fast_compact(const Dataset& ds) {
  ds.validate();
  std::vector<int> classes(ds.split.seen);
  std::sort(classes.begin(), classes.end());

  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t j = 0; j < ds.labels.size(); ++j)
    if (ds.split.is_seen(ds.labels[j]))
      members[ds.labels[j]].push_back(static_cast<Eigen::Index>(j));
  for (int c : classes)
    if (members[c].empty())
      throw ValidationError("empty class: seen class " + std::to_string(c) +
                            " has no instances to average");

  Dataset out;
  out.split = ds.split;
  out.prototypes = ds.prototypes;
  out.class_names = ds.class_names;
  out.labels.assign(classes.begin(), classes.end());

  for (const auto& m : ds.modalities) {
    ModalityMatrix cm;
    cm.name = m.name;
    cm.kind = m.kind;
    cm.values.resize(m.rows(), static_cast<Eigen::Index>(classes.size()));
    if (m.kind == ModalityKind::kSemantic) {
      cm.values = ds.prototypes_for(m.name).columns_for(classes);
    } else {
      for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& idx = members[classes[i]];
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(m.rows());
        for (Eigen::Index j : idx) mean += m.values.col(j);
        cm.values.col(static_cast<Eigen::Index>(i)) =
            mean / static_cast<double>(idx.size());
      }
    }
    out.modalities.push_back(std::move(cm));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model container file:
//   "LSEC" | version u32 = 1 | meta_len u64 | metadata JSON (UTF-8) |
//   one binary matrix block per entry of metadata["matrices"], in order.
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'L', 'S', 'E', 'C'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const LseModel& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["hyper"] = {{"lambda", model.hyper.lambda},
                   {"latent_dim", model.hyper.latent_dim}};
  meta["modalities"] = nlohmann::json::array();
  for (std::size_t i = 0; i < model.modality_names.size(); ++i) {
    nlohmann::json jm{{"name", model.modality_names[i]},
                      {"kind", to_string(model.modality_kinds[i])},
                      {"dim", model.encoders[i].cols()}};
    if (model.standardized()) {
      const auto& st = model.standardize[i];
      jm["standardize"] = {
          {"mean", std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size())},
          {"stddev",
           std::vector<double>(st.stddev.data(), st.stddev.data() + st.stddev.size())}};
    }
    meta["modalities"].push_back(std::move(jm));
  }
  meta["eigenvalues"] = std::vector<double>(
      model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  meta["diagnostics"] = model.diagnostics;
  std::vector<std::string> blocks{"code"};
  for (const auto& name : model.modality_names) blocks.push_back("encoder:" + name);
  meta["matrices"] = blocks;

  const std::string text = meta.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kModelMagic, 4);
  out.write(reinterpret_cast<const char*>(&kModelVersion), 4);
  const std::uint64_t meta_len = text.size();
  out.write(reinterpret_cast<const char*>(&meta_len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  // Matrix blocks reuse the standalone binary matrix format.
  auto append_matrix = [&](const Eigen::MatrixXd& m) {
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(io::kMatrixMagic, 4);
    out.write(reinterpret_cast<const char*>(&io::kMatrixVersion), 4);
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(8 * rows * cols));
  };
  append_matrix(model.code);
  for (const auto& u : model.encoders) append_matrix(u);
  if (!out) throw IoError("write failed: " + path.string());
}

inline LseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0)
    throw ValidationError("not a model file (bad magic): " + path.string());
  std::uint32_t version = 0;
  std::uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&meta_len), 8);
  if (!in || version != kModelVersion)
    throw ValidationError("unsupported model file version: " + path.string());
  std::string text(meta_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw ValidationError("truncated model metadata: " + path.string());

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed model metadata in " + path.string() + ": " +
                          e.what());
  }

  auto read_block = [&]() {
    char m[4] = {};
    std::uint32_t ver = 0;
    std::uint64_t rows = 0, cols = 0;
    in.read(m, 4);
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in || std::memcmp(m, io::kMatrixMagic, 4) != 0 || ver != io::kMatrixVersion)
      throw ValidationError("malformed matrix block in model file: " + path.string());
    Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(mat.data()),
            static_cast<std::streamsize>(8 * rows * cols));
    if (in.gcount() != static_cast<std::streamsize>(8 * rows * cols))
      throw ValidationError("truncated matrix block in model file: " + path.string());
    return mat;
  };

  LseModel model;
  try {
    model.hyper.lambda = meta.at("hyper").at("lambda").get<double>();
    model.hyper.latent_dim = meta.at("hyper").at("latent_dim").get<int>();
    for (const auto& jm : meta.at("modalities")) {
      model.modality_names.push_back(jm.at("name").get<std::string>());
      model.modality_kinds.push_back(
          modality_kind_from_string(jm.at("kind").get<std::string>()));
      if (jm.contains("standardize")) {
        StandardizeStats st;
        auto mean = jm.at("standardize").at("mean").get<std::vector<double>>();
        auto sd = jm.at("standardize").at("stddev").get<std::vector<double>>();
        st.mean = Eigen::Map<Eigen::VectorXd>(mean.data(),
                                              static_cast<Eigen::Index>(mean.size()));
        st.stddev = Eigen::Map<Eigen::VectorXd>(sd.data(),
                                                static_cast<Eigen::Index>(sd.size()));
        model.standardize.push_back(std::move(st));
      }
    }
    auto ev = meta.at("eigenvalues").get<std::vector<double>>();
    model.eigenvalues =
        Eigen::Map<Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    model.diagnostics = meta.value("diagnostics", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid model metadata in " + path.string() + ": " +
                          e.what());
  }

  model.code = read_block();
  for (std::size_t i = 0; i < model.modality_names.size(); ++i)
    model.encoders.push_back(read_block());
  if (!model.standardize.empty() &&
      model.standardize.size() != model.modality_names.size())
    throw ValidationError("model standardization stats are incomplete: " +
                          path.string());
  return model;
}

}  // namespace lse

#endif  // LSE_MODEL_HPP
