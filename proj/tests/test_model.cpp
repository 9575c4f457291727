#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <Eigen/Dense>

#include "lse/model.hpp"
#include "test_support.hpp"

using lse_test::TempDir;

namespace {

double trace_objective(const Eigen::MatrixXd& code, const Eigen::MatrixXd& omega) {
  return (code * omega * code.transpose()).trace();
}

// Random multi-modality training dataset with all classes seen.
lse::Dataset random_training_dataset(std::mt19937_64& rng, int n, int classes,
                                     std::vector<int> dims) {
  lse::Dataset ds;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    lse::ModalityMatrix m;
    m.name = "m" + std::to_string(i);
    m.kind = i == 0 ? lse::ModalityKind::kVisual : lse::ModalityKind::kSemantic;
    m.values = lse_test::randn(rng, dims[i], n);
    ds.modalities.push_back(std::move(m));
  }
  for (int j = 0; j < n; ++j)
    ds.labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(classes)));
  // Ensure every class appears.
  for (int c = 0; c < classes && c < n; ++c) ds.labels[static_cast<std::size_t>(c)] = c;
  for (int c = 0; c < classes; ++c) ds.split.seen.push_back(c);
  // Semantic modalities need prototype matrices; use per-class means so the
  // dataset validates (values themselves are irrelevant for training).
  for (std::size_t i = 1; i < dims.size(); ++i) {
    lse::PrototypeMatrix p;
    p.modality_name = "m" + std::to_string(i);
    p.class_ids = ds.split.seen;
    p.vectors = lse_test::randn(rng, dims[i], classes);
    ds.prototypes.push_back(std::move(p));
  }
  ds.validate();
  return ds;
}

}  // namespace

TEST_CASE("solve_latent_codes on a diagonal kernel") {
  lse::KernelMatrix omega;
  omega.values = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal();
  auto [code, eigenvalues] = lse::solve_latent_codes(omega, 2);
  REQUIRE(eigenvalues[0] == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(eigenvalues[1] == Catch::Approx(2.0).margin(1e-12));
  // Rows span e1 and e2 up to sign.
  REQUIRE(std::abs(code.row(0).dot(Eigen::Vector3d::UnitX())) ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE(std::abs(code.row(1).dot(Eigen::Vector3d::UnitY())) ==
          Catch::Approx(1.0).margin(1e-12));
  // Sign convention: largest-magnitude entry positive.
  REQUIRE(code.row(0).cwiseAbs().maxCoeff() == code.row(0).maxCoeff());
}

TEST_CASE("degenerate spectrum: identity kernel") {
  lse::KernelMatrix omega;
  omega.values = Eigen::MatrixXd::Identity(5, 5);
  auto [code, eigenvalues] = lse::solve_latent_codes(omega, 3);
  REQUIRE((eigenvalues.array() - 1.0).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE((code * code.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-8);
  REQUIRE(trace_objective(code, omega.values) == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("Ky Fan optimality against random orthonormal subspaces") {
  std::mt19937_64 rng(21);
  lse::KernelMatrix omega;
  omega.values = lse_test::random_psd(rng, 6);
  auto [code, eigenvalues] = lse::solve_latent_codes(omega, 3);
  const double best = trace_objective(code, omega.values);
  REQUIRE(best == Catch::Approx(eigenvalues.sum()).epsilon(1e-8));
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::MatrixXd q = lse_test::random_orthonormal_rows(rng, 3, 6);
    REQUIRE(trace_objective(q, omega.values) <= best + 1e-9);
  }
}

TEST_CASE("latent dimension bounds") {
  lse::KernelMatrix omega;
  omega.values = Eigen::MatrixXd::Identity(4, 4);
  REQUIRE_THROWS_AS(lse::solve_latent_codes(omega, 5), lse::ValidationError);
  REQUIRE_THROWS_AS(lse::solve_latent_codes(omega, 0), lse::ValidationError);
}

TEST_CASE("derive_encoder identity input returns the code matrix") {
  std::mt19937_64 rng(22);
  Eigen::MatrixXd code = lse_test::random_orthonormal_rows(rng, 2, 5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(5, 5);
  for (double lambda : {0.0, 0.3, 0.8}) {
    Eigen::MatrixXd u = lse::derive_encoder(code, x, lambda);
    REQUIRE((u - code).norm() <= 1e-12);
  }
}

TEST_CASE("derive_encoder at lambda = 0 equals C X^T and the descent oracle") {
  std::mt19937_64 rng(23);
  Eigen::MatrixXd code = lse_test::random_orthonormal_rows(rng, 2, 6);
  Eigen::MatrixXd x = 0.5 * lse_test::randn(rng, 3, 6);
  Eigen::MatrixXd u = lse::derive_encoder(code, x, 0.0);
  REQUIRE((u - code * x.transpose()).norm() <= 1e-10);
  Eigen::MatrixXd u_gd = lse_test::gradient_descent_encoder(x, code, 0.0);
  REQUIRE((u - u_gd).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("derive_encoder matches the descent oracle for interior lambda") {
  std::mt19937_64 rng(24);
  Eigen::MatrixXd code = lse_test::random_orthonormal_rows(rng, 2, 6);
  Eigen::MatrixXd x = 0.5 * lse_test::randn(rng, 4, 6);
  Eigen::MatrixXd u = lse::derive_encoder(code, x, 0.35);
  Eigen::MatrixXd u_gd = lse_test::gradient_descent_encoder(x, code, 0.35);
  REQUIRE((u - u_gd).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("finite-difference stationarity of the closed-form encoder") {
  std::mt19937_64 rng(25);
  Eigen::MatrixXd code = lse_test::random_orthonormal_rows(rng, 2, 5);
  Eigen::MatrixXd x = lse_test::randn(rng, 3, 5);
  const double lambda = 0.25;
  Eigen::MatrixXd u = lse::derive_encoder(code, x, lambda);
  const double base = lse_test::objective_theta(x, code, u, lambda);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      for (double eps : {1e-6, -1e-6}) {
        Eigen::MatrixXd up = u;
        up(i, j) += eps;
        REQUIRE(lse_test::objective_theta(x, code, up, lambda) >= base - 1e-10);
      }
    }
  }
}

TEST_CASE("stationarity identity holds on training runs") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 5; ++trial) {
    lse::Dataset ds = random_training_dataset(rng, 12, 3, {6, 4});
    lse::Hyperparams h{0.2 * trial / 5.0 + 0.1, 3};
    lse::LseModel model = lse::train(ds, h);
    for (std::size_t i = 0; i < model.encoders.size(); ++i) {
      const Eigen::MatrixXd& x = ds.modalities[i].values;
      const Eigen::MatrixXd& u = model.encoders[i];
      Eigen::MatrixXd lhs =
          (1.0 - h.lambda) * model.code * model.code.transpose() * u +
          h.lambda * u * x * x.transpose();
      Eigen::MatrixXd rhs = model.code * x.transpose();
      REQUIRE((lhs - rhs).norm() <= 1e-6 * std::max(1.0, rhs.norm()));
    }
  }
}

TEST_CASE("objective equivalence: theta at the optimum plus the trace term is constant") {
  std::mt19937_64 rng(27);
  for (double lambda : {0.0, 0.15, 0.6}) {
    Eigen::MatrixXd code = lse_test::random_orthonormal_rows(rng, 3, 8);
    Eigen::MatrixXd x = lse_test::randn(rng, 5, 8);
    Eigen::MatrixXd u = lse::derive_encoder(code, x, lambda);
    const double theta = lse_test::objective_theta(x, code, u, lambda);
    const double phi =
        (code * lse::compute_delta(x, lambda).values * code.transpose()).trace();
    const double constant =
        (1.0 - lambda) * x.squaredNorm() + lambda * static_cast<double>(code.rows());
    REQUIRE(theta + phi == Catch::Approx(constant).epsilon(1e-8));
  }
}

TEST_CASE("trained models keep their invariants") {
  std::mt19937_64 rng(28);
  lse::Dataset ds = random_training_dataset(rng, 15, 4, {7, 3, 5});
  lse::LseModel model = lse::train(ds, {0.3, 4});
  REQUIRE((model.code * model.code.transpose() -
           Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
  REQUIRE(model.eigenvalues.size() == 4);
  for (Eigen::Index i = 1; i < model.eigenvalues.size(); ++i)
    REQUIRE(model.eigenvalues[i] <= model.eigenvalues[i - 1]);
  REQUIRE(model.eigenvalues.minCoeff() >= -1e-8);

  // Trace identity against the recomputed aggregate kernel.
  std::vector<lse::KernelMatrix> deltas;
  for (const auto& m : ds.modalities)
    deltas.push_back(lse::compute_delta(m.values, 0.3));
  lse::KernelMatrix omega = lse::aggregate_kernels(deltas);
  REQUIRE(trace_objective(model.code, omega.values) ==
          Catch::Approx(model.eigenvalues.sum()).epsilon(1e-8));
}

TEST_CASE("single-modality training reduces to solve_latent_codes") {
  std::mt19937_64 rng(29);
  lse::Dataset ds = random_training_dataset(rng, 10, 2, {6});
  lse::LseModel model = lse::train(ds, {0.4, 3});
  lse::KernelMatrix delta = lse::compute_delta(ds.modalities[0].values, 0.4);
  auto [code, eigenvalues] = lse::solve_latent_codes(delta, 3);
  REQUIRE(lse_test::bit_identical(model.code, code));
  REQUIRE((model.eigenvalues - eigenvalues).norm() == 0.0);
}

TEST_CASE("planted linear model: code row-space is recovered") {
  std::mt19937_64 rng(30);
  const int d = 3, n = 24;
  Eigen::MatrixXd planted = lse_test::random_orthonormal_rows(rng, d, n);
  Eigen::MatrixXd g1 = lse_test::randn(rng, 9, d);
  Eigen::MatrixXd g2 = lse_test::randn(rng, 5, d);

  lse::Dataset ds;
  lse::ModalityMatrix m1{"visual", lse::ModalityKind::kVisual, g1 * planted};
  lse::ModalityMatrix m2{"sem", lse::ModalityKind::kSemantic, g2 * planted};
  ds.modalities = {m1, m2};
  for (int j = 0; j < n; ++j) ds.labels.push_back(j % 2);
  ds.split.seen = {0, 1};
  lse::PrototypeMatrix p;
  p.modality_name = "sem";
  p.class_ids = {0, 1};
  p.vectors = lse_test::randn(rng, 5, 2);
  ds.prototypes.push_back(p);

  lse::LseModel model = lse::train(ds, {0.1, d});
  REQUIRE(lse_test::max_principal_angle(model.code, planted) < 1e-3);
}

TEST_CASE("permuting instances permutes the code and preserves predictions") {
  std::mt19937_64 rng(31);
  lse::Dataset ds = random_training_dataset(rng, 9, 3, {5, 4});
  lse::Hyperparams h{0.2, 3};
  lse::LseModel base = lse::train(ds, h);

  std::vector<Eigen::Index> perm{4, 2, 7, 0, 8, 1, 6, 3, 5};
  lse::Dataset permuted = ds.select_instances(perm);
  lse::LseModel shuffled = lse::train(permuted, h);

  Eigen::MatrixXd expected(base.code.rows(), base.code.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    expected.col(static_cast<Eigen::Index>(i)) = base.code.col(perm[i]);
  REQUIRE((shuffled.code - expected).cwiseAbs().maxCoeff() <= 1e-9);
  for (std::size_t i = 0; i < base.encoders.size(); ++i)
    REQUIRE((shuffled.encoders[i] - base.encoders[i]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("training rejects unseen instances and degenerate class counts") {
  lse::Dataset ds = lse_test::tiny_dataset();
  REQUIRE_THROWS_WITH(lse::train(ds, {0.1, 2}),
                      Catch::Matchers::ContainsSubstring("unseen-class instance"));
  lse::Dataset seen_only = ds.select_instances({0, 1});  // single class
  REQUIRE_THROWS_WITH(lse::train(seen_only, {0.1, 2}),
                      Catch::Matchers::ContainsSubstring("2 distinct seen classes"));
}

TEST_CASE("rank-deficient kernels trigger the latent-dim diagnostic") {
  std::mt19937_64 rng(32);
  lse::Dataset ds = random_training_dataset(rng, 10, 2, {2});  // rank <= 2
  lse::LseModel model = lse::train(ds, {0.1, 6});
  REQUIRE_FALSE(model.diagnostics.empty());
}

TEST_CASE("fast_compact") {
  SECTION("singleton classes: identity up to class ordering") {
    std::mt19937_64 rng(33);
    lse::Dataset ds = random_training_dataset(rng, 4, 4, {5, 3});
    ds.labels = {0, 1, 2, 3};
    lse::Dataset compact = lse::fast_compact(ds);
    REQUIRE(compact.num_instances() == 4);
    REQUIRE(compact.labels == lse::LabelVector{0, 1, 2, 3});
    REQUIRE(lse_test::bit_identical(compact.modalities[0].values,
                                    ds.modalities[0].values));
    // Semantic columns become the prototypes.
    REQUIRE(lse_test::bit_identical(compact.modalities[1].values,
                                    ds.prototypes[0].vectors));
  }
  SECTION("visual columns are per-class means") {
    lse::Dataset ds = lse_test::tiny_dataset(0);
    ds.modalities[0].values.col(0) << 1, 1, 0;
    ds.modalities[0].values.col(1) << 3, 3, 0;
    lse::Dataset compact = lse::fast_compact(ds);
    REQUIRE(compact.modalities[0].values.col(0)(0) == 2.0);
    REQUIRE(compact.modalities[0].values.col(0)(1) == 2.0);
  }
  SECTION("training on compacted singletons matches training on the original") {
    std::mt19937_64 rng(34);
    lse::Dataset ds = random_training_dataset(rng, 5, 5, {6, 4});
    ds.labels = {0, 1, 2, 3, 4};
    // Semantic columns must equal the class prototypes for exact agreement.
    for (int j = 0; j < 5; ++j)
      ds.modalities[1].values.col(j) = ds.prototypes[0].vectors.col(j);
    lse::Hyperparams h{0.2, 3};
    lse::LseModel a = lse::train(ds, h);
    lse::LseModel b = lse::train(lse::fast_compact(ds), h);
    REQUIRE((a.code - b.code).cwiseAbs().maxCoeff() <= 1e-12);
    for (std::size_t i = 0; i < a.encoders.size(); ++i)
      REQUIRE((a.encoders[i] - b.encoders[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("empty seen class is rejected") {
    lse::Dataset ds = lse_test::tiny_dataset();
    ds.labels = {0, 0, 0, 0, 2, 2};  // class 1 has no instances
    REQUIRE_THROWS_WITH(lse::fast_compact(ds),
                        Catch::Matchers::ContainsSubstring("empty class"));
  }
}

TEST_CASE("model save/load round-trip and byte determinism") {
  TempDir dir("model");
  std::mt19937_64 rng(35);
  lse::Dataset ds = random_training_dataset(rng, 12, 3, {6, 4});
  lse::LseModel model = lse::train(ds, {0.3, 3}, {true});

  const auto p1 = dir.path / "a.lse";
  const auto p2 = dir.path / "b.lse";
  lse::save_model(model, p1);
  lse::save_model(model, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  REQUIRE(b1 == b2);

  lse::LseModel back = lse::load_model(p1);
  REQUIRE(back.hyper.lambda == model.hyper.lambda);
  REQUIRE(back.hyper.latent_dim == model.hyper.latent_dim);
  REQUIRE(back.modality_names == model.modality_names);
  REQUIRE(lse_test::bit_identical(back.code, model.code));
  for (std::size_t i = 0; i < model.encoders.size(); ++i)
    REQUIRE(lse_test::bit_identical(back.encoders[i], model.encoders[i]));
  REQUIRE(back.standardized());
  for (std::size_t i = 0; i < model.standardize.size(); ++i) {
    REQUIRE(back.standardize[i].mean == model.standardize[i].mean);
    REQUIRE(back.standardize[i].stddev == model.standardize[i].stddev);
  }
  REQUIRE((back.eigenvalues - model.eigenvalues).norm() == 0.0);
}

TEST_CASE("standardized training records the transform it used") {
  std::mt19937_64 rng(36);
  lse::Dataset ds = random_training_dataset(rng, 14, 3, {5, 4});
  ds.modalities[0].values.row(2).setConstant(4.2);  // constant feature
  lse::LseModel model = lse::train(ds, {0.2, 3}, {true});
  REQUIRE(model.standardize.size() == 2);
  REQUIRE(model.standardize[0].stddev[2] == 1.0);  // constant row passes through

  // Stationarity holds on the standardized view.
  Eigen::MatrixXd x = model.standardize[0].apply(ds.modalities[0].values);
  const Eigen::MatrixXd& u = model.encoders[0];
  Eigen::MatrixXd lhs = (1.0 - 0.2) * model.code * model.code.transpose() * u +
                        0.2 * u * x * x.transpose();
  Eigen::MatrixXd rhs = model.code * x.transpose();
  REQUIRE((lhs - rhs).norm() <= 1e-6 * std::max(1.0, rhs.norm()));
}
