// Command-line front end for the LSE library: training, prediction, the
// TZSL/GZSL/ZSR evaluation pipelines, hyperparameter and fusion-weight
// search, synthetic dataset generation, and model inspection.
//
// Exit codes: 0 success, 1 validation error, 2 runtime/numerical error.
// Diagnostics go to stderr, results to stdout or to files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lse/lse.hpp"

namespace {

struct GlobalFlags {
  std::uint64_t seed = 0;
  int threads = 1;
  bool strict = false;
  std::string format = "text";
};

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

lse::FusionWeights parse_fusion(const std::string& spec) {
  lse::FusionWeights w;
  std::size_t start = 0;
  while (start < spec.size()) {
    std::size_t comma = spec.find(',', start);
    std::string item = spec.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw lse::ValidationError("bad --fuse entry '" + item +
                                 "' (expected name=weight)");
    w.weights.emplace_back(item.substr(0, eq), std::stod(item.substr(eq + 1)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  w.validate();
  return w;
}

void emit_report(const lse::EvalReport& report, const GlobalFlags& g,
                 const std::string& out_dir) {
  if (g.format == "csv")
    std::cout << report.to_csv();
  else
    std::cout << report.to_text();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    lse::detail::dump_json(report.to_json(),
                           std::filesystem::path(out_dir) /
                               ("report_" + report.scenario + ".json"));
    std::ofstream csv(std::filesystem::path(out_dir) /
                      ("confusion_" + report.scenario + ".csv"));
    csv << report.confusion_csv();
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
}

struct EvalCliOptions {
  std::string manifest;
  double lambda = 0.1;
  int dim = 1;
  std::string semantic;
  std::string fuse;
  bool fast = false;
  bool standardize = false;
  std::vector<int> topk{1, 5};
  std::string out_dir;

  lse::EvalOptions to_eval_options(const GlobalFlags& g) const {
    lse::EvalOptions opts;
    opts.semantic_modality = semantic;
    if (!fuse.empty()) opts.fusion = parse_fusion(fuse);
    opts.fast_lse = fast;
    opts.standardize = standardize;
    opts.topk = topk;
    opts.seed = g.seed;
    opts.strict = g.strict;
    opts.threads = g.threads;
    return opts;
  }
};

void add_eval_flags(CLI::App* cmd, EvalCliOptions& o, bool with_hyper = true) {
  cmd->add_option("--manifest", o.manifest, "Dataset manifest path")->required();
  if (with_hyper) {
    cmd->add_option("--lambda", o.lambda, "Balance parameter in [0,1)")->required();
    cmd->add_option("--dim", o.dim, "Latent space dimensionality")->required();
  }
  cmd->add_option("--semantic", o.semantic,
                  "Semantic modality for prediction (default: first)");
  cmd->add_option("--fuse", o.fuse, "Fusion weights, e.g. attr=0.7,wordvec=0.3");
  cmd->add_flag("--fast", o.fast, "fast-LSE: train on per-class mean features");
  cmd->add_flag("--standardize", o.standardize, "Per-feature standardization");
  cmd->add_option("--topk", o.topk, "top@k accuracies to report");
  cmd->add_option("--out", o.out_dir, "Directory for report JSON/CSV files");
}

std::vector<int> parse_id_list(const std::string& s) {
  std::vector<int> ids;
  std::size_t start = 0;
  while (start < s.size()) {
    std::size_t comma = s.find(',', start);
    ids.push_back(std::stoi(s.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (ids.empty()) throw lse::ValidationError("empty candidate id list");
  return ids;
}

int run(int argc, char** argv) {
  CLI::App app{"Latent space encoding for zero-shot learning"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Seed for splits and searches");
  app.add_option("--threads", g.threads, "Parallelism ceiling for grid/CV cells")
      ->envname("LSE_THREADS");
  app.add_flag("--strict", g.strict, "Escalate recoverable warnings to errors");
  app.add_option("--format", g.format, "Report format on stdout")
      ->check(CLI::IsMember({"text", "csv"}));

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train a model from a manifest");
  EvalCliOptions tr;
  std::string model_out;
  train_cmd->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--lambda", tr.lambda, "Balance parameter")->required();
  train_cmd->add_option("--dim", tr.dim, "Latent dimensionality")->required();
  train_cmd->add_option("--out", model_out, "Model file to write")->required();
  train_cmd->add_flag("--fast", tr.fast, "fast-LSE compaction before training");
  train_cmd->add_flag("--standardize", tr.standardize, "Per-feature standardization");
  train_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(tr.manifest);
    lse::Dataset training = ds.select_instances(ds.seen_instance_indices());
    if (tr.fast) training = lse::fast_compact(training);
    lse::LseModel model =
        lse::train(training, {tr.lambda, tr.dim}, {tr.standardize});
    lse::save_model(model, model_out);
    for (const auto& d : model.diagnostics) std::cerr << "warning: " << d << "\n";
    std::cout << "model written to " << model_out << "\n";
  });

  // predict ----------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Classify test instances");
  std::string pr_model, pr_manifest, pr_matrix, pr_source = "unseen";
  std::string pr_candidates = "unseen", pr_semantic, pr_fuse, pr_out;
  int pr_topk = 5;
  predict_cmd->add_option("--model", pr_model, "Trained model file")->required();
  predict_cmd->add_option("--manifest", pr_manifest, "Dataset manifest")->required();
  predict_cmd->add_option("--matrix", pr_matrix,
                          "Matrix of test instances (default: from manifest)");
  predict_cmd->add_option("--test-source", pr_source, "unseen|seen|all")
      ->check(CLI::IsMember({"unseen", "seen", "all"}));
  predict_cmd->add_option("--candidates", pr_candidates,
                          "unseen|seen|total or comma-separated class ids");
  predict_cmd->add_option("--semantic", pr_semantic, "Semantic modality");
  predict_cmd->add_option("--fuse", pr_fuse, "Fusion weights name=w,...");
  predict_cmd->add_option("--topk", pr_topk, "Candidates listed per instance");
  predict_cmd->add_option("--out", pr_out, "Write predictions to file");
  predict_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(pr_manifest);
    lse::LseModel model = lse::load_model(pr_model);

    lse::ModalityMatrix instances;
    instances.name = ds.visual().name;
    instances.kind = lse::ModalityKind::kVisual;
    if (!pr_matrix.empty()) {
      instances.values = lse::io::read_matrix(pr_matrix);
    } else {
      std::vector<Eigen::Index> idx;
      if (pr_source == "unseen")
        idx = ds.unseen_instance_indices();
      else if (pr_source == "seen")
        idx = ds.seen_instance_indices();
      else
        for (Eigen::Index j = 0; j < ds.num_instances(); ++j) idx.push_back(j);
      if (idx.empty()) throw lse::ValidationError("no test instances selected");
      instances.values.resize(ds.visual().rows(),
                              static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i)
        instances.values.col(static_cast<Eigen::Index>(i)) =
            ds.visual().values.col(idx[i]);
    }

    std::vector<int> cand_ids;
    if (pr_candidates == "unseen")
      cand_ids = lse::detail::candidate_ids_for(ds, lse::CandidateSet::kUnseen);
    else if (pr_candidates == "seen")
      cand_ids = lse::detail::candidate_ids_for(ds, lse::CandidateSet::kSeen);
    else if (pr_candidates == "total")
      cand_ids = lse::detail::candidate_ids_for(ds, lse::CandidateSet::kTotal);
    else
      cand_ids = parse_id_list(pr_candidates);

    lse::BatchPrediction pred;
    if (!pr_fuse.empty()) {
      lse::FusionWeights w = parse_fusion(pr_fuse);
      std::vector<lse::PrototypeMatrix> protos;
      for (const auto& [name, alpha] : w.weights)
        protos.push_back(ds.prototypes_for(name));
      pred = lse::predict_batch(model, instances, protos, cand_ids, w);
    } else {
      std::string sem = pr_semantic.empty() ? lse::detail::default_semantic(ds)
                                            : pr_semantic;
      pred = lse::predict_batch(model, instances, ds.prototypes_for(sem),
                                cand_ids, sem);
    }

    const int k = std::clamp(pr_topk, 1, static_cast<int>(cand_ids.size()));
    std::ostringstream lines;
    for (Eigen::Index t = 0; t < pred.scores.rows(); ++t) {
      lines << t << "\t" << pred.labels[static_cast<std::size_t>(t)] << "\t";
      std::vector<std::size_t> order(cand_ids.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = pred.scores(t, static_cast<Eigen::Index>(a));
        const double sb = pred.scores(t, static_cast<Eigen::Index>(b));
        if (sa != sb) return sa > sb;
        return cand_ids[a] < cand_ids[b];
      });
      for (int i = 0; i < k; ++i) {
        if (i) lines << ",";
        lines << cand_ids[order[static_cast<std::size_t>(i)]] << ":"
              << format_score(
                     pred.scores(t, static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)])));
      }
      lines << "\n";
    }
    if (pr_out.empty()) {
      std::cout << lines.str();
    } else {
      std::ofstream out(pr_out, std::ios::trunc);
      if (!out) throw lse::IoError("cannot open for writing: " + pr_out);
      out << lines.str();
    }
  });

  // eval-tzsl --------------------------------------------------------------
  auto* tzsl_cmd = app.add_subcommand("eval-tzsl", "Traditional ZSL evaluation");
  EvalCliOptions tz;
  add_eval_flags(tzsl_cmd, tz);
  tzsl_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(tz.manifest);
    emit_report(lse::run_tzsl(ds, {tz.lambda, tz.dim}, tz.to_eval_options(g)), g,
                tz.out_dir);
  });

  // eval-gzsl --------------------------------------------------------------
  auto* gzsl_cmd = app.add_subcommand(
      "eval-gzsl", "Generalized ZSL scenarios (or a whole experiment config)");
  EvalCliOptions gz;
  std::string gz_scenario, gz_config;
  gzsl_cmd->add_option("--scenario", gz_scenario, "U-U|S-S|U-T|S-T");
  gzsl_cmd->add_option("--config", gz_config,
                       "Experiment config JSON (runs its scenario list)");
  gzsl_cmd->add_option("--manifest", gz.manifest, "Dataset manifest");
  gzsl_cmd->add_option("--lambda", gz.lambda, "Balance parameter");
  gzsl_cmd->add_option("--dim", gz.dim, "Latent dimensionality");
  gzsl_cmd->add_option("--semantic", gz.semantic, "Semantic modality");
  gzsl_cmd->add_option("--fuse", gz.fuse, "Fusion weights name=w,...");
  gzsl_cmd->add_flag("--fast", gz.fast, "fast-LSE");
  gzsl_cmd->add_flag("--standardize", gz.standardize, "Standardize features");
  gzsl_cmd->add_option("--topk", gz.topk, "top@k accuracies");
  gzsl_cmd->add_option("--out", gz.out_dir, "Output directory");
  gzsl_cmd->callback([&] {
    if (!gz_config.empty()) {
      lse::ExperimentConfig cfg = lse::read_experiment_config(gz_config);
      if (!gz.out_dir.empty()) cfg.output_dir = gz.out_dir;
      lse::ExperimentResult res = lse::run_experiment(cfg, g.threads);
      write_experiment_outputs(res, cfg);
      for (const auto& rep : res.reports) {
        if (g.format == "csv")
          std::cout << rep.to_csv();
        else
          std::cout << rep.to_text() << "\n";
      }
      return;
    }
    if (gz_scenario.empty() || gz.manifest.empty())
      throw lse::ValidationError(
          "eval-gzsl needs either --config or --scenario with --manifest/--lambda/--dim");
    lse::Dataset ds = lse::assemble_dataset(gz.manifest);
    emit_report(lse::run_gzsl(ds, {gz.lambda, gz.dim},
                              lse::ScenarioSpec::from_name(gz_scenario),
                              gz.to_eval_options(g)),
                g, gz.out_dir);
  });

  // eval-zsr ---------------------------------------------------------------
  auto* zsr_cmd = app.add_subcommand("eval-zsr", "Zero-shot retrieval (mAP)");
  EvalCliOptions zr;
  add_eval_flags(zsr_cmd, zr);
  zsr_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(zr.manifest);
    emit_report(lse::run_zsr(ds, {zr.lambda, zr.dim}, zr.to_eval_options(g)), g,
                zr.out_dir);
  });

  // gridsearch -------------------------------------------------------------
  auto* grid_cmd =
      app.add_subcommand("gridsearch", "Class-wise CV over (lambda, d)");
  EvalCliOptions gs;
  std::vector<double> gs_lambda;
  std::vector<int> gs_dim;
  int gs_folds = 5;
  grid_cmd->add_option("--manifest", gs.manifest, "Dataset manifest")->required();
  grid_cmd->add_option("--lambda-grid", gs_lambda, "Lambda grid values")->required();
  grid_cmd->add_option("--dim-grid", gs_dim, "Latent dim grid values")->required();
  grid_cmd->add_option("--folds", gs_folds, "Class-wise folds");
  grid_cmd->add_option("--semantic", gs.semantic, "Semantic modality");
  grid_cmd->add_flag("--fast", gs.fast, "fast-LSE");
  grid_cmd->add_flag("--standardize", gs.standardize, "Standardize features");
  grid_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(gs.manifest);
    lse::CvPlan plan{gs_folds, gs_lambda, gs_dim, g.seed};
    lse::CvResult res = lse::cross_validate(ds, plan, gs.to_eval_options(g));
    if (g.format == "csv") {
      std::cout << "lambda,dim,mean_accuracy\n";
      for (const auto& cell : res.table)
        std::cout << format_score(cell.lambda) << "," << cell.dim << ","
                  << (cell.feasible ? format_score(cell.mean_accuracy) : "") << "\n";
    } else {
      for (const auto& cell : res.table) {
        std::printf("lambda=%-8g d=%-6d ", cell.lambda, cell.dim);
        if (cell.feasible)
          std::printf("mean PC accuracy %.6f\n", cell.mean_accuracy);
        else
          std::printf("infeasible\n");
      }
    }
    std::printf("best: lambda=%g d=%d (mean PC accuracy %.6f)\n", res.best.lambda,
                res.best.latent_dim, res.best_score);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  });

  // fuse-search ------------------------------------------------------------
  auto* fuse_cmd =
      app.add_subcommand("fuse-search", "Simplex grid search for fusion weights");
  EvalCliOptions fs;
  std::vector<std::string> fs_modalities;
  double fs_step = 0.1;
  bool fs_paper = false;
  fuse_cmd->add_option("--manifest", fs.manifest, "Dataset manifest")->required();
  fuse_cmd->add_option("--lambda", fs.lambda, "Balance parameter")->required();
  fuse_cmd->add_option("--dim", fs.dim, "Latent dimensionality")->required();
  fuse_cmd->add_option("--modalities", fs_modalities,
                       "Semantic modalities to fuse (default: all)");
  fuse_cmd->add_option("--step", fs_step, "Simplex grid step");
  fuse_cmd->add_flag("--paper-protocol", fs_paper,
                     "Score weights on unseen test data (protocol-leaking)");
  fuse_cmd->add_flag("--fast", fs.fast, "fast-LSE");
  fuse_cmd->add_flag("--standardize", fs.standardize, "Standardize features");
  fuse_cmd->callback([&] {
    lse::Dataset ds = lse::assemble_dataset(fs.manifest);
    std::vector<std::string> mods =
        fs_modalities.empty() ? ds.semantic_modality_names() : fs_modalities;
    lse::FusionSearchOptions fopts;
    fopts.grid_step = fs_step;
    fopts.paper_protocol = fs_paper;
    fopts.seed = g.seed;
    fopts.fast_lse = fs.fast;
    fopts.standardize = fs.standardize;
    fopts.strict = g.strict;
    fopts.threads = g.threads;
    lse::FusionSearchResult res =
        lse::search_fusion_weights(ds, {fs.lambda, fs.dim}, mods, fopts);
    if (res.paper_protocol)
      std::cerr << "warning: weights were tuned on unseen test data "
                   "(paper protocol); do not report them as unbiased\n";
    if (g.format == "csv") {
      std::cout << "weights,score\n";
      for (const auto& [w, s] : res.table) {
        std::string ws;
        for (std::size_t i = 0; i < w.size(); ++i)
          ws += (i ? ";" : "") + format_score(w[i]);
        std::cout << ws << "," << format_score(s) << "\n";
      }
    }
    std::cout << "best:";
    for (const auto& [name, alpha] : res.best.weights)
      std::cout << " " << name << "=" << format_score(alpha);
    std::cout << " (PC accuracy " << format_score(res.best_score) << ")\n";
  });

  // synth ------------------------------------------------------------------
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a planted-model synthetic dataset");
  lse::SynthSpec sp;
  std::string synth_out;
  std::vector<int> extra_sem, extra_noise;
  synth_cmd->add_option("--classes", sp.num_classes, "Total classes")->required();
  synth_cmd->add_option("--per-class", sp.per_class, "Instances per class")->required();
  synth_cmd->add_option("--f1", sp.visual_dim, "Visual dimensionality")->required();
  synth_cmd->add_option("--f2", sp.semantic_dim, "Semantic dimensionality")->required();
  synth_cmd->add_option("--d-true", sp.latent_dim, "Planted latent dimension")->required();
  synth_cmd->add_option("--noise-sigma", sp.noise_sigma, "Visual noise stddev");
  synth_cmd->add_option("--seed", sp.seed, "Generator seed");
  synth_cmd->add_option("--unseen", sp.unseen_classes,
                        "Unseen class count (default: classes/3)");
  synth_cmd->add_option("--extra-semantic", extra_sem,
                        "Additional informative semantic modality dims");
  synth_cmd->add_option("--extra-semantic-noise", extra_noise,
                        "Additional pure-noise semantic modality dims");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->callback([&] {
    for (int d : extra_sem) sp.extra_semantics.push_back({d, true});
    for (int d : extra_noise) sp.extra_semantics.push_back({d, false});
    lse::Dataset ds = lse::generate_synthetic(sp);
    auto manifest = lse::write_dataset(ds, synth_out);
    std::cout << "manifest written to " << manifest.string() << "\n";
  });

  // inspect ----------------------------------------------------------------
  auto* inspect_cmd = app.add_subcommand("inspect", "Print model metadata");
  std::string in_model;
  inspect_cmd->add_option("--model", in_model, "Model file")->required();
  inspect_cmd->callback([&] {
    lse::LseModel model = lse::load_model(in_model);
    std::cout << "lambda:      " << format_score(model.hyper.lambda) << "\n";
    std::cout << "latent dim:  " << model.hyper.latent_dim << "\n";
    std::cout << "instances:   " << model.code.cols() << "\n";
    std::cout << "standardize: " << (model.standardized() ? "yes" : "no") << "\n";
    for (std::size_t i = 0; i < model.modality_names.size(); ++i)
      std::cout << "modality:    " << model.modality_names[i] << " ("
                << lse::to_string(model.modality_kinds[i]) << ", dim "
                << model.encoders[i].cols() << ")\n";
    std::cout << "eigenvalues:";
    for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
      std::cout << " " << format_score(model.eigenvalues[i]);
    std::cout << "\n";
    for (const auto& d : model.diagnostics) std::cout << "diagnostic:  " << d << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const lse::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
