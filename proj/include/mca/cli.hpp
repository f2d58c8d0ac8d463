#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mca/mca.hpp"

namespace mca {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct SynthFlags {
  SynthConfig cfg;

  void attach(CLI::App* app) {
    app->add_option("--clusters", cfg.clusters, "cluster count");
    app->add_option("--images-per-cluster", cfg.images_per_cluster);
    app->add_option("--words-per-cluster", cfg.words_per_cluster);
    app->add_option("--dim", cfg.dim, "embedding dimension");
    app->add_option("--separation", cfg.separation, "direction separation in (0,1]");
    app->add_option("--noise-sigma", cfg.noise_sigma);
    app->add_option("--misalignment-rate", cfg.misalignment_rate,
                    "fraction of words embedded near a random cluster");
    app->add_option("--taxonomy-depth", cfg.taxonomy_depth);
    app->add_option("--shared-levels", cfg.shared_levels);
  }

  json manifest() const {
    return json{{"clusters", cfg.clusters},
                {"images_per_cluster", cfg.images_per_cluster},
                {"words_per_cluster", cfg.words_per_cluster},
                {"dim", cfg.dim},
                {"separation", cfg.separation},
                {"noise_sigma", cfg.noise_sigma},
                {"misalignment_rate", cfg.misalignment_rate},
                {"taxonomy_depth", cfg.taxonomy_depth},
                {"shared_levels", cfg.shared_levels}};
  }
};

struct TrainFlags {
  TrainConfig cfg;
  std::string optimizer_name = "adam";

  void attach(CLI::App* app) {
    app->add_option("--lr", cfg.lr, "learning rate");
    app->add_option("--epochs", cfg.epochs);
    app->add_option("--batch-size", cfg.batch_size);
    app->add_option("--c", cfg.c, "cluster count (0 = take from metadata)");
    app->add_option("--k-img", cfg.k_img, "in-modal neighborhood size");
    app->add_option("--k-txt", cfg.k_txt, "cross-modal neighborhood size");
    app->add_option("--k-proto", cfg.k_proto, "words per text prototype");
    app->add_option("--tau-ia", cfg.tau_ia);
    app->add_option("--tau-pa", cfg.tau_pa);
    app->add_option("--eta", cfg.eta, "balance term weight");
    app->add_option("--lambda-a", cfg.lambda_a);
    app->add_option("--lambda-pa", cfg.lambda_pa);
    app->add_option("--lambda-sa", cfg.lambda_sa);
    app->add_option("--gamma-r", cfg.gamma_r, "nearest words kept per center");
    app->add_option("--gamma-h", cfg.gamma_h, "taxonomy levels to filter");
    app->add_option("--rho-u", cfg.rho_u, "uniqueness threshold");
    app->add_option("--seed", cfg.seed);
    app->add_option("--optimizer", optimizer_name)->check(CLI::IsMember({"adam", "sgd"}));
    app->add_flag("--no-bias", [this](std::int64_t) { cfg.use_bias = false; },
                  "drop the head bias terms");
    app->add_flag("--paper-literal-entropy", cfg.paper_literal_entropy,
                  "use the balance-term sign exactly as printed");
    app->add_flag("--full-data-prototypes", cfg.full_data_prototypes,
                  "compute prototypes from all rows instead of the batch");
    app->add_option("--threads", cfg.threads, "worker threads for row-parallel stages");
  }

  TrainConfig resolved() const {
    TrainConfig out = cfg;
    out.optimizer = optimizer_name == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
    return out;
  }

  json manifest() const {
    return json{{"lr", cfg.lr},
                {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"c", cfg.c},
                {"k_img", cfg.k_img},
                {"k_txt", cfg.k_txt},
                {"k_proto", cfg.k_proto},
                {"tau_ia", cfg.tau_ia},
                {"tau_pa", cfg.tau_pa},
                {"eta", cfg.eta},
                {"lambda_a", cfg.lambda_a},
                {"lambda_pa", cfg.lambda_pa},
                {"lambda_sa", cfg.lambda_sa},
                {"gamma_r", cfg.gamma_r},
                {"gamma_h", cfg.gamma_h},
                {"rho_u", cfg.rho_u},
                {"seed", cfg.seed},
                {"optimizer", optimizer_name},
                {"use_bias", cfg.use_bias},
                {"paper_literal_entropy", cfg.paper_literal_entropy},
                {"full_data_prototypes", cfg.full_data_prototypes},
                {"threads", cfg.threads}};
  }
};

inline void write_manifest(const fs::path& out_dir, const json& manifest) {
  std::ofstream os(out_dir / "manifest.json");
  if (!os) throw DataError("cannot write manifest in " + out_dir.string());
  os << manifest.dump(2) << "\n";
}

inline VocabularyBundle load_vocabulary(const fs::path& words_path,
                                        const std::string& taxonomy_path) {
  VocabularyBundle vocab;
  vocab.embeddings = l2_normalize(load_embeddings(words_path));
  vocab.words = vocab.embeddings.ids;
  if (!taxonomy_path.empty()) {
    std::ifstream is(taxonomy_path);
    if (!is) throw DataError("cannot open taxonomy file: " + taxonomy_path);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError("malformed taxonomy line: " + line);
      vocab.taxonomy_edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  return vocab;
}

// Deterministic split: shuffled permutation, first holdout-fraction rows out.
struct Split {
  std::vector<int> train_rows;
  std::vector<int> eval_rows;
};

inline Split split_rows(std::size_t n, double holdout, std::uint64_t seed) {
  if (holdout < 0.0 || holdout >= 1.0) throw UsageError("holdout must be in [0, 1)");
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  Rng rng = Rng::derive(seed, 0x73706c6974ULL);
  rng.shuffle(perm);
  const std::size_t held = static_cast<std::size_t>(holdout * static_cast<double>(n));
  Split s;
  s.eval_rows.assign(perm.begin(), perm.begin() + held);
  s.train_rows.assign(perm.begin() + held, perm.end());
  return s;
}

inline EmbeddingMatrix take_rows(const EmbeddingMatrix& m, const std::vector<int>& rows) {
  EmbeddingMatrix out;
  out.d = m.d;
  out.data.reserve(rows.size() * m.d);
  for (int r : rows) {
    auto row = m.row(r);
    out.data.insert(out.data.end(), row.begin(), row.end());
    out.ids.push_back(m.ids[r]);
    ++out.n;
  }
  out.n = rows.size();
  return out;
}

inline void write_synthetic(const SynthData& data, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  save_embeddings(data.dataset.images, out_dir / "images.mcae");
  save_meta(out_dir / "images.mcae", data.dataset.images.ids, data.dataset.labels,
            data.dataset.c);
  save_embeddings(data.vocab.embeddings, out_dir / "words.mcae");
  save_meta(out_dir / "words.mcae", data.vocab.words, std::nullopt, 0);
  save_taxonomy(data.vocab.taxonomy_edges, out_dir / "taxonomy.tsv");
  json truth;
  truth["word_cluster"] = data.word_cluster;
  truth["word_pointed"] = data.word_pointed;
  std::ofstream ts(out_dir / "truth.json");
  ts << truth.dump(2) << "\n";
}

struct PreparedRun {
  DatasetBundle dataset;       // normalized images
  VocabularyBundle vocab;      // normalized words
  SemanticSpace space;
  StageReport report;
  NeighborIndex img_nbrs;      // over train rows
  NeighborIndex txt_nbrs;      // train rows x space words
  Split split;
};

inline PreparedRun prepare_run(const fs::path& images_path, const fs::path& words_path,
                               const std::string& taxonomy_path, TrainConfig& cfg,
                               double holdout) {
  PreparedRun run;
  run.dataset = load_dataset(images_path);
  run.dataset.images = l2_normalize(run.dataset.images);
  run.vocab = load_vocabulary(words_path, taxonomy_path);
  if (cfg.c == 0) {
    if (run.dataset.c <= 0)
      throw UsageError("cluster count not in metadata; pass --c");
    cfg.c = static_cast<std::size_t>(run.dataset.c);
  }

  SpaceBuildConfig scfg;
  scfg.c = cfg.c;
  scfg.rho_u = cfg.rho_u;
  scfg.gamma_r = std::min<std::size_t>(cfg.gamma_r, run.vocab.words.size());
  scfg.gamma_h = cfg.gamma_h;
  scfg.seed = cfg.seed;
  run.space = build_semantic_space(run.dataset.images, run.vocab, scfg, &run.report);
  if (run.space.size() == 0)
    throw DataError("semantic space is empty after filtering; relax gamma_h or rho_u");
  if (cfg.k_txt > run.space.size())
    throw UsageError("k-txt exceeds the filtered vocabulary size " +
                     std::to_string(run.space.size()));
  if (cfg.k_proto > run.space.size())
    throw UsageError("k-proto exceeds the filtered vocabulary size");

  run.split = split_rows(run.dataset.images.n, holdout, cfg.seed);
  const EmbeddingMatrix train_images = take_rows(run.dataset.images, run.split.train_rows);
  if (cfg.k_img >= train_images.n)
    throw UsageError("k-img must be smaller than the number of training rows");
  run.img_nbrs = topk_in_modal(train_images, cfg.k_img, cfg.threads);
  run.txt_nbrs =
      topk_cross_modal(train_images, run.space.kept_embeddings, cfg.k_txt, cfg.threads);
  return run;
}

inline int command_gen(const SynthFlags& flags, std::uint64_t seed,
                       const std::string& out_dir) {
  SynthConfig cfg = flags.cfg;
  cfg.seed = seed;
  const SynthData data = generate(cfg);
  write_synthetic(data, out_dir);
  json manifest = flags.manifest();
  manifest["subcommand"] = "gen";
  manifest["seed"] = seed;
  manifest["out"] = out_dir;
  write_manifest(out_dir, manifest);
  std::cout << "wrote " << data.dataset.images.n << " images, " << data.vocab.words.size()
            << " words to " << out_dir << "\n";
  return kExitOk;
}

inline int command_build_space(const std::string& images_path,
                               const std::string& words_path,
                               const std::string& taxonomy_path, TrainFlags& flags,
                               const std::string& out_dir, bool dump_csv) {
  TrainConfig cfg = flags.resolved();
  DatasetBundle dataset = load_dataset(images_path);
  dataset.images = l2_normalize(dataset.images);
  VocabularyBundle vocab = load_vocabulary(words_path, taxonomy_path);
  if (cfg.c == 0) {
    if (dataset.c <= 0) throw UsageError("cluster count not in metadata; pass --c");
    cfg.c = static_cast<std::size_t>(dataset.c);
  }
  SpaceBuildConfig scfg;
  scfg.c = cfg.c;
  scfg.rho_u = cfg.rho_u;
  scfg.gamma_r = std::min<std::size_t>(cfg.gamma_r, vocab.words.size());
  scfg.gamma_h = cfg.gamma_h;
  scfg.seed = cfg.seed;
  StageReport report;
  const SemanticSpace space = build_semantic_space(dataset.images, vocab, scfg, &report);
  report.print(std::cout);

  fs::create_directories(out_dir);
  save_embeddings(space.kept_embeddings, fs::path(out_dir) / "space_words.mcae");
  save_meta(fs::path(out_dir) / "space_words.mcae", space.kept_words, std::nullopt, 0);
  if (dump_csv) dump_space_csv(vocab, space, fs::path(out_dir) / "space_report.csv");
  json manifest = flags.manifest();
  manifest["subcommand"] = "build-space";
  manifest["images"] = images_path;
  manifest["words"] = words_path;
  manifest["taxonomy"] = taxonomy_path;
  manifest["kept_words"] = space.size();
  write_manifest(out_dir, manifest);
  return kExitOk;
}

inline int command_train(const std::string& images_path, const std::string& words_path,
                         const std::string& taxonomy_path, TrainFlags& flags,
                         const std::string& out_dir, double holdout, bool dump_neighbors) {
  TrainConfig cfg = flags.resolved();
  PreparedRun run = prepare_run(images_path, words_path, taxonomy_path, cfg, holdout);
  const EmbeddingMatrix train_images = take_rows(run.dataset.images, run.split.train_rows);

  fs::create_directories(out_dir);
  if (dump_neighbors) {
    dump_neighbors_csv(run.img_nbrs, train_images.ids, train_images.ids,
                       fs::path(out_dir) / "image_neighbors.csv");
    dump_neighbors_csv(run.txt_nbrs, train_images.ids, run.space.kept_words,
                       fs::path(out_dir) / "text_neighbors.csv");
  }

  std::ofstream log(fs::path(out_dir) / "train_log.csv");
  const fs::path ckpt_dir = fs::path(out_dir) / "checkpoints";
  fs::create_directories(ckpt_dir);
  auto on_epoch = [&](int epoch, const TrainState& st) {
    std::ostringstream name;
    name << "epoch_" << epoch << ".mcap";
    save_params(st.params, ckpt_dir / name.str());
  };
  const TrainState st =
      train(train_images, run.img_nbrs, run.txt_nbrs, run.space, cfg, &log, on_epoch);
  log.close();
  save_params(st.params, fs::path(out_dir) / "checkpoint.mcap");

  // Full-dataset assignments from the final parameters.
  const SoftAssignment q = image_head_forward(st.params, run.dataset.images, cfg.threads);
  const std::vector<int> assignments = hard_labels(q);
  {
    std::ofstream as(fs::path(out_dir) / "assignments.csv");
    as << "id,cluster\n";
    for (std::size_t i = 0; i < run.dataset.images.n; ++i)
      as << run.dataset.images.ids[i] << ',' << assignments[i] << '\n';
  }

  json manifest = flags.manifest();
  manifest["subcommand"] = "train";
  manifest["images"] = images_path;
  manifest["words"] = words_path;
  manifest["taxonomy"] = taxonomy_path;
  manifest["holdout"] = holdout;
  manifest["kept_words"] = run.space.size();
  manifest["aborted"] = st.aborted;
  write_manifest(out_dir, manifest);

  if (run.dataset.labels) {
    const auto& rows = run.split.eval_rows.empty() ? run.split.train_rows
                                                   : run.split.eval_rows;
    std::vector<int> pred, truth;
    for (int r : rows) {
      pred.push_back(assignments[r]);
      truth.push_back((*run.dataset.labels)[r]);
    }
    const MetricReport report = evaluate_clustering(pred, truth);
    report.print(std::cout);
    std::ofstream ms(fs::path(out_dir) / "metrics.csv");
    report.write_csv(ms);
  }
  if (st.aborted) {
    std::cerr << "training aborted on a non-finite step; kept last good parameters\n";
    return kExitNumeric;
  }
  return kExitOk;
}

inline int command_eval(const std::string& images_path, const std::string& checkpoint_path,
                        const std::string& out_dir) {
  DatasetBundle dataset = load_dataset(images_path);
  dataset.images = l2_normalize(dataset.images);
  if (!dataset.labels) throw DataError("eval requires labels in the metadata sidecar");
  const ModelParams params = load_params(checkpoint_path);
  const MetricReport report = evaluate(params, dataset.images, *dataset.labels);
  report.print(std::cout);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream ms(fs::path(out_dir) / "metrics.csv");
    report.write_csv(ms);
    json manifest;
    manifest["subcommand"] = "eval";
    manifest["images"] = images_path;
    manifest["checkpoint"] = checkpoint_path;
    write_manifest(out_dir, manifest);
  }
  return kExitOk;
}

inline int command_audit(const std::string& images_path, const std::string& words_path,
                         const std::string& taxonomy_path,
                         const std::string& checkpoint_path, TrainFlags& flags,
                         const std::string& out_dir, BoundInputs bounds) {
  TrainConfig cfg = flags.resolved();
  PreparedRun run = prepare_run(images_path, words_path, taxonomy_path, cfg, 0.0);
  const ModelParams params = load_params(checkpoint_path);

  const SoftAssignment q = image_head_forward(params, run.dataset.images, cfg.threads);
  const SoftAssignment p = text_head_forward(params, run.space.kept_embeddings, cfg.threads);
  const AssumptionAudit audit = audit_assumptions(q, p, run.img_nbrs, run.txt_nbrs);

  bounds.n = run.dataset.images.n;
  bounds.m = run.space.size();
  bounds.d = run.dataset.images.d;
  bounds.c = cfg.c;
  bounds.tau_ia = cfg.tau_ia;
  bounds.tau_pa = cfg.tau_pa;
  bounds.eta = cfg.eta;
  bounds.lambda_a = cfg.lambda_a;
  bounds.lambda_pa = cfg.lambda_pa;
  bounds.lambda_sa = cfg.lambda_sa;
  if (bounds.max_embed_abs <= 0.0)
    bounds.max_embed_abs = measure_max_abs(run.dataset.images);
  const BoundReport report = bound_constants(audit, bounds);
  report.print(std::cout);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream cs(fs::path(out_dir) / "audit.csv");
    report.write_csv(cs);
    json manifest = flags.manifest();
    manifest["subcommand"] = "audit";
    manifest["images"] = images_path;
    manifest["checkpoint"] = checkpoint_path;
    manifest["delta"] = bounds.delta;
    manifest["lips_align"] = bounds.lips_align;
    manifest["lips_head"] = bounds.lips_head;
    manifest["max_embed_abs"] = bounds.max_embed_abs;
    manifest["lagrange_const"] = bounds.lagrange_const;
    write_manifest(out_dir, manifest);
  }
  return kExitOk;
}

inline int command_bench(const SynthFlags& synth, TrainFlags& flags,
                         const std::string& out_dir, int repeats) {
  TrainConfig base_cfg = flags.resolved();
  fs::create_directories(out_dir);
  BenchResult combined;
  for (int rep = 0; rep < repeats; ++rep) {
    SynthConfig scfg = synth.cfg;
    scfg.seed = base_cfg.seed + static_cast<std::uint64_t>(rep);
    const SynthData data = generate(scfg);

    TrainConfig cfg = base_cfg;
    cfg.seed = scfg.seed;
    cfg.c = scfg.clusters;
    VocabularyBundle vocab = data.vocab;
    vocab.embeddings = l2_normalize(vocab.embeddings);
    EmbeddingMatrix images = l2_normalize(data.dataset.images);

    SpaceBuildConfig space_cfg;
    space_cfg.c = cfg.c;
    space_cfg.rho_u = cfg.rho_u;
    space_cfg.gamma_r = std::min<std::size_t>(cfg.gamma_r, vocab.words.size());
    space_cfg.gamma_h = cfg.gamma_h;
    space_cfg.seed = cfg.seed;
    const SemanticSpace space = build_semantic_space(images, vocab, space_cfg);
    const NeighborIndex img_nbrs = topk_in_modal(images, cfg.k_img, cfg.threads);
    const NeighborIndex txt_nbrs =
        topk_cross_modal(images, space.kept_embeddings, cfg.k_txt, cfg.threads);

    const BenchResult result = run_bench(images, *data.dataset.labels, space, img_nbrs,
                                         txt_nbrs, cfg, 1);
    for (const auto& r : result.runs) combined.runs.push_back(r);
  }

  std::ofstream cs(fs::path(out_dir) / "bench.csv");
  combined.write_csv(cs);
  std::cout << "mean final accuracy over " << repeats << " seeds\n";
  std::cout << "SMP   " << combined.mean_final(LabelMethod::kSmp) << "\n";
  std::cout << "PMCP  " << combined.mean_final(LabelMethod::kPmcp) << "\n";
  std::cout << "MCA   " << combined.mean_final(LabelMethod::kMca) << "\n";
  json manifest = flags.manifest();
  manifest["subcommand"] = "bench";
  manifest["repeats"] = repeats;
  manifest["synthetic"] = synth.manifest();
  write_manifest(out_dir, manifest);
  return kExitOk;
}

inline int run(std::vector<std::string> args) {
  CLI::App app{"multi-level cross-modal alignment clustering pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value overrides");
  app.allow_config_extras(false);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic paired dataset");
  SynthFlags gen_synth;
  gen_synth.attach(gen);
  std::uint64_t gen_seed = 1;
  std::string gen_out = "run";
  gen->add_option("--seed", gen_seed);
  gen->add_option("-o,--out", gen_out)->required();

  // build-space
  auto* space_cmd = app.add_subcommand("build-space", "run the two-stage word filtering");
  TrainFlags space_flags;
  space_flags.attach(space_cmd);
  std::string sp_images, sp_words, sp_tax, sp_out = "run";
  bool sp_csv = false;
  space_cmd->add_option("--images", sp_images)->required();
  space_cmd->add_option("--words", sp_words)->required();
  space_cmd->add_option("--taxonomy", sp_tax);
  space_cmd->add_option("-o,--out", sp_out)->required();
  space_cmd->add_flag("--dump-csv", sp_csv, "write per-word provenance CSV");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the alignment heads");
  TrainFlags train_flags;
  train_flags.attach(train_cmd);
  std::string tr_images, tr_words, tr_tax, tr_out = "run";
  double tr_holdout = 0.0;
  bool tr_dump_neighbors = false;
  train_cmd->add_option("--images", tr_images)->required();
  train_cmd->add_option("--words", tr_words)->required();
  train_cmd->add_option("--taxonomy", tr_tax);
  train_cmd->add_option("-o,--out", tr_out)->required();
  train_cmd->add_option("--holdout", tr_holdout, "fraction of rows held out of training");
  train_cmd->add_flag("--dump-neighbors", tr_dump_neighbors);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against labels");
  std::string ev_images, ev_ckpt, ev_out;
  eval_cmd->add_option("--images", ev_images)->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
  eval_cmd->add_option("-o,--out", ev_out);

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "assumption audit and bound constants");
  TrainFlags audit_flags;
  audit_flags.attach(audit_cmd);
  std::string au_images, au_words, au_tax, au_ckpt, au_out;
  BoundInputs au_bounds;
  au_bounds.max_embed_abs = 0.0;  // 0 = measure from data
  audit_cmd->add_option("--images", au_images)->required();
  audit_cmd->add_option("--words", au_words)->required();
  audit_cmd->add_option("--taxonomy", au_tax);
  audit_cmd->add_option("--checkpoint", au_ckpt)->required();
  audit_cmd->add_option("-o,--out", au_out);
  audit_cmd->add_option("--delta", au_bounds.delta);
  audit_cmd->add_option("--lips-align", au_bounds.lips_align);
  audit_cmd->add_option("--lips-head", au_bounds.lips_head);
  audit_cmd->add_option("--max-embed-abs", au_bounds.max_embed_abs,
                        "0 measures max |u| from the data");
  audit_cmd->add_option("--lagrange-const", au_bounds.lagrange_const);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "compare SMP/PMCP/MCA pseudo-labelers");
  SynthFlags bench_synth;
  bench_synth.attach(bench_cmd);
  TrainFlags bench_flags;
  bench_flags.attach(bench_cmd);
  std::string be_out = "run";
  int be_repeats = 5;
  bench_cmd->add_option("-o,--out", be_out)->required();
  bench_cmd->add_option("--repeats", be_repeats);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return command_gen(gen_synth, gen_seed, gen_out);
    if (space_cmd->parsed())
      return command_build_space(sp_images, sp_words, sp_tax, space_flags, sp_out, sp_csv);
    if (train_cmd->parsed())
      return command_train(tr_images, tr_words, tr_tax, train_flags, tr_out, tr_holdout,
                           tr_dump_neighbors);
    if (eval_cmd->parsed()) return command_eval(ev_images, ev_ckpt, ev_out);
    if (audit_cmd->parsed())
      return command_audit(au_images, au_words, au_tax, au_ckpt, audit_flags, au_out,
                           au_bounds);
    if (bench_cmd->parsed())
      return command_bench(bench_synth, bench_flags, be_out, be_repeats);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace cli
}  // namespace mca
