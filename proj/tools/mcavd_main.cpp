// SPDX-License-Identifier: Apache-2.0
//
// Batch command-line surface: training, fine-tuning, evaluation, annotation
// auditing, dialog-phenomena analysis, and synthetic-data generation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "mcavd/analysis.hpp"
#include "mcavd/checkpoint.hpp"
#include "mcavd/metrics.hpp"
#include "mcavd/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // model
  std::string variant = "mca-i-h";
  int num_layers = 6;
  int num_heads = 8;
  int model_dim = 512;
  int ff_dim = 0;
  double dropout = 0.2;
  bool positional_encoding = false;
  int embed_dim = 300;
  int feature_dim = 2048;
  int n_boxes = 36;
  int n_candidates = 100;
  int max_q_len = 20;
  int max_hist_len = 200;
  bool include_caption = true;
  int min_count = 1;
  // training
  double lr = 0.0;
  int epochs = 0;
  int batch_dialogs = 4;
  std::vector<int> lr_milestones = {7, 10};
  double lr_decay = 0.1;
  double plateau_factor = 0.2;
  int plateau_patience = 2;
  int early_stop_patience = 5;
  double min_improve = 1e-4;
  double grad_clip = 5.0;
  double val_fraction = 0.1;
  bool resume = false;
  // paths and run identity
  std::string corpus, features, dense, word_vectors, subset, checkpoint;
  std::string output_dir;
  uint64_t seed = 1;
};

template <typename T>
void read_key(const json& j, const std::string& key, T& into) {
  try {
    into = j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

void apply_config_json(RunConfig& cfg, const json& j, const std::string& path) {
  if (!j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
  for (const auto& [key, value] : j.items()) {
    if (key == "variant") read_key(value, key, cfg.variant);
    else if (key == "num_layers") read_key(value, key, cfg.num_layers);
    else if (key == "num_heads") read_key(value, key, cfg.num_heads);
    else if (key == "model_dim") read_key(value, key, cfg.model_dim);
    else if (key == "ff_dim") read_key(value, key, cfg.ff_dim);
    else if (key == "dropout") read_key(value, key, cfg.dropout);
    else if (key == "positional_encoding") read_key(value, key, cfg.positional_encoding);
    else if (key == "embed_dim") read_key(value, key, cfg.embed_dim);
    else if (key == "feature_dim") read_key(value, key, cfg.feature_dim);
    else if (key == "n_boxes") read_key(value, key, cfg.n_boxes);
    else if (key == "n_candidates") read_key(value, key, cfg.n_candidates);
    else if (key == "max_q_len") read_key(value, key, cfg.max_q_len);
    else if (key == "max_hist_len") read_key(value, key, cfg.max_hist_len);
    else if (key == "include_caption") read_key(value, key, cfg.include_caption);
    else if (key == "min_count") read_key(value, key, cfg.min_count);
    else if (key == "lr") read_key(value, key, cfg.lr);
    else if (key == "epochs") read_key(value, key, cfg.epochs);
    else if (key == "batch_dialogs") read_key(value, key, cfg.batch_dialogs);
    else if (key == "lr_milestones") read_key(value, key, cfg.lr_milestones);
    else if (key == "lr_decay") read_key(value, key, cfg.lr_decay);
    else if (key == "plateau_factor") read_key(value, key, cfg.plateau_factor);
    else if (key == "plateau_patience") read_key(value, key, cfg.plateau_patience);
    else if (key == "early_stop_patience") read_key(value, key, cfg.early_stop_patience);
    else if (key == "min_improve") read_key(value, key, cfg.min_improve);
    else if (key == "grad_clip") read_key(value, key, cfg.grad_clip);
    else if (key == "val_fraction") read_key(value, key, cfg.val_fraction);
    else if (key == "resume") read_key(value, key, cfg.resume);
    else if (key == "corpus") read_key(value, key, cfg.corpus);
    else if (key == "features") read_key(value, key, cfg.features);
    else if (key == "dense") read_key(value, key, cfg.dense);
    else if (key == "word_vectors") read_key(value, key, cfg.word_vectors);
    else if (key == "subset") read_key(value, key, cfg.subset);
    else if (key == "checkpoint") read_key(value, key, cfg.checkpoint);
    else if (key == "output_dir") read_key(value, key, cfg.output_dir);
    else if (key == "seed") read_key(value, key, cfg.seed);
    else throw UsageError("unknown config key '" + key + "' in " + path);
  }
}

ordered_json config_snapshot(const RunConfig& cfg) {
  return ordered_json{{"variant", cfg.variant},
                      {"num_layers", cfg.num_layers},
                      {"num_heads", cfg.num_heads},
                      {"model_dim", cfg.model_dim},
                      {"ff_dim", cfg.ff_dim},
                      {"dropout", cfg.dropout},
                      {"positional_encoding", cfg.positional_encoding},
                      {"embed_dim", cfg.embed_dim},
                      {"feature_dim", cfg.feature_dim},
                      {"n_boxes", cfg.n_boxes},
                      {"n_candidates", cfg.n_candidates},
                      {"max_q_len", cfg.max_q_len},
                      {"max_hist_len", cfg.max_hist_len},
                      {"include_caption", cfg.include_caption},
                      {"min_count", cfg.min_count},
                      {"lr", cfg.lr},
                      {"epochs", cfg.epochs},
                      {"batch_dialogs", cfg.batch_dialogs},
                      {"lr_milestones", cfg.lr_milestones},
                      {"lr_decay", cfg.lr_decay},
                      {"plateau_factor", cfg.plateau_factor},
                      {"plateau_patience", cfg.plateau_patience},
                      {"early_stop_patience", cfg.early_stop_patience},
                      {"min_improve", cfg.min_improve},
                      {"grad_clip", cfg.grad_clip},
                      {"val_fraction", cfg.val_fraction},
                      {"resume", cfg.resume},
                      {"corpus", cfg.corpus},
                      {"features", cfg.features},
                      {"dense", cfg.dense},
                      {"word_vectors", cfg.word_vectors},
                      {"subset", cfg.subset},
                      {"checkpoint", cfg.checkpoint},
                      {"output_dir", cfg.output_dir},
                      {"seed", cfg.seed}};
}

mcavd::ModelConfig model_config(const RunConfig& cfg) {
  mcavd::ModelConfig mc;
  mc.variant = mcavd::parse_variant(cfg.variant);
  mc.attn.num_layers = cfg.num_layers;
  mc.attn.num_heads = cfg.num_heads;
  mc.attn.model_dim = cfg.model_dim;
  mc.attn.ff_dim = cfg.ff_dim;
  mc.attn.dropout = cfg.dropout;
  mc.attn.positional_encoding = cfg.positional_encoding;
  mc.embed_dim = cfg.embed_dim;
  mc.feature_dim = cfg.feature_dim;
  mc.n_boxes = cfg.n_boxes;
  mc.n_candidates = cfg.n_candidates;
  mc.max_q_len = cfg.max_q_len;
  mc.max_hist_len = cfg.max_hist_len;
  mc.include_caption = cfg.include_caption;
  return mc;
}

mcavd::TrainConfig train_config(const RunConfig& cfg) {
  mcavd::TrainConfig tc;
  tc.lr = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_dialogs = cfg.batch_dialogs;
  tc.seed = cfg.seed;
  tc.lr_milestones = cfg.lr_milestones;
  tc.lr_decay = cfg.lr_decay;
  tc.plateau_factor = cfg.plateau_factor;
  tc.plateau_patience = cfg.plateau_patience;
  tc.early_stop_patience = cfg.early_stop_patience;
  tc.min_improve = cfg.min_improve;
  tc.grad_clip = cfg.grad_clip;
  tc.val_fraction = cfg.val_fraction;
  tc.output_dir = cfg.output_dir;
  tc.resume = cfg.resume;
  return tc;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing required path: --" + what);
  if (!fs::exists(path)) throw UsageError(what + " path does not exist: " + path);
}

void resolve_output_dir(RunConfig& cfg) {
  if (cfg.output_dir.empty()) {
    if (const char* env = std::getenv("MCAVD_OUTPUT_DIR")) cfg.output_dir = env;
  }
}

void write_snapshot(const RunConfig& cfg) {
  if (cfg.output_dir.empty()) return;
  fs::create_directories(cfg.output_dir);
  std::ofstream(fs::path(cfg.output_dir) / "config.json") << config_snapshot(cfg).dump(2) << '\n';
}

void warn_history_flags(const RunConfig& cfg, const CLI::App* cmd) {
  if (mcavd::variant_uses_history(mcavd::parse_variant(cfg.variant))) return;
  // --no-caption and --include-caption alias one option, so count once
  for (const char* flag : {"--include-caption", "--max-hist-len"}) {
    if (cmd->count(flag) > 0)
      std::cerr << "warning: " << flag << " has no effect, history is ignored by variant "
                << cfg.variant << "\n";
  }
}

/// Shared data-loading for train/finetune/evaluate.
struct LoadedData {
  mcavd::DialogCorpus corpus;
  mcavd::FeatureStore features;
  std::vector<mcavd::DenseAnnotation> dense;
  bool has_dense = false;
};

LoadedData load_data(const RunConfig& cfg, bool need_image) {
  LoadedData data;
  require_file(cfg.corpus, "corpus");
  data.corpus = mcavd::load_corpus(cfg.corpus);
  if (need_image) {
    require_file(cfg.features, "features");
    data.features = mcavd::load_features(cfg.features);
  }
  if (!cfg.dense.empty()) {
    require_file(cfg.dense, "dense");
    data.dense = mcavd::load_dense(cfg.dense);
    data.has_dense = true;
  }
  return data;
}

void add_model_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--variant", cfg.variant, "model variant (mca-i, mca-h, mca-i-hconcq, "
                                            "mca-i-hguidedq, mca-i-vgh, mca-i-h)");
  cmd->add_option("--num-layers", cfg.num_layers);
  cmd->add_option("--num-heads", cfg.num_heads);
  cmd->add_option("--model-dim", cfg.model_dim);
  cmd->add_option("--ff-dim", cfg.ff_dim);
  cmd->add_option("--dropout", cfg.dropout);
  cmd->add_flag("--positional-encoding,!--no-positional-encoding", cfg.positional_encoding);
  cmd->add_option("--embed-dim", cfg.embed_dim);
  cmd->add_option("--feature-dim", cfg.feature_dim);
  cmd->add_option("--n-boxes", cfg.n_boxes);
  cmd->add_option("--n-candidates", cfg.n_candidates);
  cmd->add_option("--max-q-len", cfg.max_q_len);
  cmd->add_option("--max-hist-len", cfg.max_hist_len);
  cmd->add_flag("--include-caption,!--no-caption", cfg.include_caption);
  cmd->add_option("--min-count", cfg.min_count);
}

void add_train_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--lr", cfg.lr, "base learning rate (0 = phase default)");
  cmd->add_option("--epochs", cfg.epochs, "epoch budget (0 = phase default)");
  cmd->add_option("--batch-dialogs", cfg.batch_dialogs);
  cmd->add_option("--lr-milestones", cfg.lr_milestones);
  cmd->add_option("--lr-decay", cfg.lr_decay);
  cmd->add_option("--plateau-factor", cfg.plateau_factor);
  cmd->add_option("--plateau-patience", cfg.plateau_patience);
  cmd->add_option("--early-stop-patience", cfg.early_stop_patience);
  cmd->add_option("--min-improve", cfg.min_improve);
  cmd->add_option("--grad-clip", cfg.grad_clip);
  cmd->add_option("--val-fraction", cfg.val_fraction);
  cmd->add_flag("--resume", cfg.resume);
}

void add_path_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--corpus", cfg.corpus);
  cmd->add_option("--features", cfg.features);
  cmd->add_option("--dense", cfg.dense);
  cmd->add_option("--word-vectors", cfg.word_vectors);
  cmd->add_option("--subset", cfg.subset);
  cmd->add_option("--out,--output-dir", cfg.output_dir);
  cmd->add_option("--seed", cfg.seed);
}

int cmd_train(RunConfig& cfg, const CLI::App* cmd) {
  warn_history_flags(cfg, cmd);
  resolve_output_dir(cfg);
  const mcavd::ModelConfig mc = model_config(cfg);
  LoadedData data = load_data(cfg, mcavd::variant_uses_image(mc.variant));
  write_snapshot(cfg);

  auto vocab = mcavd::Vocabulary::build(data.corpus, cfg.min_count);
  mcavd::SplitRng rng(cfg.seed);
  mcavd::DialogModel model(mc, vocab, rng);
  if (!cfg.word_vectors.empty()) {
    require_file(cfg.word_vectors, "word-vectors");
    const int loaded = model.load_word_vectors(cfg.word_vectors);
    std::cerr << "loaded " << loaded << " pretrained word vectors\n";
  }

  auto result = mcavd::train_sparse(model, data.corpus, data.features, train_config(cfg),
                                    data.has_dense ? &data.dense : nullptr);
  std::cout << "sparse training done: best val NDCG " << result.best_val_ndcg << " at epoch "
            << result.best_epoch << "\n";
  if (!cfg.output_dir.empty())
    std::cout << "checkpoints in " << cfg.output_dir << " (ckpt_best.mcav, ckpt_last.mcav)\n";
  return kExitOk;
}

int cmd_finetune(RunConfig& cfg, const CLI::App* cmd) {
  warn_history_flags(cfg, cmd);
  resolve_output_dir(cfg);
  require_file(cfg.checkpoint, "checkpoint");
  require_file(cfg.dense, "dense");
  mcavd::DialogModel model = mcavd::load_model_checkpoint(cfg.checkpoint);
  LoadedData data = load_data(cfg, mcavd::variant_uses_image(model.config().variant));
  write_snapshot(cfg);

  auto result =
      mcavd::finetune_dense(model, data.dense, data.corpus, data.features, train_config(cfg));
  std::cout << "dense fine-tuning done: best val NDCG " << result.best_val_ndcg << " at epoch "
            << result.best_epoch << "\n";
  if (!cfg.output_dir.empty())
    std::cout << "checkpoints in " << cfg.output_dir << " (ckpt_best.mcav, ckpt_last.mcav)\n";
  return kExitOk;
}

int cmd_evaluate(RunConfig& cfg, const CLI::App* cmd) {
  resolve_output_dir(cfg);
  require_file(cfg.checkpoint, "checkpoint");
  mcavd::DialogModel model = mcavd::load_model_checkpoint(cfg.checkpoint);
  LoadedData data = load_data(cfg, mcavd::variant_uses_image(model.config().variant));

  mcavd::EvalOptions opts;
  if (cmd->count("--no-caption") > 0 || cmd->count("--include-caption") > 0)
    opts.include_caption = cfg.include_caption;

  std::vector<std::pair<int, int>> subset_rounds;
  if (!cfg.subset.empty()) {
    require_file(cfg.subset, "subset");
    auto filter = mcavd::filter_subset(data.corpus, mcavd::load_subset(cfg.subset));
    for (const auto& key : filter.unknown)
      std::cerr << "warning: subset entry not in corpus: image " << key.image_id << " round "
                << key.round_id << "\n";
    subset_rounds = filter.rounds;
    opts.subset = &subset_rounds;
  }

  const mcavd::MetricsReport report = mcavd::evaluate(
      model, data.corpus, data.features, data.has_dense ? &data.dense : nullptr, opts);
  std::cout << report.to_table();
  if (!cfg.output_dir.empty()) {
    write_snapshot(cfg);
    std::ofstream(fs::path(cfg.output_dir) / "report.json") << report.to_json() << '\n';
    std::ofstream(fs::path(cfg.output_dir) / "report.txt") << report.to_table();
  }
  return kExitOk;
}

int cmd_audit_stats(RunConfig& cfg) {
  resolve_output_dir(cfg);
  require_file(cfg.corpus, "corpus");
  require_file(cfg.dense, "dense");
  auto corpus = mcavd::load_corpus(cfg.corpus);
  auto dense = mcavd::load_dense(cfg.dense);
  auto hist = mcavd::relevance_stats(dense, corpus);
  std::cout << hist.to_table();
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / "relevance_stats.json") << hist.to_json() << '\n';
  }
  return kExitOk;
}

int cmd_audit_correct(RunConfig& cfg) {
  resolve_output_dir(cfg);
  require_file(cfg.corpus, "corpus");
  require_file(cfg.dense, "dense");
  if (cfg.output_dir.empty())
    throw UsageError("audit correct writes new files; provide --out");
  auto corpus = mcavd::load_corpus(cfg.corpus);
  auto dense = mcavd::load_dense(cfg.dense);
  auto result = mcavd::correct_gt_relevance(dense, corpus);

  fs::create_directories(cfg.output_dir);
  const auto corrected_path = fs::path(cfg.output_dir) / "dense_corrected.json";
  mcavd::save_dense(result.corrected, corrected_path.string());
  ordered_json audit = {{"modified_count", result.modified_count},
                        {"indices", result.modified_indices}};
  std::ofstream(fs::path(cfg.output_dir) / "correction_audit.json") << audit.dump(2) << '\n';
  std::cout << "corrected " << result.modified_count << " ground-truth relevance values -> "
            << corrected_path.string() << "\n";
  return kExitOk;
}

int cmd_phenomena(RunConfig& cfg, const std::string& parses_path) {
  resolve_output_dir(cfg);
  require_file(cfg.corpus, "corpus");
  auto corpus = mcavd::load_corpus(cfg.corpus);
  std::optional<std::vector<mcavd::ParseTree>> parses;
  if (!parses_path.empty()) {
    require_file(parses_path, "parses");
    parses = mcavd::load_parse_file(parses_path);
  }
  auto report = mcavd::phenomena_report(corpus, parses ? &*parses : nullptr);
  std::cout << report.to_table();
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / "phenomena.json") << report.to_json() << '\n';
  }
  return kExitOk;
}

int cmd_gen_synthetic(const mcavd::SyntheticSpec& spec, const std::string& out_dir) {
  if (out_dir.empty()) throw UsageError("gen-synthetic requires --out");
  auto data = mcavd::gen_synthetic(spec);
  fs::create_directories(out_dir);
  mcavd::save_corpus(data.corpus, (fs::path(out_dir) / "corpus.json").string());
  mcavd::write_features(data.features, (fs::path(out_dir) / "features.bin").string());
  mcavd::save_dense(data.dense, (fs::path(out_dir) / "dense.json").string());
  ordered_json snapshot = {{"n_dialogs", spec.n_dialogs},
                           {"vocab", spec.vocab},
                           {"n_candidates", spec.n_candidates},
                           {"feature_dim", spec.feature_dim},
                           {"n_boxes", spec.n_boxes},
                           {"history_dependent", spec.history_dependent},
                           {"dense_fraction", spec.dense_fraction},
                           {"seed", spec.seed}};
  std::ofstream(fs::path(out_dir) / "gen_config.json") << snapshot.dump(2) << '\n';
  std::cout << "wrote " << data.corpus.dialogs.size() << " dialogs, "
            << data.features.n_images() << " feature blocks, " << data.dense.size()
            << " dense annotations to " << out_dir << "\n";
  return kExitOk;
}

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular co-attention visual-dialog answer ranking"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path = find_config_path(argc, argv);
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config file: " + config_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
      }
      apply_config_json(cfg, j, config_path);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string config_sink; // --config is consumed in the pre-pass above
  std::string parses_path;
  mcavd::SyntheticSpec synth;
  synth.seed = cfg.seed;

  auto* train = app.add_subcommand("train", "sparse ground-truth training phase");
  train->add_option("--config", config_sink, "JSON config file; flags override its values");
  add_model_options(train, cfg);
  add_train_options(train, cfg);
  add_path_options(train, cfg);

  auto* finetune = app.add_subcommand("finetune", "dense-relevance curriculum fine-tuning");
  finetune->add_option("--config", config_sink);
  finetune->add_option("--checkpoint", cfg.checkpoint, "sparse-phase checkpoint to start from");
  add_model_options(finetune, cfg);
  add_train_options(finetune, cfg);
  add_path_options(finetune, cfg);

  auto* evaluate = app.add_subcommand("evaluate", "retrieval metrics over a corpus");
  evaluate->add_option("--config", config_sink);
  evaluate->add_option("--checkpoint", cfg.checkpoint, "model checkpoint");
  evaluate->add_flag("--include-caption,!--no-caption", cfg.include_caption,
                     "override the checkpoint's caption flag for history construction");
  add_path_options(evaluate, cfg);

  auto* audit = app.add_subcommand("audit", "dense-annotation auditing");
  audit->require_subcommand(1);
  auto* audit_stats = audit->add_subcommand("stats", "relevance histogram of the GT answers");
  audit_stats->add_option("--config", config_sink);
  add_path_options(audit_stats, cfg);
  auto* audit_correct =
      audit->add_subcommand("correct", "set every annotated GT relevance to 1.0 (new file)");
  audit_correct->add_option("--config", config_sink);
  add_path_options(audit_correct, cfg);

  auto* phenomena = app.add_subcommand("phenomena", "pronoun/pleonastic/ellipsis distributions");
  phenomena->add_option("--config", config_sink);
  phenomena->add_option("--parses", parses_path, "bracketed constituency trees, one per corpus question");
  add_path_options(phenomena, cfg);

  auto* gen = app.add_subcommand("gen-synthetic", "deterministic synthetic corpus generator");
  gen->add_option("--n-dialogs", synth.n_dialogs);
  gen->add_option("--vocab", synth.vocab);
  gen->add_option("--n-candidates", synth.n_candidates);
  gen->add_option("--feature-dim", synth.feature_dim);
  gen->add_option("--n-boxes", synth.n_boxes);
  gen->add_flag("--history-dependent,!--history-independent", synth.history_dependent);
  gen->add_option("--dense-fraction", synth.dense_fraction);
  gen->add_option("--seed", synth.seed);
  std::string gen_out;
  gen->add_option("--out,--output-dir", gen_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(cfg, train);
    if (finetune->parsed()) return cmd_finetune(cfg, finetune);
    if (evaluate->parsed()) return cmd_evaluate(cfg, evaluate);
    if (audit_stats->parsed()) return cmd_audit_stats(cfg);
    if (audit_correct->parsed()) return cmd_audit_correct(cfg);
    if (phenomena->parsed()) return cmd_phenomena(cfg, parses_path);
    if (gen->parsed()) return cmd_gen_synthetic(synth, gen_out);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mcavd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
