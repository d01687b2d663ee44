// SPDX-License-Identifier: Apache-2.0

#include "mcavd/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace mcavd {

const std::string& phase_name(Phase phase) {
  static const std::string sparse = "sparse", dense = "dense";
  return phase == Phase::Sparse ? sparse : dense;
}

double lr_at(int epoch, Phase phase, const TrainConfig& cfg, int plateau_reductions) {
  if (epoch < 0) throw ValueError("lr_at: negative epoch");
  double lr = cfg.base_lr(phase);
  if (phase == Phase::Sparse) {
    for (int milestone : cfg.lr_milestones)
      if (epoch >= milestone) lr *= cfg.lr_decay;
  } else {
    for (int i = 0; i < plateau_reductions; ++i) lr *= cfg.plateau_factor;
  }
  return lr;
}

AdamState::AdamState(const ParamRegistry<float>& params) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, p] : params.entries()) {
    m_.emplace_back(p.value().size(), 0.0f);
    v_.emplace_back(p.value().size(), 0.0f);
  }
}

void AdamState::step(ParamRegistry<float>& params, double lr) {
  if (m_.size() != params.size())
    throw ShapeError("adam state tracks " + std::to_string(m_.size()) + " parameters, registry has " +
                     std::to_string(params.size()));
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  size_t idx = 0;
  for (const auto& [name, p] : params.entries()) {
    auto& values = p.value();
    const auto& grads = p.grad();
    auto& m = m_[idx];
    auto& v = v_[idx];
    if (m.size() != values.size())
      throw ShapeError("adam moment shape mismatch for parameter " + name);
    for (size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * g);
      v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * g * g);
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= static_cast<float>(lr * m_hat / (std::sqrt(v_hat) + eps));
    }
    ++idx;
  }
}

OptimizerBlocks AdamState::to_blocks(const ParamRegistry<float>& params) const {
  OptimizerBlocks blocks;
  blocks.step = step_;
  size_t idx = 0;
  for (const auto& [name, p] : params.entries()) {
    blocks.first_moment.push_back(NamedBlock{name, p.shape(), m_[idx]});
    blocks.second_moment.push_back(NamedBlock{name, p.shape(), v_[idx]});
    ++idx;
  }
  return blocks;
}

AdamState AdamState::from_blocks(const ParamRegistry<float>& params,
                                 const OptimizerBlocks& blocks) {
  AdamState state(params);
  state.step_ = blocks.step;
  auto fill = [&](std::vector<std::vector<float>>& dst, const std::vector<NamedBlock>& src) {
    size_t idx = 0;
    for (const auto& [name, p] : params.entries()) {
      auto it = std::find_if(src.begin(), src.end(),
                             [&](const NamedBlock& b) { return b.name == name; });
      if (it == src.end() || it->data.size() != p.value().size())
        throw FormatError("optimizer block missing or misshaped for parameter " + name);
      dst[idx] = it->data;
      ++idx;
    }
  };
  fill(state.m_, blocks.first_moment);
  fill(state.v_, blocks.second_moment);
  return state;
}

double clip_global_norm(ParamRegistry<float>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params.entries())
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float scale_by = static_cast<float>(max_norm / norm);
    for (const auto& [name, p] : params.entries())
      for (float& g : p.grad()) g *= scale_by;
  }
  return norm;
}

bool is_validation_dialog(int64_t image_id, double val_fraction) {
  uint64_t h = 0xcbf29ce484222325ull;
  const auto u = static_cast<uint64_t>(image_id);
  for (int i = 0; i < 8; ++i) {
    h ^= (u >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return static_cast<double>(h % 10000) < val_fraction * 10000.0;
}

namespace {

struct ParamSnapshot {
  std::vector<std::vector<float>> values;

  static ParamSnapshot take(const ParamRegistry<float>& params) {
    ParamSnapshot s;
    s.values.reserve(params.size());
    for (const auto& [name, p] : params.entries()) s.values.push_back(p.value());
    return s;
  }

  void restore(ParamRegistry<float>& params) const {
    size_t idx = 0;
    for (const auto& [name, p] : params.entries()) p.value() = values[idx++];
  }
};

struct TrainLoop {
  DialogModel& model;
  const DialogCorpus& corpus;
  const FeatureStore& features;
  const std::vector<DenseAnnotation>* dense;
  TrainConfig cfg;
  Phase phase;

  TrainResult run() {
    std::vector<int> train_dialogs, val_dialogs;
    for (int d = 0; d < static_cast<int>(corpus.dialogs.size()); ++d) {
      if (is_validation_dialog(corpus.dialogs[static_cast<size_t>(d)].image_id, cfg.val_fraction))
        val_dialogs.push_back(d);
      else
        train_dialogs.push_back(d);
    }
    if (train_dialogs.empty()) train_dialogs = val_dialogs; // tiny corpora: no split
    if (val_dialogs.empty()) val_dialogs = train_dialogs;    // tiny corpora: track on train

    std::optional<DenseIndex> dense_index;
    if (dense != nullptr) dense_index.emplace(*dense);

    // only annotated rounds participate in the dense phase
    std::vector<std::pair<int, int>> train_rounds;
    for (int d : train_dialogs)
      for (int r = 0; r < kRoundsPerDialog; ++r) {
        if (phase == Phase::Dense) {
          if (!dense_index ||
              !dense_index->find(corpus.dialogs[static_cast<size_t>(d)].image_id, r + 1))
            continue;
        }
        train_rounds.emplace_back(d, r);
      }
    if (train_rounds.empty())
      throw ValueError(phase == Phase::Dense ? "finetune_dense: no annotated rounds in the corpus"
                                             : "train_sparse: corpus has no rounds");

    std::vector<std::pair<int, int>> val_rounds;
    for (int d : val_dialogs)
      for (int r = 0; r < kRoundsPerDialog; ++r) val_rounds.emplace_back(d, r);

    const SplitRng root(cfg.seed);
    const int total_epochs = cfg.phase_epochs(phase);

    TrainResult result;
    AdamState adam(model.params());
    ParamSnapshot best = ParamSnapshot::take(model.params());
    int start_epoch = 0;
    int plateau_reductions = 0;
    int since_improve = 0;

    std::ofstream log_file;
    const std::filesystem::path out_dir = cfg.output_dir;
    if (!cfg.output_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      if (cfg.resume) start_epoch = try_resume(adam, best, result, plateau_reductions);
      log_file.open(out_dir / "log.jsonl", start_epoch > 0 ? std::ios::app : std::ios::out);
    }

    for (int epoch = start_epoch; epoch < total_epochs; ++epoch) {
      const double lr = lr_at(epoch, phase, cfg, plateau_reductions);
      const double mean_loss = run_epoch(epoch, lr, train_rounds, root, adam, dense_index);

      EvalOptions eval_opts;
      eval_opts.subset = &val_rounds;
      eval_opts.impute_gt_relevance = true;
      const MetricsReport val = evaluate(model, corpus, features, dense, eval_opts);
      const double tracked = val.ndcg;

      result.records.push_back(EpochRecord{epoch, phase, mean_loss, tracked, lr});
      if (log_file.is_open()) {
        nlohmann::ordered_json line = {{"epoch", epoch},
                                       {"phase", phase_name(phase)},
                                       {"loss", mean_loss},
                                       {"val_ndcg", tracked},
                                       {"lr", lr}};
        log_file << line.dump() << '\n' << std::flush;
      }

      if (tracked > result.best_val_ndcg + cfg.min_improve || result.best_epoch < 0) {
        result.best_val_ndcg = tracked;
        result.best_epoch = epoch;
        best = ParamSnapshot::take(model.params());
        since_improve = 0;
      } else {
        ++since_improve;
        if (phase == Phase::Dense && since_improve > 0 && since_improve % cfg.plateau_patience == 0)
          ++plateau_reductions;
      }

      if (!cfg.output_dir.empty())
        save_state(epoch, adam, best, result, plateau_reductions);

      if (cfg.early_stop_patience > 0 && since_improve >= cfg.early_stop_patience) break;
    }

    best.restore(model.params());
    if (!cfg.output_dir.empty())
      save_model_checkpoint(model, (out_dir / "ckpt_best.mcav").string(), nullptr,
                            static_cast<uint32_t>(std::max(result.best_epoch, 0)),
                            result.best_val_ndcg);
    return result;
  }

  double run_epoch(int epoch, double lr, const std::vector<std::pair<int, int>>& rounds,
                   const SplitRng& root, AdamState& adam,
                   const std::optional<DenseIndex>& dense_index) {
    // per-epoch derived streams make interrupted runs resumable bit-for-bit
    SplitRng order_rng = root.split("order:" + std::to_string(epoch));
    SplitRng dropout_rng = root.split("dropout:" + std::to_string(epoch));
    RunState rs;
    rs.training = true;
    rs.dropout_rng = &dropout_rng;

    // batch = all rounds of a group of dialogs
    std::vector<int> dialog_order;
    for (const auto& [d, r] : rounds)
      if (dialog_order.empty() || dialog_order.back() != d) dialog_order.push_back(d);
    std::sort(dialog_order.begin(), dialog_order.end());
    dialog_order.erase(std::unique(dialog_order.begin(), dialog_order.end()), dialog_order.end());
    order_rng.shuffle(dialog_order.begin(), dialog_order.end());

    std::unordered_map<int, std::vector<int>> rounds_of;
    for (const auto& [d, r] : rounds) rounds_of[d].push_back(r);

    auto& tape = Tape<float>::active();
    double loss_total = 0.0;
    int64_t loss_count = 0;

    const int batch_dialogs = std::max(1, cfg.batch_dialogs);
    for (size_t start = 0; start < dialog_order.size(); start += static_cast<size_t>(batch_dialogs)) {
      const size_t end = std::min(dialog_order.size(), start + static_cast<size_t>(batch_dialogs));
      int batch_rounds = 0;
      for (size_t i = start; i < end; ++i)
        batch_rounds += static_cast<int>(rounds_of[dialog_order[i]].size());
      if (batch_rounds == 0) continue;

      model.params().zero_grad();
      for (size_t i = start; i < end; ++i) {
        const int d = dialog_order[i];
        for (int r : rounds_of[d]) {
          RoundBatch batch = make_round_batch(corpus, d, r, model.vocab(), features,
                                              model.config(), dense_index ? &*dense_index : nullptr);
          FTensor probs = model.forward(batch, rs);
          FTensor loss;
          if (phase == Phase::Dense) {
            if (!batch.relevance.has_value())
              throw ValueError("dense phase reached an unannotated round");
            loss = loss_dense(probs, *batch.relevance);
          } else {
            loss = loss_sparse(probs, batch.gt_index);
          }
          const double loss_value = loss.item();
          if (std::isnan(loss_value))
            throw Error("training diverged: loss is NaN at epoch " + std::to_string(epoch));
          loss_total += loss_value;
          ++loss_count;
          backward(scale(loss, 1.0f / static_cast<float>(batch_rounds)));
          tape.clear();
        }
      }
      clip_global_norm(model.params(), cfg.grad_clip);
      adam.step(model.params(), lr);
    }
    return loss_count > 0 ? loss_total / static_cast<double>(loss_count) : 0.0;
  }

  void save_state(int epoch, const AdamState& adam, const ParamSnapshot& best,
                  const TrainResult& result, int plateau_reductions) {
    const std::filesystem::path out_dir = cfg.output_dir;
    save_model_checkpoint(model, (out_dir / "ckpt_last.mcav").string(), &adam,
                          static_cast<uint32_t>(epoch + 1), result.best_val_ndcg);
    // best parameters snapshot, resumable alongside the live state
    ParamSnapshot current = ParamSnapshot::take(model.params());
    best.restore(model.params());
    save_model_checkpoint(model, (out_dir / "ckpt_best.mcav").string(), nullptr,
                          static_cast<uint32_t>(std::max(result.best_epoch, 0)),
                          result.best_val_ndcg);
    current.restore(model.params());
    nlohmann::ordered_json meta = {{"phase", phase_name(phase)},
                                   {"next_epoch", epoch + 1},
                                   {"best_epoch", result.best_epoch},
                                   {"best_val_ndcg", result.best_val_ndcg},
                                   {"plateau_reductions", plateau_reductions}};
    std::ofstream(out_dir / "train_state.json") << meta.dump(2) << '\n';
  }

  int try_resume(AdamState& adam, ParamSnapshot& best, TrainResult& result,
                 int& plateau_reductions) {
    const std::filesystem::path out_dir = cfg.output_dir;
    const auto last = out_dir / "ckpt_last.mcav";
    const auto best_path = out_dir / "ckpt_best.mcav";
    const auto state_path = out_dir / "train_state.json";
    if (!std::filesystem::exists(last) || !std::filesystem::exists(state_path)) return 0;

    CheckpointFile raw;
    DialogModel restored = load_model_checkpoint(last.string(), &raw);
    if (restored.config_json() != model.config_json())
      throw FormatError("resume checkpoint was produced by a different model configuration");
    size_t idx = 0;
    for (const auto& [name, p] : model.params().entries()) {
      p.value() = restored.params().entries()[idx].second.value();
      ++idx;
    }
    if (raw.optimizer.has_value()) adam = AdamState::from_blocks(model.params(), *raw.optimizer);

    nlohmann::json meta;
    std::ifstream in(state_path);
    in >> meta;
    result.best_epoch = meta.at("best_epoch").get<int>();
    result.best_val_ndcg = meta.at("best_val_ndcg").get<double>();
    plateau_reductions = meta.at("plateau_reductions").get<int>();
    if (std::filesystem::exists(best_path)) {
      DialogModel best_model = load_model_checkpoint(best_path.string());
      ParamSnapshot snap;
      for (const auto& [name, p] : best_model.params().entries()) snap.values.push_back(p.value());
      best = snap;
    }
    return meta.at("next_epoch").get<int>();
  }
};

} // namespace

TrainResult train_sparse(DialogModel& model, const DialogCorpus& corpus,
                         const FeatureStore& features, const TrainConfig& cfg,
                         const std::vector<DenseAnnotation>* dense) {
  TrainLoop loop{model, corpus, features, dense, cfg, Phase::Sparse};
  return loop.run();
}

TrainResult finetune_dense(DialogModel& model, const std::vector<DenseAnnotation>& dense,
                           const DialogCorpus& corpus, const FeatureStore& features,
                           const TrainConfig& cfg) {
  if (dense.empty()) throw ValueError("finetune_dense: empty dense annotation set");
  TrainLoop loop{model, corpus, features, &dense, cfg, Phase::Dense};
  return loop.run();
}

} // namespace mcavd
