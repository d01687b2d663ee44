// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcavd/error.hpp"
#include "mcavd/rng.hpp"

namespace mcavd {

inline constexpr int kRoundsPerDialog = 10;
inline constexpr int kMaxQuestionLen = 20;
inline constexpr int kMaxHistoryLen = 200;

struct DialogRound {
  int question = -1; // index into DialogCorpus::questions
  int answer = -1;   // index into DialogCorpus::answers
  std::vector<int> answer_options;
  int gt_index = -1;

  bool operator==(const DialogRound&) const = default;
};

struct Dialog {
  int64_t image_id = 0;
  std::string caption;
  std::vector<DialogRound> rounds;

  bool operator==(const Dialog&) const = default;
};

/// VisDial v1.0-style corpus: question/answer string pools plus dialogs of
/// ten rounds, each with an N-way candidate list containing the ground truth.
struct DialogCorpus {
  std::vector<std::string> questions;
  std::vector<std::string> answers;
  std::vector<Dialog> dialogs;

  int n_options() const {
    return dialogs.empty() || dialogs[0].rounds.empty()
               ? 0
               : static_cast<int>(dialogs[0].rounds[0].answer_options.size());
  }
  int64_t round_count() const { return static_cast<int64_t>(dialogs.size()) * kRoundsPerDialog; }
  void validate() const;

  bool operator==(const DialogCorpus&) const = default;
};

DialogCorpus load_corpus(const std::string& path);
void save_corpus(const DialogCorpus& corpus, const std::string& path);

/// Per-(image, round) relevance over the candidate list; round_id is 1-based.
struct DenseAnnotation {
  int64_t image_id = 0;
  int round_id = 0;
  std::vector<float> relevance;

  bool operator==(const DenseAnnotation&) const = default;
};

std::vector<DenseAnnotation> load_dense(const std::string& path);
void save_dense(const std::vector<DenseAnnotation>& dense, const std::string& path);

/// Lookup from (image_id, round_id) to the annotation index.
class DenseIndex {
public:
  explicit DenseIndex(const std::vector<DenseAnnotation>& dense);
  const DenseAnnotation* find(int64_t image_id, int round_id) const;

private:
  std::unordered_map<int64_t, std::unordered_map<int, size_t>> by_image_;
  const std::vector<DenseAnnotation>* dense_;
};

/// Fixed-geometry bag of per-image region features.
class FeatureStore {
public:
  FeatureStore() = default;
  FeatureStore(int n_boxes, int dim) : n_boxes_(n_boxes), dim_(dim) {}

  void add(int64_t image_id, std::vector<float> features);
  const std::vector<float>& features(int64_t image_id) const;
  bool has(int64_t image_id) const { return index_.count(image_id) != 0; }

  int n_images() const { return static_cast<int>(order_.size()); }
  int n_boxes() const { return n_boxes_; }
  int dim() const { return dim_; }
  const std::vector<int64_t>& image_ids() const { return order_; }

private:
  int n_boxes_ = 0;
  int dim_ = 0;
  std::vector<int64_t> order_;
  std::unordered_map<int64_t, std::vector<float>> index_;
};

FeatureStore load_features(const std::string& path);
void write_features(const FeatureStore& store, const std::string& path);

/// Lowercases and splits on whitespace and punctuation; punctuation marks
/// are kept as single-character tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Token-to-id map with reserved ids 0 (PAD) and 1 (UNK).
class Vocabulary {
public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();
  static Vocabulary build(const DialogCorpus& corpus, int min_count = 1);

  int add(const std::string& token);
  int id(const std::string& token) const; // UNK for unseen tokens
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::unordered_map<std::string, int>& token_ids() const { return ids_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

/// History for round t (1-based): optional caption plus the first t-1
/// question/answer pairs, tokenized, truncated to the most recent max_len
/// tokens.
std::vector<std::string> build_history(const DialogCorpus& corpus, const Dialog& dialog, int t,
                                       bool include_caption, int max_len = kMaxHistoryLen);

struct SubsetKey {
  int64_t image_id = 0;
  int round_id = 0; // 1-based

  bool operator==(const SubsetKey&) const = default;
};

std::vector<SubsetKey> load_subset(const std::string& path);

/// Evaluation-round selection: (dialog index, 0-based round index) pairs in
/// corpus order, de-duplicated, plus the keys that matched nothing.
struct SubsetFilter {
  std::vector<std::pair<int, int>> rounds;
  std::vector<SubsetKey> unknown;
};

SubsetFilter filter_subset(const DialogCorpus& corpus, const std::vector<SubsetKey>& keys);

/// Synthetic corpus generator. Every answer is "a <marker> by a <marker>"
/// over a closed marker pool; each candidate list carries a few generic
/// hedge answers that are never the ground truth. In history-dependent mode
/// the question is uninformative and the current round's marker is planted
/// in the previous round's answer (round 1: in the caption), so the answer
/// is at chance without history. Otherwise the marker appears in the
/// question itself. Dense annotations mark the generic candidates of
/// selected rounds as partially relevant.
struct SyntheticSpec {
  int n_dialogs = 10;
  int vocab = 100; // approximate vocabulary size; bounds the marker pool
  int n_candidates = 20;
  int feature_dim = 64;
  int n_boxes = 36;
  bool history_dependent = false;
  double dense_fraction = 0.25;
  uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  DialogCorpus corpus;
  FeatureStore features;
  std::vector<DenseAnnotation> dense;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

} // namespace mcavd
