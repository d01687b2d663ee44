// SPDX-License-Identifier: Apache-2.0

#include "mcavd/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "io_util.hpp"

namespace mcavd {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path);
  out << j.dump() << '\n';
}

} // namespace

void DialogCorpus::validate() const {
  const int n_questions = static_cast<int>(questions.size());
  const int n_answers = static_cast<int>(answers.size());
  int expected_options = -1;
  for (size_t d = 0; d < dialogs.size(); ++d) {
    const auto& dialog = dialogs[d];
    const std::string where = "dialog " + std::to_string(d);
    if (static_cast<int>(dialog.rounds.size()) != kRoundsPerDialog)
      throw SchemaError(where + ": expected " + std::to_string(kRoundsPerDialog) +
                        " rounds, got " + std::to_string(dialog.rounds.size()));
    for (size_t r = 0; r < dialog.rounds.size(); ++r) {
      const auto& round = dialog.rounds[r];
      const std::string at = where + " round " + std::to_string(r + 1);
      if (round.question < 0 || round.question >= n_questions)
        throw SchemaError(at + ": field 'question' index " + std::to_string(round.question) +
                          " outside question pool");
      if (round.answer < 0 || round.answer >= n_answers)
        throw SchemaError(at + ": field 'answer' index " + std::to_string(round.answer) +
                          " outside answer pool");
      if (expected_options < 0) expected_options = static_cast<int>(round.answer_options.size());
      if (static_cast<int>(round.answer_options.size()) != expected_options)
        throw SchemaError(at + ": field 'answer_options' has " +
                          std::to_string(round.answer_options.size()) + " entries, expected " +
                          std::to_string(expected_options));
      for (int opt : round.answer_options)
        if (opt < 0 || opt >= n_answers)
          throw SchemaError(at + ": field 'answer_options' index " + std::to_string(opt) +
                            " outside answer pool");
      if (round.gt_index < 0 || round.gt_index >= expected_options)
        throw SchemaError(at + ": field 'gt_index' " + std::to_string(round.gt_index) +
                          " outside option list");
      if (round.answer_options[static_cast<size_t>(round.gt_index)] != round.answer)
        throw SchemaError(at + ": field 'gt_index' does not point at the ground-truth answer");
    }
  }
}

DialogCorpus load_corpus(const std::string& path) {
  json j = load_json_file(path);
  DialogCorpus corpus;
  try {
    const json& data = j.at("data");
    corpus.questions = data.at("questions").get<std::vector<std::string>>();
    corpus.answers = data.at("answers").get<std::vector<std::string>>();
    for (const json& jd : data.at("dialogs")) {
      Dialog dialog;
      dialog.image_id = jd.at("image_id").get<int64_t>();
      dialog.caption = jd.at("caption").get<std::string>();
      for (const json& jr : jd.at("dialog")) {
        DialogRound round;
        round.question = jr.at("question").get<int>();
        round.answer = jr.at("answer").get<int>();
        round.answer_options = jr.at("answer_options").get<std::vector<int>>();
        round.gt_index = jr.at("gt_index").get<int>();
        dialog.rounds.push_back(std::move(round));
      }
      corpus.dialogs.push_back(std::move(dialog));
    }
  } catch (const json::exception& e) {
    throw SchemaError("corpus schema violation in " + path + ": " + e.what());
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const DialogCorpus& corpus, const std::string& path) {
  ordered_json dialogs = ordered_json::array();
  for (const auto& dialog : corpus.dialogs) {
    ordered_json rounds = ordered_json::array();
    for (const auto& round : dialog.rounds) {
      rounds.push_back({{"question", round.question},
                        {"answer", round.answer},
                        {"answer_options", round.answer_options},
                        {"gt_index", round.gt_index}});
    }
    dialogs.push_back({{"image_id", dialog.image_id},
                       {"caption", dialog.caption},
                       {"dialog", std::move(rounds)}});
  }
  ordered_json j = {{"data",
                     {{"questions", corpus.questions},
                      {"answers", corpus.answers},
                      {"dialogs", std::move(dialogs)}}}};
  write_json_file(j, path);
}

std::vector<DenseAnnotation> load_dense(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_array()) throw SchemaError("dense annotation file must be a JSON list: " + path);
  std::vector<DenseAnnotation> dense;
  for (size_t i = 0; i < j.size(); ++i) {
    try {
      DenseAnnotation a;
      a.image_id = j[i].at("image_id").get<int64_t>();
      a.round_id = j[i].at("round_id").get<int>();
      a.relevance = j[i].at("gt_relevance").get<std::vector<float>>();
      if (a.round_id < 1 || a.round_id > kRoundsPerDialog)
        throw SchemaError("entry " + std::to_string(i) + ": round_id " +
                          std::to_string(a.round_id) + " outside [1, 10]");
      for (float r : a.relevance)
        if (!(r >= 0.0f && r <= 1.0f))
          throw SchemaError("entry " + std::to_string(i) + ": relevance value " +
                            std::to_string(r) + " outside [0, 1]");
      dense.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw SchemaError("dense annotation schema violation in " + path + " entry " +
                        std::to_string(i) + ": " + e.what());
    }
  }
  return dense;
}

void save_dense(const std::vector<DenseAnnotation>& dense, const std::string& path) {
  ordered_json j = ordered_json::array();
  for (const auto& a : dense)
    j.push_back(
        {{"image_id", a.image_id}, {"round_id", a.round_id}, {"gt_relevance", a.relevance}});
  write_json_file(j, path);
}

DenseIndex::DenseIndex(const std::vector<DenseAnnotation>& dense) : dense_(&dense) {
  for (size_t i = 0; i < dense.size(); ++i) by_image_[dense[i].image_id][dense[i].round_id] = i;
}

const DenseAnnotation* DenseIndex::find(int64_t image_id, int round_id) const {
  auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return nullptr;
  auto rt = it->second.find(round_id);
  return rt == it->second.end() ? nullptr : &(*dense_)[rt->second];
}

void FeatureStore::add(int64_t image_id, std::vector<float> features) {
  if (static_cast<int64_t>(features.size()) != static_cast<int64_t>(n_boxes_) * dim_)
    throw ShapeError("feature block for image " + std::to_string(image_id) + " has " +
                     std::to_string(features.size()) + " values, expected " +
                     std::to_string(static_cast<int64_t>(n_boxes_) * dim_));
  if (!index_.emplace(image_id, std::move(features)).second)
    throw ValueError("duplicate image id in feature store: " + std::to_string(image_id));
  order_.push_back(image_id);
}

const std::vector<float>& FeatureStore::features(int64_t image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end())
    throw ValueError("image id " + std::to_string(image_id) + " not in feature store");
  return it->second;
}

namespace {

using namespace ioutil;

constexpr char kFeatureMagic[4] = {'V', 'D', 'F', 'B'};
constexpr uint32_t kFeatureVersion = 1;

} // namespace

void write_features(const FeatureStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write feature file: " + path);
  out.write(kFeatureMagic, 4);
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<uint32_t>(store.n_images()));
  put_u32(out, static_cast<uint32_t>(store.n_boxes()));
  put_u32(out, static_cast<uint32_t>(store.dim()));
  for (int64_t id : store.image_ids()) {
    put_i64(out, id);
    const auto& f = store.features(id);
    put_f32(out, f.data(), f.size());
  }
  if (!out) throw FormatError("short write to feature file: " + path);
}

FeatureStore load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open feature file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw FormatError("bad magic in feature file: " + path);
  const uint32_t version = get_u32(in, "version");
  if (version != kFeatureVersion)
    throw FormatError("unsupported feature file version " + std::to_string(version));
  const uint32_t n_images = get_u32(in, "image count");
  const uint32_t n_boxes = get_u32(in, "box count");
  const uint32_t dim = get_u32(in, "feature dim");
  FeatureStore store(static_cast<int>(n_boxes), static_cast<int>(dim));
  for (uint32_t i = 0; i < n_images; ++i) {
    const int64_t id = get_i64(in, "image id");
    std::vector<float> block(static_cast<size_t>(n_boxes) * dim);
    get_f32(in, block.data(), block.size(), "feature block");
    for (float v : block)
      if (!std::isfinite(v))
        throw FormatError("non-finite feature value for image " + std::to_string(id));
    store.add(id, std::move(block));
  }
  return store;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  ids_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw ValueError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocabulary Vocabulary::build(const DialogCorpus& corpus, int min_count) {
  std::unordered_map<std::string, int64_t> counts;
  auto count_text = [&](const std::string& text) {
    for (auto& token : tokenize(text)) ++counts[token];
  };
  for (const auto& q : corpus.questions) count_text(q);
  for (const auto& a : corpus.answers) count_text(a);
  for (const auto& d : corpus.dialogs) count_text(d.caption);

  Vocabulary vocab;
  auto admit_text = [&](const std::string& text) {
    for (auto& token : tokenize(text))
      if (counts[token] >= min_count) vocab.add(token);
  };
  // first-encounter order keeps ids deterministic
  for (const auto& q : corpus.questions) admit_text(q);
  for (const auto& a : corpus.answers) admit_text(a);
  for (const auto& d : corpus.dialogs) admit_text(d.caption);
  return vocab;
}

std::vector<std::string> build_history(const DialogCorpus& corpus, const Dialog& dialog, int t,
                                       bool include_caption, int max_len) {
  if (t < 1 || t > kRoundsPerDialog)
    throw ValueError("history round " + std::to_string(t) + " outside [1, 10]");
  std::vector<std::string> tokens;
  auto append = [&](const std::string& text) {
    for (auto& tok : tokenize(text)) tokens.push_back(std::move(tok));
  };
  if (include_caption) append(dialog.caption);
  for (int r = 0; r + 1 < t; ++r) {
    append(corpus.questions[static_cast<size_t>(dialog.rounds[static_cast<size_t>(r)].question)]);
    append(corpus.answers[static_cast<size_t>(dialog.rounds[static_cast<size_t>(r)].answer)]);
  }
  if (static_cast<int>(tokens.size()) > max_len)
    tokens.erase(tokens.begin(), tokens.end() - max_len); // keep the most recent turns
  return tokens;
}

std::vector<SubsetKey> load_subset(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_array()) throw SchemaError("subset file must be a JSON list: " + path);
  std::vector<SubsetKey> keys;
  for (size_t i = 0; i < j.size(); ++i) {
    try {
      keys.push_back(SubsetKey{j[i].at("image_id").get<int64_t>(), j[i].at("round_id").get<int>()});
    } catch (const json::exception& e) {
      throw SchemaError("subset schema violation in " + path + " entry " + std::to_string(i) +
                        ": " + e.what());
    }
  }
  return keys;
}

SubsetFilter filter_subset(const DialogCorpus& corpus, const std::vector<SubsetKey>& keys) {
  std::unordered_map<int64_t, int> dialog_of;
  for (size_t d = 0; d < corpus.dialogs.size(); ++d)
    dialog_of[corpus.dialogs[d].image_id] = static_cast<int>(d);

  SubsetFilter result;
  std::set<std::pair<int, int>> seen;
  for (const auto& key : keys) {
    auto it = dialog_of.find(key.image_id);
    if (it == dialog_of.end() || key.round_id < 1 || key.round_id > kRoundsPerDialog) {
      result.unknown.push_back(key);
      continue;
    }
    seen.emplace(it->second, key.round_id - 1);
  }
  result.rounds.assign(seen.begin(), seen.end());
  return result;
}

void SyntheticSpec::validate() const {
  if (n_dialogs < 1) throw ValueError("gen_synthetic: n_dialogs must be >= 1");
  if (n_candidates < 6) throw ValueError("gen_synthetic: n_candidates must be >= 6");
  if (feature_dim < 1 || n_boxes < 1) throw ValueError("gen_synthetic: feature geometry invalid");
  if (vocab < 48) throw ValueError("gen_synthetic: vocab must be >= 48");
  if (dense_fraction < 0.0 || dense_fraction > 1.0)
    throw ValueError("gen_synthetic: dense_fraction outside [0, 1]");
}

namespace {

const std::vector<std::string> kGenericAnswers = {
    "can not tell",  "hard to say",  "maybe so",     "not sure",
    "i think so",    "hard to tell", "can not say",  "maybe yes",
};

const std::vector<std::string> kQuestionTemplates = {
    "What now?",
    "And next?",
    "What else?",
    "See anything?",
};

constexpr int kGenericsPerRound = 3;

} // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int markers_available = std::max(16, spec.vocab - 28);
  const int n_rounds = kRoundsPerDialog;
  const int n_markers_per_dialog = n_rounds + 1;

  SplitRng root(spec.seed);
  SplitRng rng_text = root.split("text");
  SplitRng rng_feat = root.split("features");
  SplitRng rng_dense = root.split("dense");

  SyntheticData out;
  out.features = FeatureStore(spec.n_boxes, spec.feature_dim);

  std::unordered_map<std::string, int> question_ids, answer_ids;
  auto intern = [](std::unordered_map<std::string, int>& ids, std::vector<std::string>& pool,
                   const std::string& text) {
    auto it = ids.find(text);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(pool.size());
    ids.emplace(text, id);
    pool.push_back(text);
    return id;
  };

  auto marker = [](int k) { return "obj" + std::to_string(k); };

  for (int d = 0; d < spec.n_dialogs; ++d) {
    Dialog dialog;
    dialog.image_id = 10000 + d;

    // distinct markers for this dialog; one per round plus the final plant
    std::vector<int> all_markers(static_cast<size_t>(markers_available));
    for (int i = 0; i < markers_available; ++i) all_markers[static_cast<size_t>(i)] = i;
    rng_text.shuffle(all_markers.begin(), all_markers.end());
    std::vector<int> dialog_markers(all_markers.begin(),
                                    all_markers.begin() + n_markers_per_dialog);
    std::vector<int> outside_markers(all_markers.begin() + n_markers_per_dialog,
                                     all_markers.end());

    dialog.caption = "A photo of " + marker(dialog_markers[0]) + ".";

    for (int t = 0; t < n_rounds; ++t) {
      DialogRound round;
      const std::string m_now = marker(dialog_markers[static_cast<size_t>(t)]);
      const std::string m_next = marker(dialog_markers[static_cast<size_t>(t) + 1]);

      const std::string question =
          spec.history_dependent
              ? kQuestionTemplates[static_cast<size_t>(
                    rng_text.uniform_int(0, static_cast<int>(kQuestionTemplates.size()) - 1))]
              : "What about " + m_now + "?";
      round.question = intern(question_ids, out.corpus.questions, question);

      const std::string answer = m_now + " " + m_next;
      round.answer = intern(answer_ids, out.corpus.answers, answer);

      // generic hedges: identifiable, never the ground truth
      std::vector<int> generic_pick(kGenericAnswers.size());
      for (size_t i = 0; i < generic_pick.size(); ++i) generic_pick[i] = static_cast<int>(i);
      rng_text.shuffle(generic_pick.begin(), generic_pick.end());

      std::vector<int> options;
      options.reserve(static_cast<size_t>(spec.n_candidates));
      for (int g = 0; g < kGenericsPerRound; ++g)
        options.push_back(intern(answer_ids, out.corpus.answers,
                                 kGenericAnswers[static_cast<size_t>(generic_pick[static_cast<size_t>(g)])]));
      while (static_cast<int>(options.size()) < spec.n_candidates - 1) {
        const int xi = rng_text.uniform_int(0, static_cast<int>(outside_markers.size()) - 1);
        int yi = rng_text.uniform_int(0, static_cast<int>(outside_markers.size()) - 1);
        if (yi == xi) yi = (yi + 1) % static_cast<int>(outside_markers.size());
        const std::string distractor = marker(outside_markers[static_cast<size_t>(xi)]) + " " +
                                       marker(outside_markers[static_cast<size_t>(yi)]);
        options.push_back(intern(answer_ids, out.corpus.answers, distractor));
      }
      round.gt_index = rng_text.uniform_int(0, spec.n_candidates - 1);
      options.insert(options.begin() + round.gt_index, round.answer);
      round.answer_options = std::move(options);
      dialog.rounds.push_back(std::move(round));
    }

    // dense annotations: generic candidates of selected rounds are partially
    // relevant, the ground truth fully
    for (int t = 0; t < n_rounds; ++t) {
      if (rng_dense.uniform() >= spec.dense_fraction) continue;
      const auto& round = dialog.rounds[static_cast<size_t>(t)];
      DenseAnnotation ann;
      ann.image_id = dialog.image_id;
      ann.round_id = t + 1;
      ann.relevance.assign(static_cast<size_t>(spec.n_candidates), 0.0f);
      ann.relevance[static_cast<size_t>(round.gt_index)] = 1.0f;
      static const float kLevels[4] = {0.8f, 0.6f, 0.4f, 0.2f};
      for (int i = 0; i < spec.n_candidates; ++i) {
        if (i == round.gt_index) continue;
        const std::string& text = out.corpus.answers[static_cast<size_t>(
            round.answer_options[static_cast<size_t>(i)])];
        const bool generic =
            std::find(kGenericAnswers.begin(), kGenericAnswers.end(), text) != kGenericAnswers.end();
        if (generic)
          ann.relevance[static_cast<size_t>(i)] = kLevels[rng_dense.uniform_int(0, 3)];
      }
      out.dense.push_back(std::move(ann));
    }

    // region features are pure noise: the image never determines the answer
    std::vector<float> block(static_cast<size_t>(spec.n_boxes) * spec.feature_dim);
    for (auto& v : block) v = static_cast<float>(rng_feat.normal());
    out.features.add(dialog.image_id, std::move(block));

    out.corpus.dialogs.push_back(std::move(dialog));
  }

  out.corpus.validate();
  return out;
}

} // namespace mcavd
