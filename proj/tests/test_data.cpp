// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mcavd/data.hpp"

using namespace mcavd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mcavd_data_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("tokenize follows the stated rule") {
  CHECK(tokenize("Is it sunny?") == std::vector<std::string>{"is", "it", "sunny", "?"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("About how many?") == std::vector<std::string>{"about", "how", "many", "?"});
  CHECK(tokenize("don't") == std::vector<std::string>{"don", "'", "t"});
  CHECK(tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
}

TEST_CASE("synthetic corpus: counts, determinism, label uniformity") {
  SyntheticSpec spec;
  spec.n_dialogs = 5;
  spec.seed = 7;
  auto data = gen_synthetic(spec);
  CHECK(data.corpus.dialogs.size() == 5);
  CHECK(data.corpus.round_count() == 50);
  for (const auto& d : data.corpus.dialogs) CHECK(d.rounds.size() == 10);

  // byte-identical regeneration
  auto again = gen_synthetic(spec);
  CHECK(data.corpus == again.corpus);
  CHECK(data.dense == again.dense);
  for (int64_t id : data.features.image_ids())
    CHECK(data.features.features(id) == again.features.features(id));

  spec.seed = 8;
  auto other = gen_synthetic(spec);
  CHECK(data.corpus != other.corpus);

  // gt_index uniform over candidate slots: chi-square over 1000 rounds
  SyntheticSpec big;
  big.n_dialogs = 100;
  big.n_candidates = 20;
  big.seed = 3;
  auto large = gen_synthetic(big);
  std::vector<int64_t> counts(20, 0);
  for (const auto& d : large.corpus.dialogs)
    for (const auto& r : d.rounds) ++counts[static_cast<size_t>(r.gt_index)];
  const double expected = 1000.0 / 20.0;
  double chi2 = 0;
  for (int64_t c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 19 dof: p > 0.01 requires chi2 < 36.19
  CHECK(chi2 < 36.19);
}

TEST_CASE("corpus save/load round trip and schema errors") {
  TempDir tmp;
  SyntheticSpec spec;
  spec.n_dialogs = 3;
  spec.seed = 21;
  auto data = gen_synthetic(spec);

  const auto path = tmp.file("corpus.json");
  save_corpus(data.corpus, path);
  auto loaded = load_corpus(path);
  CHECK(loaded == data.corpus);

  SUBCASE("round with wrong option count") {
    auto broken = data.corpus;
    broken.dialogs[1].rounds[4].answer_options.pop_back();
    save_corpus(broken, path);
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("dialog 1"), SchemaError);
  }

  SUBCASE("gt_index pointing outside the option list") {
    auto broken = data.corpus;
    broken.dialogs[0].rounds[0].gt_index = spec.n_candidates + 3;
    save_corpus(broken, path);
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("gt_index"), SchemaError);
  }

  SUBCASE("gt_index not pointing at the answer") {
    auto broken = data.corpus;
    auto& round = broken.dialogs[0].rounds[0];
    round.gt_index = (round.gt_index + 1) % spec.n_candidates;
    save_corpus(broken, path);
    CHECK_THROWS_AS(load_corpus(path), SchemaError);
  }
}

TEST_CASE("feature store round trip and format errors") {
  TempDir tmp;
  FeatureStore store(4, 6);
  SplitRng rng(2);
  for (int64_t id : {100, 200, 300}) {
    std::vector<float> block(24);
    for (auto& v : block) v = static_cast<float>(rng.normal());
    store.add(id, std::move(block));
  }
  const auto path = tmp.file("features.bin");
  write_features(store, path);
  auto loaded = load_features(path);
  CHECK(loaded.n_images() == 3);
  CHECK(loaded.n_boxes() == 4);
  CHECK(loaded.dim() == 6);
  for (int64_t id : {100, 200, 300}) CHECK(loaded.features(id) == store.features(id));

  // wrong magic
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE equals garbage";
  }
  CHECK_THROWS_AS(load_features(path), FormatError);
  CHECK_THROWS_AS(load_features(tmp.file("missing.bin")), FormatError);
  CHECK_THROWS_AS(store.features(999), ValueError);
}

TEST_CASE("vocabulary conventions") {
  SyntheticSpec spec;
  spec.n_dialogs = 2;
  spec.seed = 5;
  auto data = gen_synthetic(spec);
  auto vocab = Vocabulary::build(data.corpus);
  CHECK(vocab.id("<pad>") == Vocabulary::kPadId);
  CHECK(vocab.token(0) == "<pad>");
  CHECK(vocab.token(1) == "<unk>");
  CHECK(vocab.id("zzz-not-in-vocab") == Vocabulary::kUnkId);
  CHECK(vocab.id("a") >= 2);
  CHECK(vocab.size() > 10);

  // min_count filters singletons
  DialogCorpus tiny = data.corpus;
  auto filtered = Vocabulary::build(tiny, 1000);
  CHECK(filtered.size() == 2); // only reserved ids survive an impossible threshold
}

TEST_CASE("build_history composition and truncation") {
  DialogCorpus corpus;
  corpus.questions = {"Is it sunny?", "Any people?", "What color?"};
  corpus.answers = {"yes it is", "no people", "mostly red"};
  Dialog d;
  d.image_id = 1;
  d.caption = "A sunny beach.";
  for (int t = 0; t < 10; ++t) {
    DialogRound r;
    r.question = t % 3;
    r.answer = t % 3;
    r.answer_options = {0, 1, 2};
    r.gt_index = t % 3;
    r.answer_options[static_cast<size_t>(r.gt_index)] = r.answer;
    // keep options consistent: gt position must hold the answer id
    d.rounds.push_back(r);
  }
  corpus.dialogs.push_back(d);

  auto h1 = build_history(corpus, corpus.dialogs[0], 1, true);
  CHECK(h1 == std::vector<std::string>{"a", "sunny", "beach", "."});

  auto h1_nc = build_history(corpus, corpus.dialogs[0], 1, false);
  CHECK(h1_nc.empty());

  auto h3 = build_history(corpus, corpus.dialogs[0], 3, true);
  std::vector<std::string> want = {"a",  "sunny", "beach", ".",  "is", "it", "sunny",
                                   "?",  "yes",   "it",    "is", "any", "people", "?",
                                   "no", "people"};
  CHECK(h3 == want);

  // truncation keeps the suffix
  auto h_cut = build_history(corpus, corpus.dialogs[0], 3, true, 5);
  CHECK(h_cut.size() == 5);
  CHECK(h_cut == std::vector<std::string>{"any", "people", "?", "no", "people"});

  CHECK_THROWS_AS(build_history(corpus, corpus.dialogs[0], 0, true), ValueError);
  CHECK_THROWS_AS(build_history(corpus, corpus.dialogs[0], 11, true), ValueError);
}

TEST_CASE("history never exceeds the cap on synthetic corpora") {
  SyntheticSpec spec;
  spec.n_dialogs = 4;
  spec.seed = 11;
  spec.history_dependent = true;
  auto data = gen_synthetic(spec);
  for (const auto& d : data.corpus.dialogs)
    for (int t = 1; t <= 10; ++t)
      CHECK(build_history(data.corpus, d, t, true).size() <= kMaxHistoryLen);
}

TEST_CASE("subset filtering: dedup, unknown ids, empty") {
  SyntheticSpec spec;
  spec.n_dialogs = 4;
  spec.seed = 9;
  auto data = gen_synthetic(spec);

  auto empty = filter_subset(data.corpus, {});
  CHECK(empty.rounds.empty());

  std::vector<SubsetKey> keys = {{10001, 3}, {10001, 3}, {10002, 7}, {99999, 1}, {10000, 11}};
  auto filt = filter_subset(data.corpus, keys);
  CHECK(filt.rounds.size() == 2); // duplicates collapsed
  CHECK(filt.unknown.size() == 2);
  CHECK(filt.rounds[0] == std::pair<int, int>{1, 2});
  CHECK(filt.rounds[1] == std::pair<int, int>{2, 6});
}

TEST_CASE("dense annotations: save/load round trip and validation") {
  TempDir tmp;
  SyntheticSpec spec;
  spec.n_dialogs = 6;
  spec.seed = 13;
  spec.dense_fraction = 0.5;
  auto data = gen_synthetic(spec);
  REQUIRE(!data.dense.empty());

  const auto path = tmp.file("dense.json");
  save_dense(data.dense, path);
  auto loaded = load_dense(path);
  CHECK(loaded == data.dense);

  // relevance scale: ground truth 1.0, generics in {0.2, 0.4, 0.6, 0.8}
  DenseIndex index(data.dense);
  for (const auto& ann : data.dense) {
    for (float r : ann.relevance) {
      const bool valid = r == 0.0f || r == 0.2f || r == 0.4f || r == 0.6f || r == 0.8f || r == 1.0f;
      CHECK(valid);
    }
    CHECK(index.find(ann.image_id, ann.round_id) != nullptr);
  }

  std::ofstream(path) << R"([{"image_id": 1, "round_id": 0, "gt_relevance": [0.5]}])";
  CHECK_THROWS_AS(load_dense(path), SchemaError);
  std::ofstream(path) << R"([{"image_id": 1, "round_id": 1, "gt_relevance": [1.5]}])";
  CHECK_THROWS_AS(load_dense(path), SchemaError);
}

TEST_CASE("history-dependent generator separates modes by construction") {
  SyntheticSpec spec;
  spec.n_dialogs = 8;
  spec.seed = 17;
  spec.history_dependent = true;
  auto data = gen_synthetic(spec);

  // the marker of round t appears in round t-1's answer (or the caption for
  // t=1), never in the question
  for (const auto& d : data.corpus.dialogs) {
    for (int t = 0; t < 10; ++t) {
      const auto& round = d.rounds[static_cast<size_t>(t)];
      const auto gt_tokens =
          tokenize(data.corpus.answers[static_cast<size_t>(round.answer)]);
      const std::string current_marker = gt_tokens[0]; // "<marker> <next marker>"
      const auto q_tokens = tokenize(data.corpus.questions[static_cast<size_t>(round.question)]);
      CHECK(std::find(q_tokens.begin(), q_tokens.end(), current_marker) == q_tokens.end());

      const auto prior =
          t == 0 ? tokenize(d.caption)
                 : tokenize(data.corpus.answers[static_cast<size_t>(d.rounds[static_cast<size_t>(t - 1)].answer)]);
      CHECK(std::find(prior.begin(), prior.end(), current_marker) != prior.end());
    }
  }

  // history-independent: the question itself names the marker
  spec.history_dependent = false;
  auto indep = gen_synthetic(spec);
  for (const auto& d : indep.corpus.dialogs) {
    for (const auto& round : d.rounds) {
      const auto gt_tokens = tokenize(indep.corpus.answers[static_cast<size_t>(round.answer)]);
      const auto q_tokens = tokenize(indep.corpus.questions[static_cast<size_t>(round.question)]);
      CHECK(std::find(q_tokens.begin(), q_tokens.end(), gt_tokens[0]) != q_tokens.end());
    }
  }
}
