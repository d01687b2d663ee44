// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mcavd/model.hpp"

using namespace mcavd;

namespace {

ModelConfig desk_config(VariantId variant, int n_candidates = 20) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.attn.num_layers = 1;
  cfg.attn.num_heads = 2;
  cfg.attn.model_dim = 16;
  cfg.attn.ff_dim = 32;
  cfg.attn.dropout = 0.2;
  cfg.embed_dim = 12;
  cfg.feature_dim = 8;
  cfg.n_boxes = 5;
  cfg.n_candidates = n_candidates;
  return cfg;
}

struct Fixture {
  SyntheticData data;
  Vocabulary vocab;

  explicit Fixture(bool history_dependent = false, int n_dialogs = 3, uint64_t seed = 42) {
    SyntheticSpec spec;
    spec.n_dialogs = n_dialogs;
    spec.seed = seed;
    spec.feature_dim = 8;
    spec.n_boxes = 5;
    spec.history_dependent = history_dependent;
    data = gen_synthetic(spec);
    vocab = Vocabulary::build(data.corpus);
  }

  DialogModel model(VariantId variant, uint64_t seed = 1) const {
    SplitRng rng(seed);
    return DialogModel(desk_config(variant), vocab, rng);
  }

  RoundBatch batch(const DialogModel& m, int d = 0, int r = 3) const {
    return make_round_batch(data.corpus, d, r, m.vocab(), data.features, m.config());
  }
};

} // namespace

TEST_CASE("forward: output length N, sums to one, for every variant") {
  Fixture fx;
  RunState rs;
  for (VariantId v : all_variants()) {
    auto model = fx.model(v);
    auto probs = model.forward(fx.batch(model), rs);
    CHECK(probs.shape() == Shape{20});
    float total = 0;
    for (float p : probs.value()) {
      CHECK(p >= 0.0f);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0f).epsilon(1e-6));
  }
}

TEST_CASE("identical candidate encodings give uniform probabilities") {
  Fixture fx;
  RunState rs;
  auto model = fx.model(VariantId::McaI);
  auto batch = fx.batch(model);
  for (auto& cand : batch.candidates) cand = batch.candidates[0];
  auto probs = model.forward(batch, rs);
  for (float p : probs.value()) CHECK(p == doctest::Approx(1.0f / 20).epsilon(1e-5));
}

TEST_CASE("variant isolation: unused modality perturbations change nothing bitwise") {
  Fixture fx;
  RunState rs;

  SUBCASE("MCA-I ignores history") {
    auto model = fx.model(VariantId::McaI);
    auto batch = fx.batch(model);
    auto base = model.forward(batch, rs);
    batch.history = std::vector<int>{5, 6, 7, 8};
    auto perturbed = model.forward(batch, rs);
    CHECK(base.value() == perturbed.value());
  }

  SUBCASE("MCA-H ignores the image") {
    auto model = fx.model(VariantId::McaH);
    // batch built under a config that carries both modalities
    auto batch = make_round_batch(fx.data.corpus, 0, 3, model.vocab(), fx.data.features,
                                  fx.model(VariantId::McaIH).config());
    auto base = model.forward(batch, rs);
    for (auto& v : batch.image.value()) v += 3.25f;
    auto perturbed = model.forward(batch, rs);
    CHECK(base.value() == perturbed.value());
  }
}

TEST_CASE("history variants demand history; image variants demand features") {
  Fixture fx;
  RunState rs;
  auto model = fx.model(VariantId::McaIH);
  auto batch = fx.batch(model);
  batch.history.reset();
  CHECK_THROWS_WITH_AS(model.forward(batch, rs), doctest::Contains("history"), ValueError);

  auto batch2 = fx.batch(model);
  batch2.image = FTensor();
  CHECK_THROWS_WITH_AS(model.forward(batch2, rs), doctest::Contains("image"), ValueError);

  // empty (but present) history is tolerated: round 1 without caption
  auto batch3 = fx.batch(model);
  batch3.history = std::vector<int>{};
  auto probs = model.forward(batch3, rs);
  CHECK(probs.shape() == Shape{20});
}

TEST_CASE("encode_candidates: shape, determinism, permutation equivariance") {
  Fixture fx;
  SplitRng rng(3);
  Embedding<float> table(fx.vocab.size(), 12, rng);
  LstmEncoder<float> encoder(12, 16, rng);

  std::vector<std::vector<int>> options = {{2, 3}, {4}, {2, 3}, {5, 6, 7}};
  auto enc = encode_candidates(options, encoder, table);
  CHECK(enc.shape() == Shape{4, 16});

  // duplicates encode identically
  for (int j = 0; j < 16; ++j)
    CHECK(enc.value()[static_cast<size_t>(j)] ==
          enc.value()[static_cast<size_t>(2 * 16 + j)]);

  // permutation of the options permutes rows identically
  std::vector<std::vector<int>> swapped = {options[3], options[1], options[2], options[0]};
  auto enc2 = encode_candidates(swapped, encoder, table);
  for (int j = 0; j < 16; ++j) {
    CHECK(enc.value()[static_cast<size_t>(j)] == enc2.value()[static_cast<size_t>(3 * 16 + j)]);
    CHECK(enc.value()[static_cast<size_t>(3 * 16 + j)] == enc2.value()[static_cast<size_t>(j)]);
  }

  // N=100 contract
  std::vector<std::vector<int>> hundred(100, std::vector<int>{2});
  CHECK(encode_candidates(hundred, encoder, table).shape() == Shape{100, 16});

  CHECK_THROWS_AS(encode_candidates({}, encoder, table), ValueError);
}

TEST_CASE("score: dot-product geometry") {
  // z = 0 -> all logits 0
  auto zeros = FTensor({4}, 0.f);
  auto cands = FTensor::from({3, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
  auto logits = score(zeros, cands);
  CHECK(logits.shape() == Shape{1, 3});
  for (float v : logits.value()) CHECK(v == 0.0f);

  // z aligned with candidate k, others orthogonal -> argmax k
  auto z = FTensor::from({4}, {0, 0, 10, 0});
  auto l2 = score(z, cands);
  CHECK(l2.value()[2] > l2.value()[0]);
  CHECK(l2.value()[2] > l2.value()[1]);

  // positive scaling preserves order
  auto z_scaled = FTensor::from({4}, {0, 0, 30, 0});
  auto l3 = score(z_scaled, cands);
  CHECK((l3.value()[2] > l3.value()[0]) == (l2.value()[2] > l2.value()[0]));

  auto bad = FTensor({5}, 1.f);
  CHECK_THROWS_AS(score(bad, cands), ShapeError);
}

TEST_CASE("loss values match the printed formula") {
  // uniform over N=100: ln(100)/100
  auto uniform100 = FTensor(Shape{100}, 0.01f);
  CHECK(loss_sparse(uniform100, 17).item() == doctest::Approx(0.0460517f).epsilon(1e-4));

  // perfect prediction
  std::vector<float> onehot(100, 0.0f);
  onehot[17] = 1.0f;
  CHECK(loss_sparse(FTensor::from({100}, std::move(onehot)), 17).item() ==
        doctest::Approx(0.0f).epsilon(1e-6));

  // uniform over N=4: ln(4)/4
  auto uniform4 = FTensor(Shape{4}, 0.25f);
  CHECK(loss_sparse(uniform4, 0).item() == doctest::Approx(0.3465736f).epsilon(1e-5));

  CHECK_THROWS_AS(loss_sparse(uniform4, 4), ValueError);
  CHECK_THROWS_AS(loss_sparse(uniform4, -1), ValueError);

  // dense: 1.5 ln(100)/100 for relevance [1, 0.5, 0, ...]
  std::vector<float> rel(100, 0.0f);
  rel[0] = 1.0f;
  rel[1] = 0.5f;
  CHECK(loss_dense(uniform100, rel).item() == doctest::Approx(0.0690776f).epsilon(1e-4));

  // all-zero relevance: zero loss
  CHECK(loss_dense(uniform100, std::vector<float>(100, 0.0f)).item() == 0.0f);

  // zero probability at a supervised position clamps and flags
  std::vector<float> degenerate(4, 0.0f);
  degenerate[0] = 1.0f;
  bool clamped = false;
  loss_sparse(FTensor::from({4}, std::move(degenerate)), 2, &clamped);
  CHECK(clamped);
}

TEST_CASE("loss_dense with one-hot relevance equals loss_sparse to machine precision") {
  SplitRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(2, 30);
    std::vector<float> logits(static_cast<size_t>(n));
    for (auto& v : logits) v = static_cast<float>(rng.normal());
    float mx = *std::max_element(logits.begin(), logits.end());
    float denom = 0;
    for (auto& v : logits) denom += std::exp(v - mx);
    std::vector<float> probs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) probs[static_cast<size_t>(i)] = std::exp(logits[static_cast<size_t>(i)] - mx) / denom;
    const int gt = rng.uniform_int(0, n - 1);
    std::vector<float> onehot(static_cast<size_t>(n), 0.0f);
    onehot[static_cast<size_t>(gt)] = 1.0f;
    auto p = FTensor::from({n}, probs);
    CHECK(loss_sparse(p, gt).item() == loss_dense(p, onehot).item());
  }
}

TEST_CASE("one training step sends nonzero gradient into every active block") {
  Fixture fx;
  RunState rs;
  rs.training = true;
  SplitRng drop_rng(99);
  rs.dropout_rng = &drop_rng;

  for (VariantId v : all_variants()) {
    auto model = fx.model(v);
    auto batch = fx.batch(model, 1, 5);
    model.params().zero_grad();
    auto& tape = Tape<float>::active();
    tape.clear();
    auto probs = model.forward(batch, rs);
    auto loss = loss_sparse(probs, batch.gt_index);
    backward(loss);
    tape.clear();
    for (const auto& [name, p] : model.params().entries()) {
      bool any = false;
      for (float g : p.grad()) any = any || (g != 0.0f);
      INFO(variant_name(v), " parameter ", name);
      CHECK(any);
    }
  }
}

TEST_CASE("make_round_batch enforces truncation limits") {
  Fixture fx;
  auto model = fx.model(VariantId::McaIH);
  for (int d = 0; d < 3; ++d)
    for (int r = 0; r < 10; ++r) {
      auto b = make_round_batch(fx.data.corpus, d, r, model.vocab(), fx.data.features,
                                model.config());
      CHECK(b.question.size() <= 20);
      CHECK(b.history->size() <= 200);
      for (const auto& cand : b.candidates) CHECK(cand.size() <= 20);
      CHECK(b.candidates.size() == 20);
    }
}

TEST_CASE("round batch carries dense relevance when annotated") {
  SyntheticSpec spec;
  spec.n_dialogs = 4;
  spec.seed = 31;
  spec.dense_fraction = 1.0;
  spec.feature_dim = 8;
  spec.n_boxes = 5;
  auto data = gen_synthetic(spec);
  auto vocab = Vocabulary::build(data.corpus);
  SplitRng rng(1);
  DialogModel model(desk_config(VariantId::McaI), vocab, rng);
  DenseIndex index(data.dense);
  auto batch = make_round_batch(data.corpus, 0, 0, vocab, data.features, model.config(), &index);
  REQUIRE(batch.relevance.has_value());
  CHECK(batch.relevance->size() == 20);
  CHECK((*batch.relevance)[static_cast<size_t>(batch.gt_index)] == 1.0f);
}

TEST_CASE("end-to-end MCA-I gradient check (32-bit)") {
  Fixture fx;
  RunState rs; // eval mode: dropout off keeps the finite differences clean
  auto model = fx.model(VariantId::McaI, 7);
  auto batch = fx.batch(model, 2, 4);

  auto loss_fn = [&]() { return loss_sparse(model.forward(batch, rs), batch.gt_index); };
  std::vector<FTensor> probes;
  for (const auto& [name, p] : model.params().entries())
    if (name == "img_proj.weight" || name == "q_encoder.w_ih" ||
        name == "stack_main.layer0.text_sa.mha.q.weight" || name == "fuse_main.proj_x.weight" ||
        name == "cand_encoder.w_hh")
      probes.push_back(p);
  REQUIRE(probes.size() == 5);
  const double err = gradcheck::max_rel_error<float>(loss_fn, probes, 1e-3, 40);
  CHECK(err < 1e-2);
}

TEST_CASE("checkpoint config JSON round trip preserves the model") {
  Fixture fx;
  auto model = fx.model(VariantId::McaIVgh);
  auto rebuilt = DialogModel::from_config_json(model.config_json());
  CHECK(rebuilt.config_json() == model.config_json());
  CHECK(rebuilt.params().size() == model.params().size());
  CHECK(rebuilt.vocab().size() == model.vocab().size());
  for (size_t i = 0; i < model.params().size(); ++i) {
    CHECK(rebuilt.params().entries()[i].first == model.params().entries()[i].first);
    CHECK(rebuilt.params().entries()[i].second.shape() ==
          model.params().entries()[i].second.shape());
  }
}

TEST_CASE("variant names parse and render") {
  CHECK(parse_variant("mca-i-h") == VariantId::McaIH);
  CHECK(parse_variant("MCA-I-HGuidedQ") == VariantId::McaIHGuidedQ);
  CHECK(variant_name(VariantId::McaIVgh) == "mca-i-vgh");
  CHECK_THROWS_AS(parse_variant("mca-x"), ValueError);
  CHECK(variant_uses_image(VariantId::McaI));
  CHECK(!variant_uses_image(VariantId::McaH));
  CHECK(!variant_uses_history(VariantId::McaI));
  CHECK(variant_uses_history(VariantId::McaIHConcQ));
}
