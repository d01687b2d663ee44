// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: synthetic data generation,
// training, evaluation, retrieval metrics, and the annotation/phenomena
// tools. Heavy lifting stays in the C++ core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mcavd/analysis.hpp"
#include "mcavd/checkpoint.hpp"
#include "mcavd/metrics.hpp"
#include "mcavd/train.hpp"

namespace py = pybind11;
using namespace mcavd;

namespace {

ModelConfig make_model_config(const std::string& variant, int num_layers, int num_heads,
                              int model_dim, int ff_dim, double dropout, int embed_dim,
                              int feature_dim, int n_boxes, int n_candidates,
                              bool include_caption, bool positional_encoding) {
  ModelConfig cfg;
  cfg.variant = parse_variant(variant);
  cfg.attn.num_layers = num_layers;
  cfg.attn.num_heads = num_heads;
  cfg.attn.model_dim = model_dim;
  cfg.attn.ff_dim = ff_dim;
  cfg.attn.dropout = dropout;
  cfg.attn.positional_encoding = positional_encoding;
  cfg.embed_dim = embed_dim;
  cfg.feature_dim = feature_dim;
  cfg.n_boxes = n_boxes;
  cfg.n_candidates = n_candidates;
  cfg.include_caption = include_caption;
  return cfg;
}

py::dict report_dict(const MetricsReport& report) {
  py::dict d;
  if (report.has_ndcg()) d["ndcg"] = report.ndcg;
  d["mrr"] = report.mrr;
  d["r1"] = report.r1;
  d["r5"] = report.r5;
  d["r10"] = report.r10;
  d["mean_rank"] = report.mean_rank;
  d["gt_rounds"] = report.gt_rounds;
  d["ndcg_rounds"] = report.ndcg_rounds;
  return d;
}

} // namespace

PYBIND11_MODULE(_mcavd, m) {
  m.doc() = "Modular co-attention visual-dialog answer ranking";

  py::register_exception<Error>(m, "McavdError");

  // data
  py::class_<DialogCorpus>(m, "DialogCorpus")
      .def_property_readonly("n_dialogs",
                             [](const DialogCorpus& c) { return c.dialogs.size(); })
      .def_property_readonly("n_options", &DialogCorpus::n_options)
      .def("image_ids", [](const DialogCorpus& c) {
        std::vector<int64_t> ids;
        for (const auto& d : c.dialogs) ids.push_back(d.image_id);
        return ids;
      });
  py::class_<FeatureStore>(m, "FeatureStore")
      .def_property_readonly("n_images", &FeatureStore::n_images)
      .def_property_readonly("n_boxes", &FeatureStore::n_boxes)
      .def_property_readonly("dim", &FeatureStore::dim);
  py::class_<DenseAnnotation>(m, "DenseAnnotation")
      .def_readonly("image_id", &DenseAnnotation::image_id)
      .def_readonly("round_id", &DenseAnnotation::round_id)
      .def_readonly("relevance", &DenseAnnotation::relevance);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("load_corpus", &load_corpus, py::arg("path"));
  m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"));
  m.def("load_features", &load_features, py::arg("path"));
  m.def("write_features", &write_features, py::arg("store"), py::arg("path"));
  m.def("load_dense", &load_dense, py::arg("path"));
  m.def("save_dense", &save_dense, py::arg("dense"), py::arg("path"));

  m.def(
      "gen_synthetic",
      [](int n_dialogs, int vocab, int n_candidates, int feature_dim, int n_boxes,
         bool history_dependent, double dense_fraction, uint64_t seed) {
        SyntheticSpec spec;
        spec.n_dialogs = n_dialogs;
        spec.vocab = vocab;
        spec.n_candidates = n_candidates;
        spec.feature_dim = feature_dim;
        spec.n_boxes = n_boxes;
        spec.history_dependent = history_dependent;
        spec.dense_fraction = dense_fraction;
        spec.seed = seed;
        auto data = gen_synthetic(spec);
        return py::make_tuple(std::move(data.corpus), std::move(data.features),
                              std::move(data.dense));
      },
      py::arg("n_dialogs"), py::arg("vocab") = 100, py::arg("n_candidates") = 20,
      py::arg("feature_dim") = 64, py::arg("n_boxes") = 36,
      py::arg("history_dependent") = false, py::arg("dense_fraction") = 0.25,
      py::arg("seed") = 1);

  // metrics
  m.def("rank_candidates", &rank_candidates, py::arg("scores"));
  m.def("ndcg", &ndcg, py::arg("ranks"), py::arg("relevance"));
  m.def(
      "single_gt_metrics",
      [](int gt_rank, int n) {
        auto v = single_gt_metrics(gt_rank, n);
        return py::make_tuple(v.mrr_term, v.r1, v.r5, v.r10, v.rank);
      },
      py::arg("gt_rank"), py::arg("n_candidates"));

  // model + training
  py::class_<DialogModel>(m, "DialogModel")
      .def_property_readonly("variant",
                             [](const DialogModel& m_) { return variant_name(m_.config().variant); })
      .def_property_readonly("n_parameters",
                             [](const DialogModel& m_) {
                               int64_t total = 0;
                               for (const auto& [name, p] : m_.params().entries())
                                 total += p.numel();
                               return total;
                             })
      .def("parameter_names", [](const DialogModel& m_) {
        std::vector<std::string> names;
        for (const auto& [name, p] : m_.params().entries()) names.push_back(name);
        return names;
      });

  m.def(
      "build_model",
      [](const DialogCorpus& corpus, const std::string& variant, int num_layers, int num_heads,
         int model_dim, int ff_dim, double dropout, int embed_dim, int feature_dim, int n_boxes,
         int n_candidates, bool include_caption, bool positional_encoding, int min_count,
         uint64_t seed) {
        auto cfg = make_model_config(variant, num_layers, num_heads, model_dim, ff_dim, dropout,
                                     embed_dim, feature_dim, n_boxes, n_candidates,
                                     include_caption, positional_encoding);
        auto vocab = Vocabulary::build(corpus, min_count);
        SplitRng rng(seed);
        return DialogModel(cfg, vocab, rng);
      },
      py::arg("corpus"), py::arg("variant"), py::arg("num_layers") = 2, py::arg("num_heads") = 2,
      py::arg("model_dim") = 64, py::arg("ff_dim") = 0, py::arg("dropout") = 0.2,
      py::arg("embed_dim") = 64, py::arg("feature_dim") = 64, py::arg("n_boxes") = 36,
      py::arg("n_candidates") = 20, py::arg("include_caption") = true,
      py::arg("positional_encoding") = false, py::arg("min_count") = 1, py::arg("seed") = 1);

  m.def("load_checkpoint",
        [](const std::string& path) { return load_model_checkpoint(path, nullptr); },
        py::arg("path"));
  m.def(
      "save_checkpoint",
      [](const DialogModel& model, const std::string& path) {
        save_model_checkpoint(model, path);
      },
      py::arg("model"), py::arg("path"));

  m.def(
      "train_sparse",
      [](DialogModel& model, const DialogCorpus& corpus, const FeatureStore& features, double lr,
         int epochs, int batch_dialogs, uint64_t seed, int early_stop_patience,
         const std::string& output_dir) {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.batch_dialogs = batch_dialogs;
        cfg.seed = seed;
        cfg.early_stop_patience = early_stop_patience;
        cfg.output_dir = output_dir;
        auto result = train_sparse(model, corpus, features, cfg);
        py::dict d;
        d["best_val_ndcg"] = result.best_val_ndcg;
        d["best_epoch"] = result.best_epoch;
        d["epochs_run"] = result.records.size();
        return d;
      },
      py::arg("model"), py::arg("corpus"), py::arg("features"), py::arg("lr") = 0.0,
      py::arg("epochs") = 0, py::arg("batch_dialogs") = 4, py::arg("seed") = 1,
      py::arg("early_stop_patience") = 5, py::arg("output_dir") = "");

  m.def(
      "finetune_dense",
      [](DialogModel& model, const std::vector<DenseAnnotation>& dense,
         const DialogCorpus& corpus, const FeatureStore& features, double lr, int epochs,
         int batch_dialogs, uint64_t seed, int early_stop_patience,
         const std::string& output_dir) {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.batch_dialogs = batch_dialogs;
        cfg.seed = seed;
        cfg.early_stop_patience = early_stop_patience;
        cfg.output_dir = output_dir;
        auto result = finetune_dense(model, dense, corpus, features, cfg);
        py::dict d;
        d["best_val_ndcg"] = result.best_val_ndcg;
        d["best_epoch"] = result.best_epoch;
        d["epochs_run"] = result.records.size();
        return d;
      },
      py::arg("model"), py::arg("dense"), py::arg("corpus"), py::arg("features"),
      py::arg("lr") = 0.0, py::arg("epochs") = 0, py::arg("batch_dialogs") = 4,
      py::arg("seed") = 1, py::arg("early_stop_patience") = 5, py::arg("output_dir") = "");

  m.def(
      "evaluate",
      [](const DialogModel& model, const DialogCorpus& corpus, const FeatureStore& features,
         std::optional<std::vector<DenseAnnotation>> dense,
         std::optional<std::vector<std::pair<int, int>>> subset,
         std::optional<bool> include_caption) {
        EvalOptions opts;
        if (subset) opts.subset = &*subset;
        opts.include_caption = include_caption;
        return report_dict(
            evaluate(model, corpus, features, dense ? &*dense : nullptr, opts));
      },
      py::arg("model"), py::arg("corpus"), py::arg("features"), py::arg("dense") = py::none(),
      py::arg("subset") = py::none(), py::arg("include_caption") = py::none());

  // analysis tools
  m.def(
      "relevance_stats",
      [](const std::vector<DenseAnnotation>& dense, const DialogCorpus& corpus) {
        auto hist = relevance_stats(dense, corpus);
        py::dict gt;
        for (const auto& [value, count] : hist.gt_counts)
          gt[py::float_(value)] = py::make_tuple(count, hist.gt_percent(value));
        py::dict d;
        d["gt"] = gt;
        d["total_rounds"] = hist.total_rounds;
        d["gt_zero_fraction"] = hist.gt_zero_fraction;
        return d;
      },
      py::arg("dense"), py::arg("corpus"));
  m.def(
      "correct_gt_relevance",
      [](const std::vector<DenseAnnotation>& dense, const DialogCorpus& corpus) {
        auto result = correct_gt_relevance(dense, corpus);
        return py::make_tuple(result.corrected, result.modified_count, result.modified_indices);
      },
      py::arg("dense"), py::arg("corpus"));
  m.def(
      "count_pronouns",
      [](const std::vector<std::string>& tokens) {
        auto counts = count_pronouns(tokens);
        return py::make_tuple(counts.total, counts.non_pleonastic);
      },
      py::arg("question_tokens"));
  m.def(
      "detect_ellipsis",
      [](const std::string& tree) { return detect_ellipsis(parse_bracketed_tree(tree)); },
      py::arg("bracketed_tree"));
  m.def(
      "phenomena_report",
      [](const DialogCorpus& corpus) {
        auto report = phenomena_report(corpus);
        auto hist_dict = [](const std::map<int, int64_t>& hist) {
          py::dict d;
          for (const auto& [count, dialogs] : hist) d[py::int_(count)] = dialogs;
          return d;
        };
        py::dict d;
        d["dialog_count"] = report.dialog_count;
        d["pronouns_per_dialog"] = hist_dict(report.pronouns_per_dialog);
        d["non_pleonastic_per_dialog"] = hist_dict(report.non_pleonastic_per_dialog);
        return d;
      },
      py::arg("corpus"));
}
