// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcavd/data.hpp"

namespace mcavd {

/// Distribution of relevance values: counts and percentages over the
/// ground-truth answers of annotated rounds, plus the same over every value
/// of every annotated vector.
struct RelevanceHistogram {
  std::map<float, int64_t> gt_counts;
  std::map<float, int64_t> all_counts;
  int64_t total_rounds = 0;
  double gt_zero_fraction = 0.0;

  double gt_percent(float value) const;
  std::string to_json() const;
  std::string to_table() const;
};

RelevanceHistogram relevance_stats(const std::vector<DenseAnnotation>& dense,
                                   const DialogCorpus& corpus);

/// Appendix-style ground-truth repair: relevance[gt_index] := 1.0 for every
/// annotated round, everything else untouched.
struct GtCorrection {
  std::vector<DenseAnnotation> corrected;
  int64_t modified_count = 0;
  std::vector<size_t> modified_indices; // positions in the annotation list
};

GtCorrection correct_gt_relevance(const std::vector<DenseAnnotation>& dense,
                                  const DialogCorpus& corpus);

/// Closed-class pronoun lexicon (personal, possessive, reflexive,
/// demonstrative) plus the standalone "other" rule.
const std::vector<std::string>& pronoun_lexicon();
/// Weather identifiers that make a co-occurring "it" pleonastic.
const std::vector<std::string>& default_weather_lexicon();

struct PronounCounts {
  int total = 0;
  int non_pleonastic = 0;
};

/// Counts lexicon hits over lowercased tokens; every "it" in a question that
/// also contains a weather identifier counts as pleonastic and is excluded
/// from non_pleonastic.
PronounCounts count_pronouns(const std::vector<std::string>& question_tokens,
                             const std::vector<std::string>& weather_lexicon =
                                 default_weather_lexicon());

/// Bracketed constituency tree, e.g. "(SQ (VBZ is) (NP (PRP it)))".
struct ParseTree {
  std::string label;
  std::vector<ParseTree> children;
};

ParseTree parse_bracketed_tree(const std::string& line);
/// One tree per line, aligned with the corpus question pool.
std::vector<ParseTree> load_parse_file(const std::string& path);

/// True when the root label is outside {S, SQ, SBARQ, SINV}. A bare ROOT/TOP
/// wrapper with a single child is looked through.
bool detect_ellipsis(const ParseTree& tree);

struct PhenomenaRecord {
  int pronouns = 0;
  int non_pleonastic = 0;
  bool ellipsis = false;
};

/// Figure-7-style per-dialog distributions: for each dialog the pronoun
/// counts over its ten questions are summed, and the histograms map that
/// sum to the number of dialogs showing it.
struct PhenomenaReport {
  std::map<int, int64_t> pronouns_per_dialog;
  std::map<int, int64_t> non_pleonastic_per_dialog;
  std::map<int, int64_t> ellipsis_per_dialog; // present only when parses given
  int64_t dialog_count = 0;
  bool has_ellipsis = false;

  std::string to_json() const;
  std::string to_table() const;
};

PhenomenaReport phenomena_report(const DialogCorpus& corpus,
                                 const std::vector<ParseTree>* parses = nullptr);

} // namespace mcavd
