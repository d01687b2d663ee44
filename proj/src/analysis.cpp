// SPDX-License-Identifier: Apache-2.0

#include "mcavd/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace mcavd {

using nlohmann::ordered_json;

namespace {

/// Annotated rounds must name an image and round that exist in the corpus.
void check_alignment(const std::vector<DenseAnnotation>& dense, const DialogCorpus& corpus) {
  if (dense.empty()) throw ValueError("empty dense annotation set");
  std::unordered_map<int64_t, const Dialog*> dialogs;
  for (const auto& d : corpus.dialogs) dialogs[d.image_id] = &d;
  for (size_t i = 0; i < dense.size(); ++i) {
    const auto& ann = dense[i];
    auto it = dialogs.find(ann.image_id);
    if (it == dialogs.end())
      throw SchemaError("annotation " + std::to_string(i) + ": image " +
                        std::to_string(ann.image_id) + " not in corpus");
    if (ann.round_id < 1 || ann.round_id > static_cast<int>(it->second->rounds.size()))
      throw SchemaError("annotation " + std::to_string(i) + ": round " +
                        std::to_string(ann.round_id) + " out of range");
    const auto& round = it->second->rounds[static_cast<size_t>(ann.round_id - 1)];
    if (ann.relevance.size() != round.answer_options.size())
      throw SchemaError("annotation " + std::to_string(i) + ": " +
                        std::to_string(ann.relevance.size()) + " relevance values for " +
                        std::to_string(round.answer_options.size()) + " options");
  }
}

const DialogRound& round_of(const DialogCorpus& corpus, const DenseAnnotation& ann) {
  for (const auto& d : corpus.dialogs)
    if (d.image_id == ann.image_id) return d.rounds[static_cast<size_t>(ann.round_id - 1)];
  throw SchemaError("annotation image " + std::to_string(ann.image_id) + " not in corpus");
}

} // namespace

double RelevanceHistogram::gt_percent(float value) const {
  auto it = gt_counts.find(value);
  if (it == gt_counts.end() || total_rounds == 0) return 0.0;
  return 100.0 * static_cast<double>(it->second) / static_cast<double>(total_rounds);
}

std::string RelevanceHistogram::to_json() const {
  ordered_json gt = ordered_json::object(), all = ordered_json::object();
  char key[32];
  for (const auto& [value, count] : gt_counts) {
    std::snprintf(key, sizeof(key), "%g", static_cast<double>(value));
    gt[key] = {{"count", count}, {"percent", gt_percent(value)}};
  }
  int64_t all_total = 0;
  for (const auto& [value, count] : all_counts) all_total += count;
  for (const auto& [value, count] : all_counts) {
    std::snprintf(key, sizeof(key), "%g", static_cast<double>(value));
    all[key] = {{"count", count},
                {"percent", all_total ? 100.0 * static_cast<double>(count) / static_cast<double>(all_total) : 0.0}};
  }
  ordered_json j = {{"total_rounds", total_rounds},
                    {"gt_zero_fraction", gt_zero_fraction},
                    {"gt_relevance", gt},
                    {"all_relevance", all}};
  return j.dump(2);
}

std::string RelevanceHistogram::to_table() const {
  std::string out = "Relevance of GT    Count    Percent\n";
  char line[96];
  for (auto it = gt_counts.rbegin(); it != gt_counts.rend(); ++it) {
    std::snprintf(line, sizeof(line), "%-16g %8lld %9.2f%%\n", static_cast<double>(it->first),
                  static_cast<long long>(it->second), gt_percent(it->first));
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-16s %8lld %9.2f%%\n", "Total",
                static_cast<long long>(total_rounds), total_rounds ? 100.0 : 0.0);
  out += line;
  return out;
}

RelevanceHistogram relevance_stats(const std::vector<DenseAnnotation>& dense,
                                   const DialogCorpus& corpus) {
  check_alignment(dense, corpus);
  RelevanceHistogram hist;
  int64_t gt_zero = 0;
  for (const auto& ann : dense) {
    const auto& round = round_of(corpus, ann);
    const float gt_rel = ann.relevance[static_cast<size_t>(round.gt_index)];
    ++hist.gt_counts[gt_rel];
    if (gt_rel == 0.0f) ++gt_zero;
    for (float r : ann.relevance) ++hist.all_counts[r];
  }
  hist.total_rounds = static_cast<int64_t>(dense.size());
  hist.gt_zero_fraction = static_cast<double>(gt_zero) / static_cast<double>(dense.size());
  return hist;
}

GtCorrection correct_gt_relevance(const std::vector<DenseAnnotation>& dense,
                                  const DialogCorpus& corpus) {
  check_alignment(dense, corpus);
  GtCorrection result;
  result.corrected = dense;
  for (size_t i = 0; i < result.corrected.size(); ++i) {
    auto& ann = result.corrected[i];
    const auto& round = round_of(corpus, ann);
    float& gt_rel = ann.relevance[static_cast<size_t>(round.gt_index)];
    if (gt_rel != 1.0f) {
      gt_rel = 1.0f;
      ++result.modified_count;
      result.modified_indices.push_back(i);
    }
  }
  return result;
}

const std::vector<std::string>& pronoun_lexicon() {
  // project-defined closed-class list; the paper used an external tagger
  static const std::vector<std::string> lexicon = {
      "i",     "me",      "my",     "mine",   "myself",  "we",     "us",        "our",
      "ours",  "ourselves", "you",  "your",   "yours",   "yourself", "yourselves",
      "he",    "him",     "his",    "himself", "she",    "her",    "hers",      "herself",
      "it",    "its",     "itself", "they",   "them",    "their",  "theirs",    "themselves",
      "this",  "that",    "these",  "those",  "other",
  };
  return lexicon;
}

const std::vector<std::string>& default_weather_lexicon() {
  static const std::vector<std::string> lexicon = {"rainy", "sunny", "daytime", "day", "night"};
  return lexicon;
}

PronounCounts count_pronouns(const std::vector<std::string>& question_tokens,
                             const std::vector<std::string>& weather_lexicon) {
  static const std::unordered_set<std::string> pronouns(pronoun_lexicon().begin(),
                                                        pronoun_lexicon().end());
  bool weather_context = false;
  for (const auto& token : question_tokens)
    if (std::find(weather_lexicon.begin(), weather_lexicon.end(), token) != weather_lexicon.end())
      weather_context = true;

  PronounCounts counts;
  for (const auto& token : question_tokens) {
    if (!pronouns.count(token)) continue;
    ++counts.total;
    if (token == "it" && weather_context) continue; // pleonastic
    ++counts.non_pleonastic;
  }
  return counts;
}

namespace {

ParseTree parse_tree_at(const std::string& text, size_t& pos) {
  auto skip_ws = [&]() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip_ws();
  if (pos >= text.size() || text[pos] != '(')
    throw FormatError("malformed parse tree: expected '(' at position " + std::to_string(pos));
  ++pos;
  skip_ws();
  ParseTree node;
  while (pos < text.size() && text[pos] != '(' && text[pos] != ')' &&
         !std::isspace(static_cast<unsigned char>(text[pos])))
    node.label.push_back(text[pos++]);
  skip_ws();
  while (pos < text.size() && text[pos] != ')') {
    if (text[pos] == '(') {
      node.children.push_back(parse_tree_at(text, pos));
    } else {
      ParseTree leaf;
      while (pos < text.size() && text[pos] != '(' && text[pos] != ')' &&
             !std::isspace(static_cast<unsigned char>(text[pos])))
        leaf.label.push_back(text[pos++]);
      node.children.push_back(std::move(leaf));
    }
    skip_ws();
  }
  if (pos >= text.size()) throw FormatError("malformed parse tree: unbalanced brackets");
  ++pos; // consume ')'
  return node;
}

} // namespace

ParseTree parse_bracketed_tree(const std::string& line) {
  size_t pos = 0;
  ParseTree tree = parse_tree_at(line, pos);
  while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  if (pos != line.size())
    throw FormatError("malformed parse tree: trailing content after the root");
  return tree;
}

std::vector<ParseTree> load_parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open parse file: " + path);
  std::vector<ParseTree> trees;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      trees.push_back(parse_bracketed_tree(line));
    } catch (const FormatError& e) {
      throw FormatError("parse file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trees;
}

bool detect_ellipsis(const ParseTree& tree) {
  static const std::unordered_set<std::string> sentence_roots = {"S", "SQ", "SBARQ", "SINV"};
  const ParseTree* root = &tree;
  if ((root->label == "ROOT" || root->label == "TOP" || root->label.empty()) &&
      root->children.size() == 1)
    root = &root->children[0];
  return sentence_roots.count(root->label) == 0;
}

std::string PhenomenaReport::to_json() const {
  auto hist_json = [](const std::map<int, int64_t>& hist) {
    ordered_json j = ordered_json::object();
    for (const auto& [count, dialogs] : hist) j[std::to_string(count)] = dialogs;
    return j;
  };
  ordered_json j = {{"dialog_count", dialog_count},
                    {"pronouns_per_dialog", hist_json(pronouns_per_dialog)},
                    {"non_pleonastic_per_dialog", hist_json(non_pleonastic_per_dialog)}};
  if (has_ellipsis) j["ellipsis_per_dialog"] = hist_json(ellipsis_per_dialog);
  return j.dump(2);
}

std::string PhenomenaReport::to_table() const {
  auto render = [](const char* title, const std::map<int, int64_t>& hist) {
    std::string out = std::string(title) + "\n  count  dialogs\n";
    char line[64];
    for (const auto& [count, dialogs] : hist) {
      std::snprintf(line, sizeof(line), "  %5d %8lld\n", count, static_cast<long long>(dialogs));
      out += line;
    }
    return out;
  };
  std::string out = render("Pronouns in 10 questions", pronouns_per_dialog);
  out += render("Non-pleonastic pronouns in 10 questions", non_pleonastic_per_dialog);
  if (has_ellipsis) out += render("Ellipsis cases in 10 questions", ellipsis_per_dialog);
  return out;
}

PhenomenaReport phenomena_report(const DialogCorpus& corpus,
                                 const std::vector<ParseTree>* parses) {
  if (parses != nullptr && parses->size() != corpus.questions.size())
    throw SchemaError("parse file has " + std::to_string(parses->size()) + " trees for " +
                      std::to_string(corpus.questions.size()) + " corpus questions");

  // pronoun counts are a property of the question string: compute per pool entry
  std::vector<PhenomenaRecord> by_question(corpus.questions.size());
  for (size_t q = 0; q < corpus.questions.size(); ++q) {
    const PronounCounts counts = count_pronouns(tokenize(corpus.questions[q]));
    by_question[q].pronouns = counts.total;
    by_question[q].non_pleonastic = counts.non_pleonastic;
    if (parses != nullptr) by_question[q].ellipsis = detect_ellipsis((*parses)[q]);
  }

  PhenomenaReport report;
  report.has_ellipsis = parses != nullptr;
  report.dialog_count = static_cast<int64_t>(corpus.dialogs.size());
  for (const auto& dialog : corpus.dialogs) {
    int pronouns = 0, non_pleonastic = 0, ellipsis = 0;
    for (const auto& round : dialog.rounds) {
      const auto& rec = by_question[static_cast<size_t>(round.question)];
      pronouns += rec.pronouns;
      non_pleonastic += rec.non_pleonastic;
      ellipsis += rec.ellipsis ? 1 : 0;
    }
    ++report.pronouns_per_dialog[pronouns];
    ++report.non_pleonastic_per_dialog[non_pleonastic];
    if (parses != nullptr) ++report.ellipsis_per_dialog[ellipsis];
  }
  return report;
}

} // namespace mcavd
