#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "caseenc/article_corpus.hpp"
#include "caseenc/case_document.hpp"
#include "caseenc/retrieval_eval.hpp"

namespace caseenc {

struct LengthRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Parameters of a synthetic statute/case corpus. Every vocabulary item is a
/// single CJK code point, so the default character tokenizer applies.
struct SynthSpec {
  std::size_t num_articles = 3;
  std::size_t branches_per_article = 3;
  std::size_t keywords_per_branch = 4;
  std::size_t vocab_size = 160;
  std::size_t cases_per_branch = 16;
  LengthRange facts_length{18, 26};
  LengthRange holding_length{10, 14};
  double noise_rate = 0.0;  // share of case tokens replaced by off-branch keywords
  std::uint64_t seed = 7;

  void validate() const;
};

struct BranchLabel {
  std::string case_id;
  std::string article_id;
  std::size_t branch_index = 0;

  /// "<article_id>#<branch_index>"
  std::string name() const { return article_id + "#" + std::to_string(branch_index); }
};

struct SynthCorpus {
  std::vector<ArticleSpec> articles;
  std::vector<CaseDocument> cases;
  std::vector<BranchLabel> labels;  // aligned with cases
};

/// Article a has one act: a shared article keyword followed by one slot of
/// `branches_per_article` parallel phrases. Each case's holding is its branch's
/// keywords (plus noise), its facts a subset of them mixed with filler tokens.
SynthCorpus generate(const SynthSpec& spec);

/// Queries, candidate pool and graded labels carved from a synthetic corpus:
/// grade 2 for the same branch, 1 for the same article, 0 otherwise.
struct RetrievalSet {
  std::vector<QueryCase> queries;
  std::vector<CaseDocument> candidates;
  QrelSet qrels;
};

/// Splits each branch's cases: the first `train_per_branch` go to training,
/// the next `queries_per_branch` become queries and the rest candidates.
struct SynthSplit {
  std::vector<CaseDocument> train;
  std::vector<BranchLabel> train_labels;
  RetrievalSet eval;
  std::vector<BranchLabel> candidate_labels;
};
SynthSplit split_corpus(const SynthCorpus& corpus, std::size_t train_per_branch, std::size_t queries_per_branch);

std::string labels_to_tsv(const std::vector<BranchLabel>& labels);
std::vector<BranchLabel> labels_from_tsv(const std::string& text);

}  // namespace caseenc
