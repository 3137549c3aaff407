#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "caseenc/article_corpus.hpp"
#include "caseenc/case_document.hpp"
#include "caseenc/tokenizer.hpp"

namespace caseenc {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// Okapi BM25 statistics over the keyword sequences of an article corpus.
/// Immutable after construction; scoring is safe from concurrent readers.
class Bm25Index {
 public:
  Bm25Index(const ArticleCorpus& corpus, Bm25Params params = {});

  std::size_t corpus_size() const { return doc_lengths_.size(); }
  double average_length() const { return avg_length_; }
  std::size_t document_frequency(const std::string& token) const;
  std::size_t document_length(std::size_t doc) const { return doc_lengths_.at(doc); }
  std::size_t term_count(std::size_t doc, const std::string& token) const;
  const Bm25Params& params() const { return params_; }

  /// log((N - df + 0.5) / (df + 0.5) + 1), never negative.
  double idf(const std::string& token) const;

  /// Score of document `doc` (global branch position) against a query; each
  /// query token contributes once per occurrence.
  double score(std::size_t doc, const std::vector<std::string>& query) const;
  /// Same, addressed by branch identity; throws if the branch was not indexed.
  double score(const UnambiguousArticle& seq, const std::vector<std::string>& query) const;

 private:
  Bm25Params params_;
  double avg_length_ = 0.0;
  std::vector<std::size_t> doc_lengths_;
  std::vector<std::unordered_map<std::string, std::size_t>> term_counts_;
  std::unordered_map<std::string, std::size_t> doc_freq_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> doc_of_branch_;
};

inline Bm25Index build_index(const ArticleCorpus& corpus, Bm25Params params = {}) {
  return Bm25Index(corpus, params);
}

inline double bm25_score(const UnambiguousArticle& seq, const std::vector<std::string>& query,
                         const Bm25Index& index) {
  return index.score(seq, query);
}

/// Per-article BM25 vectors of a case's holding against every branch of the corpus.
struct SimilarityProfile {
  std::string case_id;
  std::map<std::string, std::vector<double>> vectors;  // article_id -> length T_k

  const std::vector<double>& vector_for(const std::string& article_id) const;
  bool operator==(const SimilarityProfile&) const = default;
};

SimilarityProfile similarity_profile(const CaseDocument& doc, const ArticleCorpus& corpus,
                                     const Bm25Index& index, const TokenizerConfig& cfg = {});

std::vector<SimilarityProfile> similarity_profiles(const std::vector<CaseDocument>& docs,
                                                   const ArticleCorpus& corpus,
                                                   const Bm25Index& index,
                                                   const TokenizerConfig& cfg = {});

}  // namespace caseenc
