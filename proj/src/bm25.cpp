#include "caseenc/bm25.hpp"

#include <cmath>

#include "caseenc/error.hpp"

namespace caseenc {

Bm25Index::Bm25Index(const ArticleCorpus& corpus, Bm25Params params) : params_(params) {
  if (corpus.empty()) throw ValidationError("cannot build a BM25 index over an empty corpus");
  if (!(params.k1 > 0.0)) throw ValidationError("BM25 k1 must be positive");
  if (!(params.b >= 0.0 && params.b <= 1.0)) throw ValidationError("BM25 b must lie in [0, 1]");

  const auto& branches = corpus.branches();
  doc_lengths_.reserve(branches.size());
  term_counts_.resize(branches.size());
  std::size_t total = 0;
  for (std::size_t d = 0; d < branches.size(); ++d) {
    const auto& seq = branches[d].keyword_sequence;
    for (const auto& tok : seq) ++term_counts_[d][tok];
    for (const auto& [tok, _] : term_counts_[d]) ++doc_freq_[tok];
    doc_lengths_.push_back(seq.size());
    total += seq.size();
    doc_of_branch_[{branches[d].article_id, branches[d].branch_index}] = d;
  }
  avg_length_ = static_cast<double>(total) / static_cast<double>(branches.size());
}

std::size_t Bm25Index::document_frequency(const std::string& token) const {
  auto it = doc_freq_.find(token);
  return it == doc_freq_.end() ? 0 : it->second;
}

std::size_t Bm25Index::term_count(std::size_t doc, const std::string& token) const {
  const auto& counts = term_counts_.at(doc);
  auto it = counts.find(token);
  return it == counts.end() ? 0 : it->second;
}

double Bm25Index::idf(const std::string& token) const {
  const double n = static_cast<double>(corpus_size());
  const double df = static_cast<double>(document_frequency(token));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::score(std::size_t doc, const std::vector<std::string>& query) const {
  if (doc >= corpus_size()) throw ValidationError("document " + std::to_string(doc) + " is not indexed");
  const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc]) / avg_length_);
  double total = 0.0;
  for (const auto& tok : query) {
    const std::size_t tf = term_count(doc, tok);
    if (tf == 0) continue;
    const double f = static_cast<double>(tf);
    total += idf(tok) * f * (params_.k1 + 1.0) / (f + norm);
  }
  return total;
}

double Bm25Index::score(const UnambiguousArticle& seq, const std::vector<std::string>& query) const {
  auto it = doc_of_branch_.find({seq.article_id, seq.branch_index});
  if (it == doc_of_branch_.end())
    throw ValidationError("branch " + seq.article_id + "#" + std::to_string(seq.branch_index) +
                          " is not in the index");
  return score(it->second, query);
}

const std::vector<double>& SimilarityProfile::vector_for(const std::string& article_id) const {
  auto it = vectors.find(article_id);
  if (it == vectors.end())
    throw ValidationError("profile of case '" + case_id + "' has no vector for article '" + article_id + "'");
  return it->second;
}

SimilarityProfile similarity_profile(const CaseDocument& doc, const ArticleCorpus& corpus,
                                     const Bm25Index& index, const TokenizerConfig& cfg) {
  const auto holding = tokenize(doc.holding, cfg);
  if (holding.empty())
    throw ValidationError("case '" + doc.case_id + "' lacks usable Holding text");
  if (index.corpus_size() != corpus.size())
    throw ValidationError("BM25 index was not built over this corpus");

  SimilarityProfile profile{doc.case_id, {}};
  for (const auto& article_id : corpus.article_ids()) {
    auto range = corpus.article_range(article_id);
    std::vector<double> v(range.count);
    for (std::size_t t = 0; t < range.count; ++t) v[t] = index.score(range.begin + t, holding);
    profile.vectors.emplace(article_id, std::move(v));
  }
  return profile;
}

std::vector<SimilarityProfile> similarity_profiles(const std::vector<CaseDocument>& docs,
                                                   const ArticleCorpus& corpus, const Bm25Index& index,
                                                   const TokenizerConfig& cfg) {
  std::vector<SimilarityProfile> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(similarity_profile(d, corpus, index, cfg));
  return out;
}

}  // namespace caseenc
