#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "caseenc/case_document.hpp"
#include "caseenc/model.hpp"

namespace caseenc {

struct CandidatePool {
  std::string query_id;
  std::vector<CaseDocument> candidates;
};

/// Graded relevance labels. Pairs without a label have grade 0.
class QrelSet {
 public:
  void set(const std::string& query_id, const std::string& case_id, int grade);
  int grade(const std::string& query_id, const std::string& case_id) const;
  bool has_query(const std::string& query_id) const { return grades_.count(query_id) != 0; }
  const std::map<std::string, std::map<std::string, int>>& all() const { return grades_; }

  /// "query_id<TAB>case_id<TAB>grade" per line.
  std::string to_tsv() const;
  static QrelSet from_tsv(const std::string& text);

 private:
  std::map<std::string, std::map<std::string, int>> grades_;
};

struct RankedList {
  std::string query_id;
  std::vector<std::string> case_ids;  // best first
  std::vector<double> scores;         // non-increasing
};

/// Dual-encoder ranking: query facts and candidate documents embedded
/// independently, ordered by cosine similarity, ties by candidate id.
RankedList rank(const QueryCase& query, const CandidatePool& pool, const CaseEncoderModel& model);

/// Ranks every query against one shared pool, embedding each candidate once.
std::vector<RankedList> rank_all(const std::vector<QueryCase>& queries, const std::vector<CaseDocument>& pool,
                                 const CaseEncoderModel& model);

/// Orders precomputed scores the same way rank() does.
RankedList rank_by_scores(const std::string& query_id, const std::vector<std::string>& case_ids,
                          const std::vector<double>& scores);

/// DCG with gain 2^grade - 1 and discount 1/log2(rank + 1), normalized by the
/// ideal DCG over the ranked pool. 0 when no candidate is relevant.
double ndcg_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k);

struct MetricTable {
  std::vector<std::size_t> ks;
  std::map<std::string, std::vector<double>> per_query;  // query_id -> value per k
  std::vector<double> means;
  std::size_t skipped = 0;

  std::string to_json() const;
};

/// Per-k mean NDCG over runs. Throws listing queries that have no qrels.
/// With skip_unjudged, queries whose pool has no relevant case are left out.
MetricTable evaluate(const std::vector<RankedList>& runs, const QrelSet& qrels,
                     const std::vector<std::size_t>& ks = {10, 20, 30}, bool skip_unjudged = false);

/// "query_id<TAB>rank<TAB>case_id<TAB>score", ranks from 1.
std::string runs_to_tsv(const std::vector<RankedList>& runs);
std::vector<RankedList> runs_from_tsv(const std::string& text);

struct Projection2D {
  Matrix coords;                  // n x 2
  Matrix components;              // 2 x H, unit rows
  Eigen::VectorXd eigenvalues;    // all covariance eigenvalues, descending
  double explained_variance = 0;  // share of the top two
};

/// Exact PCA via eigendecomposition of the covariance; each component's
/// largest-magnitude entry is made positive. Needs at least 2 rows.
Projection2D pca2d(const Matrix& points);

enum class ProjectionMode { kNone, kPca2d };

/// CSV with header. Rows are case_id,label,e0..e{H-1} or case_id,label,x,y.
std::string export_embeddings(const std::vector<std::string>& case_ids, const std::vector<std::string>& labels,
                              const Matrix& embeddings, ProjectionMode mode);

}  // namespace caseenc
