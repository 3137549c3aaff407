#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "caseenc/bm25.hpp"
#include "caseenc/case_document.hpp"

namespace caseenc {

/// Cosine similarity; 0 when either vector is all zeros.
double cosine(std::span<const double> a, std::span<const double> b);

/// Index of the maximum, lowest index on ties. Returns -1 for an all-zero vector.
long argmax_nonzero(std::span<const double> v);

/// Branch-level relevance of two cases over their shared articles. 1 when
/// some shared article has the same (nonzero) argmax branch for both cases,
/// else the maximum cosine over shared articles, 0 without shared articles.
double rel(const SimilarityProfile& pi, const SimilarityProfile& pj,
           const std::vector<std::string>& articles_i, const std::vector<std::string>& articles_j);

struct RelevanceWeight {
  std::string source_id;
  std::string target_id;
  double value = 0.0;
};

/// Directional weight |A_i ∩ A_j| / |A_i| × rel(i, j).
RelevanceWeight weight(const CaseDocument& ci, const CaseDocument& cj, const SimilarityProfile& pi,
                       const SimilarityProfile& pj);

/// Dense ordered-pair weight table; row = source, column = target.
class WeightTable {
 public:
  WeightTable() = default;
  explicit WeightTable(std::vector<std::string> case_ids);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& case_ids() const { return ids_; }
  std::size_t index_of(const std::string& case_id) const;
  bool contains(const std::string& case_id) const { return pos_.count(case_id) != 0; }

  double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values_[i * ids_.size() + j]; }
  double at(const std::string& src, const std::string& dst) const {
    return at(index_of(src), index_of(dst));
  }

  /// Rows "source_id,target_id,value" under a header line.
  std::string to_csv() const;
  static WeightTable from_csv(const std::string& text);

  bool operator==(const WeightTable& other) const {
    return ids_ == other.ids_ && values_ == other.values_;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> pos_;
  std::vector<double> values_;
};

/// Weights for every ordered pair; profiles[i] belongs to cases[i].
WeightTable pairwise_weights(const std::vector<CaseDocument>& cases,
                             const std::vector<SimilarityProfile>& profiles);

}  // namespace caseenc
