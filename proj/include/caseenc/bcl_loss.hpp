#pragma once

#include <string>
#include <vector>

#include "caseenc/encoder.hpp"
#include "caseenc/sampler.hpp"

namespace caseenc {

struct BclHyperParams {
  double gamma = 16.0;          // scale factor
  double optimum_pos = 1.25;    // O_p
  double optimum_neg = 0.25;    // O_n
  double margin_pos = 0.75;     // Δ_p
  double margin_neg = 0.25;     // Δ_n
  double class_threshold = 0.25;  // W_T
  double lambda = 2.718281828459045e-6;

  void validate() const;
};

/// Similarities seen from one anchor: same-class pairs with their relevance
/// weights, and different-class pairs.
struct AnchorPairs {
  std::size_t anchor = 0;
  std::vector<std::size_t> pos_index;
  std::vector<double> s_p;
  std::vector<double> w_p;
  std::vector<std::size_t> neg_index;
  std::vector<double> s_n;

  bool eligible() const { return !s_p.empty() && !s_n.empty(); }
};

/// Cosine similarity of two embedding rows; 0 if either is the zero vector.
double embedding_cosine(const Matrix& e, std::size_t a, std::size_t b);

/// Per anchor: s_p over other members of its class with w_p = max(w_ab, w_ba),
/// s_n over every case outside its class.
std::vector<AnchorPairs> collect_pairs(const Matrix& embeddings, const BatchPartition& partition);

/// |e^(w_p - 1) · O_p - s_p|
double alpha_p(double w_p, double s_p, const BclHyperParams& hp);
/// max(s_n - O_n, 0)
double alpha_n(double s_n, const BclHyperParams& hp);

/// log[1 + Σ_j exp(γ α_n (s_n - Δ_n)) · Σ_i exp(-γ α_p (s_p - Δ_p))] for one
/// anchor, evaluated in log-sum-exp form. 0 for anchors lacking either side.
double anchor_loss(const AnchorPairs& pairs, const BclHyperParams& hp);

/// Mean anchor loss over anchors with at least one positive and one negative;
/// 0 when there are none.
double bcl_value(const std::vector<AnchorPairs>& pairs, const BclHyperParams& hp);

struct BclResult {
  double value = 0.0;
  Matrix gradient;  // d value / d embeddings, same shape as the embeddings
  std::size_t eligible_anchors = 0;
};

/// Value and exact gradient with respect to the embeddings; w_p is a
/// constant and d|x|/dx uses sign(x) with sign(0) = 0.
BclResult bcl_gradient(const Matrix& embeddings, const BatchPartition& partition, const BclHyperParams& hp);

/// One JSON line per anchor: anchor index, K, L and its loss term.
std::string bcl_diagnostics(const std::vector<AnchorPairs>& pairs, const BclHyperParams& hp);

}  // namespace caseenc
