#include "caseenc/bcl_loss.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "caseenc/error.hpp"

namespace caseenc {

void BclHyperParams::validate() const {
  if (!(gamma > 0.0)) throw ValidationError("BCL gamma must be positive");
  if (!(margin_neg < margin_pos)) throw ValidationError("BCL requires margin_neg < margin_pos");
  if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("lambda must be finite and nonnegative");
}

double embedding_cosine(const Matrix& e, std::size_t a, std::size_t b) {
  const auto ra = e.row(static_cast<Eigen::Index>(a));
  const auto rb = e.row(static_cast<Eigen::Index>(b));
  const double na = ra.norm(), nb = rb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ra.dot(rb) / (na * nb);
}

std::vector<AnchorPairs> collect_pairs(const Matrix& embeddings, const BatchPartition& partition) {
  const std::size_t n = partition.case_ids.size();
  if (static_cast<std::size_t>(embeddings.rows()) != n || partition.labels.size() != n)
    throw ValidationError("partition does not cover the embedding batch");
  std::vector<AnchorPairs> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    AnchorPairs& p = out[a];
    p.anchor = a;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const double s = embedding_cosine(embeddings, a, b);
      if (partition.labels[a] == partition.labels[b]) {
        p.pos_index.push_back(b);
        p.s_p.push_back(s);
        p.w_p.push_back(std::max(partition.weight(a, b), partition.weight(b, a)));
      } else {
        p.neg_index.push_back(b);
        p.s_n.push_back(s);
      }
    }
  }
  return out;
}

double alpha_p(double w_p, double s_p, const BclHyperParams& hp) {
  return std::abs(std::exp(w_p - 1.0) * hp.optimum_pos - s_p);
}

double alpha_n(double s_n, const BclHyperParams& hp) { return std::max(s_n - hp.optimum_neg, 0.0); }

namespace {

struct AnchorTerms {
  double value = 0.0;
  double dz = 0.0;                // d loss / d z where z = lse_n + lse_p
  std::vector<double> d_s_p;      // d loss / d s_p
  std::vector<double> d_s_n;      // d loss / d s_n
};

double log_sum_exp(const std::vector<double>& x, std::vector<double>* softmax) {
  const double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  if (softmax) {
    softmax->resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) (*softmax)[i] = std::exp(x[i] - m) / sum;
  }
  return m + std::log(sum);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

AnchorTerms anchor_terms(const AnchorPairs& p, const BclHyperParams& hp, bool with_grad) {
  AnchorTerms t;
  if (!p.eligible()) return t;
  const double g = hp.gamma;

  std::vector<double> logit_n(p.s_n.size()), logit_p(p.s_p.size());
  for (std::size_t j = 0; j < p.s_n.size(); ++j) logit_n[j] = g * alpha_n(p.s_n[j], hp) * (p.s_n[j] - hp.margin_neg);
  for (std::size_t i = 0; i < p.s_p.size(); ++i)
    logit_p[i] = -g * alpha_p(p.w_p[i], p.s_p[i], hp) * (p.s_p[i] - hp.margin_pos);

  std::vector<double> soft_n, soft_p;
  const double z = log_sum_exp(logit_n, with_grad ? &soft_n : nullptr) +
                   log_sum_exp(logit_p, with_grad ? &soft_p : nullptr);
  t.value = softplus(z);
  if (!with_grad) return t;

  t.dz = sigmoid(z);
  t.d_s_n.resize(p.s_n.size());
  for (std::size_t j = 0; j < p.s_n.size(); ++j) {
    const double s = p.s_n[j];
    const double d_alpha = s > hp.optimum_neg ? 1.0 : 0.0;
    const double d_logit = g * (alpha_n(s, hp) + (s - hp.margin_neg) * d_alpha);
    t.d_s_n[j] = t.dz * soft_n[j] * d_logit;
  }
  t.d_s_p.resize(p.s_p.size());
  for (std::size_t i = 0; i < p.s_p.size(); ++i) {
    const double s = p.s_p[i];
    const double target = std::exp(p.w_p[i] - 1.0) * hp.optimum_pos;
    const double d_alpha = -sign(target - s);
    const double d_logit = -g * (alpha_p(p.w_p[i], s, hp) + (s - hp.margin_pos) * d_alpha);
    t.d_s_p[i] = t.dz * soft_p[i] * d_logit;
  }
  return t;
}

// d cos(a, b) / d a
Eigen::RowVectorXd cosine_grad(const Matrix& e, std::size_t a, std::size_t b) {
  const auto ra = e.row(static_cast<Eigen::Index>(a));
  const auto rb = e.row(static_cast<Eigen::Index>(b));
  const double na = ra.norm(), nb = rb.norm();
  if (na == 0.0 || nb == 0.0) return Eigen::RowVectorXd::Zero(e.cols());
  const double s = ra.dot(rb) / (na * nb);
  return rb / (na * nb) - s * ra / (na * na);
}

}  // namespace

double anchor_loss(const AnchorPairs& pairs, const BclHyperParams& hp) {
  return anchor_terms(pairs, hp, false).value;
}

double bcl_value(const std::vector<AnchorPairs>& pairs, const BclHyperParams& hp) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    if (!p.eligible()) continue;
    sum += anchor_loss(p, hp);
    ++count;
  }
  const double v = count == 0 ? 0.0 : sum / static_cast<double>(count);
  if (!std::isfinite(v)) throw DivergenceError("BCL value is not finite");
  return v;
}

BclResult bcl_gradient(const Matrix& embeddings, const BatchPartition& partition, const BclHyperParams& hp) {
  const auto pairs = collect_pairs(embeddings, partition);
  BclResult r;
  r.gradient = Matrix::Zero(embeddings.rows(), embeddings.cols());
  std::vector<AnchorTerms> terms;
  terms.reserve(pairs.size());
  for (const auto& p : pairs) {
    terms.push_back(anchor_terms(p, hp, true));
    if (p.eligible()) {
      r.value += terms.back().value;
      ++r.eligible_anchors;
    }
  }
  if (r.eligible_anchors == 0) return r;
  const double inv = 1.0 / static_cast<double>(r.eligible_anchors);
  r.value *= inv;

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    if (!p.eligible()) continue;
    const auto a = static_cast<Eigen::Index>(p.anchor);
    auto scatter = [&](std::size_t b, double d_s) {
      if (d_s == 0.0) return;
      r.gradient.row(a) += inv * d_s * cosine_grad(embeddings, p.anchor, b);
      r.gradient.row(static_cast<Eigen::Index>(b)) += inv * d_s * cosine_grad(embeddings, b, p.anchor);
    };
    for (std::size_t i = 0; i < p.pos_index.size(); ++i) scatter(p.pos_index[i], terms[k].d_s_p[i]);
    for (std::size_t j = 0; j < p.neg_index.size(); ++j) scatter(p.neg_index[j], terms[k].d_s_n[j]);
  }
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) throw DivergenceError("BCL gradient is not finite");
  return r;
}

std::string bcl_diagnostics(const std::vector<AnchorPairs>& pairs, const BclHyperParams& hp) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::json line = {{"anchor", p.anchor},
                           {"K", p.s_p.size()},
                           {"L", p.s_n.size()},
                           {"loss", anchor_loss(p, hp)},
                           {"eligible", p.eligible()}};
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace caseenc
