#include "caseenc/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/io.hpp"

namespace caseenc {

// ---------------------------------------------------------------- qrels

void QrelSet::set(const std::string& query_id, const std::string& case_id, int grade) {
  if (grade < 0) throw ValidationError("negative relevance grade for (" + query_id + ", " + case_id + ")");
  grades_[query_id][case_id] = grade;
}

int QrelSet::grade(const std::string& query_id, const std::string& case_id) const {
  auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  auto c = q->second.find(case_id);
  return c == q->second.end() ? 0 : c->second;
}

std::string QrelSet::to_tsv() const {
  std::string out;
  for (const auto& [q, cases] : grades_)
    for (const auto& [c, g] : cases) out += q + "\t" + c + "\t" + std::to_string(g) + "\n";
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split_tabs(line), lineno);
  }
}

long parse_integer(const std::string& s, const std::string& what, std::size_t lineno) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(lineno) + ": " + what + " '" + s + "' is not an integer");
  }
}

}  // namespace

QrelSet QrelSet::from_tsv(const std::string& text) {
  QrelSet q;
  for_each_line(text, [&](const std::vector<std::string>& f, std::size_t lineno) {
    if (f.size() != 3) throw ParseError("qrels line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    q.set(f[0], f[1], static_cast<int>(parse_integer(f[2], "grade", lineno)));
  });
  return q;
}

// ---------------------------------------------------------------- ranking

RankedList rank_by_scores(const std::string& query_id, const std::vector<std::string>& case_ids,
                          const std::vector<double>& scores) {
  std::vector<std::size_t> order(case_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return case_ids[a] < case_ids[b];
  });
  RankedList r{query_id, {}, {}};
  for (std::size_t i : order) {
    r.case_ids.push_back(case_ids[i]);
    r.scores.push_back(scores[i]);
  }
  return r;
}

namespace {

std::vector<double> cosine_scores(const Eigen::RowVectorXd& q, const Matrix& cands) {
  std::vector<double> out(static_cast<std::size_t>(cands.rows()));
  const double qn = q.norm();
  for (Eigen::Index i = 0; i < cands.rows(); ++i) {
    const double cn = cands.row(i).norm();
    out[static_cast<std::size_t>(i)] = (qn == 0.0 || cn == 0.0) ? 0.0 : q.dot(cands.row(i)) / (qn * cn);
  }
  return out;
}

void check_pool(const std::vector<CaseDocument>& pool) {
  if (pool.empty()) throw ValidationError("candidate pool is empty");
  std::set<std::string> seen;
  for (const auto& c : pool)
    if (!seen.insert(c.case_id).second) throw ValidationError("duplicate candidate '" + c.case_id + "' in pool");
}

}  // namespace

RankedList rank(const QueryCase& query, const CandidatePool& pool, const CaseEncoderModel& model) {
  check_pool(pool.candidates);
  const Matrix q = model.embed_queries({query.facts});
  const Matrix c = model.embed_candidates(pool.candidates);
  std::vector<std::string> ids;
  for (const auto& d : pool.candidates) ids.push_back(d.case_id);
  return rank_by_scores(query.query_id, ids, cosine_scores(q.row(0), c));
}

std::vector<RankedList> rank_all(const std::vector<QueryCase>& queries, const std::vector<CaseDocument>& pool,
                                 const CaseEncoderModel& model) {
  check_pool(pool);
  const Matrix c = model.embed_candidates(pool);
  std::vector<std::string> ids;
  for (const auto& d : pool) ids.push_back(d.case_id);
  std::vector<std::string> facts;
  for (const auto& q : queries) facts.push_back(q.facts);
  const Matrix qe = model.embed_queries(facts);
  std::vector<RankedList> out;
  for (std::size_t i = 0; i < queries.size(); ++i)
    out.push_back(rank_by_scores(queries[i].query_id, ids, cosine_scores(qe.row(static_cast<Eigen::Index>(i)), c)));
  return out;
}

// ---------------------------------------------------------------- metrics

double ndcg_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k) {
  if (k == 0) throw ValidationError("NDCG cutoff k must be at least 1");
  std::vector<int> grades;
  grades.reserve(ranked.case_ids.size());
  for (const auto& c : ranked.case_ids) grades.push_back(qrels.grade(ranked.query_id, c));

  auto dcg = [k](const std::vector<int>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(k, g.size()); ++i)
      s += (std::exp2(static_cast<double>(g[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    return s;
  };
  std::vector<int> ideal = grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  if (idcg == 0.0) return 0.0;
  return dcg(grades) / idcg;
}

MetricTable evaluate(const std::vector<RankedList>& runs, const QrelSet& qrels, const std::vector<std::size_t>& ks,
                     bool skip_unjudged) {
  std::vector<std::string> missing;
  for (const auto& r : runs)
    if (!qrels.has_query(r.query_id)) missing.push_back(r.query_id);
  if (!missing.empty()) {
    std::string msg = "no qrels for queries:";
    for (const auto& q : missing) msg += " " + q;
    throw ValidationError(msg);
  }

  MetricTable t;
  t.ks = ks;
  t.means.assign(ks.size(), 0.0);
  std::size_t counted = 0;
  for (const auto& r : runs) {
    std::vector<double> vals;
    bool any_relevant = false;
    for (const auto& c : r.case_ids) any_relevant = any_relevant || qrels.grade(r.query_id, c) > 0;
    if (skip_unjudged && !any_relevant) {
      ++t.skipped;
      continue;
    }
    for (std::size_t k : ks) vals.push_back(ndcg_at_k(r, qrels, k));
    for (std::size_t i = 0; i < ks.size(); ++i) t.means[i] += vals[i];
    t.per_query[r.query_id] = std::move(vals);
    ++counted;
  }
  if (counted > 0)
    for (double& m : t.means) m /= static_cast<double>(counted);
  return t;
}

std::string MetricTable::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json means_obj;
  for (std::size_t i = 0; i < ks.size(); ++i) means_obj["ndcg@" + std::to_string(ks[i])] = means[i];
  j["num_queries"] = per_query.size();
  j["skipped_queries"] = skipped;
  j["mean"] = std::move(means_obj);
  nlohmann::ordered_json pq;
  for (const auto& [q, vals] : per_query) {
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < ks.size(); ++i) row["ndcg@" + std::to_string(ks[i])] = vals[i];
    pq[q] = std::move(row);
  }
  j["per_query"] = std::move(pq);
  return j.dump(2) + "\n";
}

std::string runs_to_tsv(const std::vector<RankedList>& runs) {
  std::string out;
  for (const auto& r : runs)
    for (std::size_t i = 0; i < r.case_ids.size(); ++i)
      out += r.query_id + "\t" + std::to_string(i + 1) + "\t" + r.case_ids[i] + "\t" + format_double(r.scores[i]) + "\n";
  return out;
}

std::vector<RankedList> runs_from_tsv(const std::string& text) {
  std::vector<RankedList> runs;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::tuple<long, std::string, double>>> rows;
  for_each_line(text, [&](const std::vector<std::string>& f, std::size_t lineno) {
    if (f.size() != 4) throw ParseError("run line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    const long rank_pos = parse_integer(f[1], "rank", lineno);
    double score = 0.0;
    try {
      score = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ParseError("run line " + std::to_string(lineno) + ": bad score '" + f[3] + "'");
    }
    auto [it, fresh] = index.emplace(f[0], runs.size());
    if (fresh) {
      runs.push_back({f[0], {}, {}});
      rows.emplace_back();
    }
    rows[it->second].emplace_back(rank_pos, f[2], score);
  });
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    for (auto& [_, c, s] : rows[i]) {
      runs[i].case_ids.push_back(c);
      runs[i].scores.push_back(s);
    }
  }
  return runs;
}

// ---------------------------------------------------------------- embeddings

Projection2D pca2d(const Matrix& points) {
  if (points.rows() < 2) throw ValidationError("pca2d needs at least 2 cases");
  if (points.cols() < 2) throw ValidationError("pca2d needs at least 2 dimensions");
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Matrix centered = points.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  const Eigen::Index h = cov.rows();
  Projection2D out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.components.resize(2, h);
  for (int c = 0; c < 2; ++c) {
    Eigen::RowVectorXd v = solver.eigenvectors().col(h - 1 - c).transpose();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.row(c) = v;
  }
  out.coords = centered * out.components.transpose();
  const double total = out.eigenvalues.cwiseMax(0.0).sum();
  out.explained_variance = total > 0.0 ? (std::max(out.eigenvalues(0), 0.0) + std::max(out.eigenvalues(1), 0.0)) / total : 0.0;
  return out;
}

std::string export_embeddings(const std::vector<std::string>& case_ids, const std::vector<std::string>& labels,
                              const Matrix& embeddings, ProjectionMode mode) {
  if (case_ids.size() != static_cast<std::size_t>(embeddings.rows()) || labels.size() != case_ids.size())
    throw ValidationError("export_embeddings: ids, labels and rows must align");
  const Matrix values = mode == ProjectionMode::kPca2d ? pca2d(embeddings).coords : embeddings;
  std::string out = "case_id,label";
  if (mode == ProjectionMode::kPca2d) {
    out += ",x,y";
  } else {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += ",e" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t i = 0; i < case_ids.size(); ++i) {
    out += case_ids[i] + "," + labels[i];
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += "," + format_double(values(static_cast<Eigen::Index>(i), c));
    out += '\n';
  }
  return out;
}

}  // namespace caseenc
