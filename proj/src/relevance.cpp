#include "caseenc/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <sstream>
#include <tuple>

#include "caseenc/error.hpp"
#include "caseenc/io.hpp"

namespace caseenc {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine of vectors with different lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

long argmax_nonzero(std::span<const double> v) {
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return -1;
  return static_cast<long>(std::max_element(v.begin(), v.end()) - v.begin());
}

namespace {

std::vector<std::string> shared_articles(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> sa(a), sb(b), out;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(out));
  return out;
}

std::size_t unique_count(const std::vector<std::string>& a) {
  std::vector<std::string> s(a);
  std::sort(s.begin(), s.end());
  return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

}  // namespace

double rel(const SimilarityProfile& pi, const SimilarityProfile& pj, const std::vector<std::string>& articles_i,
           const std::vector<std::string>& articles_j) {
  const auto shared = shared_articles(articles_i, articles_j);
  if (shared.empty()) return 0.0;

  double best = 0.0;
  for (const auto& k : shared) {
    const auto& vi = pi.vector_for(k);
    const auto& vj = pj.vector_for(k);
    const long ai = argmax_nonzero(vi);
    if (ai >= 0 && ai == argmax_nonzero(vj)) return 1.0;
    best = std::max(best, cosine(vi, vj));
  }
  return best;
}

RelevanceWeight weight(const CaseDocument& ci, const CaseDocument& cj, const SimilarityProfile& pi,
                       const SimilarityProfile& pj) {
  if (ci.articles.empty()) throw ValidationError("case '" + ci.case_id + "' has an empty article set");
  const auto shared = shared_articles(ci.articles, cj.articles);
  RelevanceWeight w{ci.case_id, cj.case_id, 0.0};
  if (shared.empty()) return w;
  const double overlap = static_cast<double>(shared.size()) / static_cast<double>(unique_count(ci.articles));
  w.value = overlap * rel(pi, pj, ci.articles, cj.articles);
  return w;
}

WeightTable::WeightTable(std::vector<std::string> case_ids)
    : ids_(std::move(case_ids)), values_(ids_.size() * ids_.size(), 0.0) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!pos_.emplace(ids_[i], i).second)
      throw ValidationError("duplicate case id '" + ids_[i] + "' in weight table");
  }
}

std::size_t WeightTable::index_of(const std::string& case_id) const {
  auto it = pos_.find(case_id);
  if (it == pos_.end()) throw ValidationError("case '" + case_id + "' has no weights");
  return it->second;
}

std::string WeightTable::to_csv() const {
  std::string out = "source_id,target_id,value\n";
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      out += ids_[i];
      out += ',';
      out += ids_[j];
      out += ',';
      out += format_double(at(i, j));
      out += '\n';
    }
  }
  return out;
}

WeightTable WeightTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::tuple<std::string, std::string, double>> rows;
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("source_id,", 0) == 0)) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ParseError("weights line " + std::to_string(lineno) + ": expected 3 fields");
    std::string src = line.substr(0, c1), dst = line.substr(c1 + 1, c2 - c1 - 1);
    double v = 0.0;
    try {
      v = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ParseError("weights line " + std::to_string(lineno) + ": bad value");
    }
    for (const auto* id : {&src, &dst}) {
      if (seen.emplace(*id, ids.size()).second) ids.push_back(*id);
    }
    rows.emplace_back(std::move(src), std::move(dst), v);
  }
  // Pairs absent from the file stay NaN so consumers can reject them.
  WeightTable table(ids);
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < table.size(); ++j) table.at(i, j) = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [s, d, v] : rows) table.at(table.index_of(s), table.index_of(d)) = v;
  return table;
}

WeightTable pairwise_weights(const std::vector<CaseDocument>& cases, const std::vector<SimilarityProfile>& profiles) {
  if (cases.size() != profiles.size()) throw ValidationError("every case needs a similarity profile");
  std::vector<std::string> ids;
  ids.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (profiles[i].case_id != cases[i].case_id)
      throw ValidationError("profile order does not match case order at '" + cases[i].case_id + "'");
    ids.push_back(cases[i].case_id);
  }
  WeightTable table(std::move(ids));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    for (std::size_t j = 0; j < cases.size(); ++j) {
      table.at(i, j) = i == j ? 1.0 : weight(cases[i], cases[j], profiles[i], profiles[j]).value;
    }
  }
  return table;
}

}  // namespace caseenc
