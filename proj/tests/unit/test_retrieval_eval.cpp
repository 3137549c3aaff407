#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "caseenc/error.hpp"
#include "caseenc/retrieval_eval.hpp"
#include "oracles.hpp"

using namespace caseenc;

namespace {

// Ranked list over ids d0.. with the given grades by rank.
std::pair<RankedList, QrelSet> graded_run(const std::vector<int>& grades, const std::string& q = "q") {
  RankedList r{q, {}, {}};
  QrelSet qrels;
  for (std::size_t i = 0; i < grades.size(); ++i) {
    r.case_ids.push_back("d" + std::to_string(i));
    r.scores.push_back(1.0 - 0.01 * static_cast<double>(i));
    qrels.set(q, r.case_ids.back(), grades[i]);
  }
  return {r, qrels};
}

CaseEncoderModel tiny_model() {
  CaseEncoderModel m;
  m.tokenizer = {TokenizerMode::kWhitespace, true, true};
  m.vocab = Vocabulary::build({{"alpha", "beta", "gamma", "delta", "eps"}});
  m.config.vocab_size = m.vocab.size();
  m.config.hidden = 8;
  m.config.layers = 1;
  m.config.heads = 2;
  m.config.ffn = 16;
  m.config.max_length = 16;
  m.config.init_std = 0.3;
  m.params = init_params(m.config);
  return m;
}

}  // namespace

TEST(Ndcg, HandExample) {
  auto [run, qrels] = graded_run({0, 2, 1});
  // DCG = 3/log2(3) + 1/2, IDCG = 3 + 1/log2(3), both recomputed by hand.
  EXPECT_NEAR(ndcg_at_k(run, qrels, 3), 0.6590018048024133, 1e-12);
  EXPECT_NEAR(ndcg_at_k(run, qrels, 3), (3 / std::log2(3.0) + 0.5) / (3 + 1 / std::log2(3.0)), 1e-15);
}

TEST(Ndcg, IdealAndZero) {
  auto [ideal, q1] = graded_run({2, 2, 1, 0});
  EXPECT_DOUBLE_EQ(ndcg_at_k(ideal, q1, 10), 1.0);
  auto [zero, q2] = graded_run({0, 0, 0});
  EXPECT_EQ(ndcg_at_k(zero, q2, 10), 0.0);
}

TEST(Ndcg, IdealDcgUsesWholePool) {
  // A relevant document below the cutoff still counts in the ideal ranking.
  auto [run, qrels] = graded_run({0, 0, 2});
  EXPECT_EQ(ndcg_at_k(run, qrels, 2), 0.0);
  EXPECT_NEAR(ndcg_at_k(run, qrels, 3), 0.5, 1e-15);
}

TEST(Ndcg, BoundedAndMonotoneInGrades) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 300; ++t) {
    std::vector<int> g(1 + rng() % 12);
    for (auto& x : g) x = static_cast<int>(rng() % 3);
    auto [run, qrels] = graded_run(g);
    const std::size_t k = 1 + rng() % 12;
    const double v = ndcg_at_k(run, qrels, k);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
    // Raising a grade at a rank within the cutoff, while keeping the pool's
    // ideal unchanged, cannot hurt: swap a better grade forward.
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      if (g[i] < g[i + 1]) {
        auto swapped = g;
        std::swap(swapped[i], swapped[i + 1]);
        auto [r2, q2] = graded_run(swapped);
        EXPECT_GE(ndcg_at_k(r2, q2, k) + 1e-12, v);
        break;
      }
    }
  }
}

TEST(Ndcg, TiedBlockWithEqualGradesIsPermutationInvariant) {
  auto [run, qrels] = graded_run({2, 1, 1, 1, 0});
  const double v = ndcg_at_k(run, qrels, 4);
  std::swap(run.case_ids[1], run.case_ids[3]);
  EXPECT_EQ(ndcg_at_k(run, qrels, 4), v);
}

TEST(Evaluate, MeansAndErrors) {
  auto [a, qa] = graded_run({2, 1}, "qa");
  auto [b, qb] = graded_run({0, 0}, "qb");
  QrelSet all = qa;
  for (const auto& [c, g] : qb.all().at("qb")) all.set("qb", c, g);
  const auto m = evaluate({a, b}, all, {10});
  ASSERT_EQ(m.means.size(), 1u);
  EXPECT_DOUBLE_EQ(m.means[0], 0.5);
  EXPECT_EQ(m.per_query.at("qa")[0], ndcg_at_k(a, all, 10));
  const auto skipped = evaluate({a, b}, all, {10}, true);
  EXPECT_DOUBLE_EQ(skipped.means[0], 1.0);
  EXPECT_EQ(skipped.skipped, 1u);

  RankedList lost{"qz", {"d0"}, {1.0}};
  try {
    evaluate({a, lost}, all);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("qz"), std::string::npos);
  }
  const std::string json = m.to_json();
  EXPECT_NE(json.find("ndcg@10"), std::string::npos);
}

TEST(Evaluate, DefaultCutoffs) {
  auto [a, qa] = graded_run({1, 0, 2});
  const auto m = evaluate({a}, qa);
  EXPECT_EQ(m.ks, (std::vector<std::size_t>{10, 20, 30}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m.means[i], ndcg_at_k(a, qa, m.ks[i]));
}

TEST(RunsTsv, RoundTrip) {
  RankedList r{"q1", {"a", "b"}, {0.5, 0.25}};
  const auto back = runs_from_tsv(runs_to_tsv({r}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].case_ids, r.case_ids);
  EXPECT_EQ(back[0].scores, r.scores);
}

TEST(Qrels, TsvRoundTrip) {
  QrelSet q;
  q.set("q1", "a", 2);
  q.set("q1", "b", 0);
  q.set("q2", "a", 1);
  const auto back = QrelSet::from_tsv(q.to_tsv());
  EXPECT_EQ(back.all(), q.all());
  EXPECT_EQ(back.grade("q2", "zz"), 0);
  EXPECT_THROW(q.set("q1", "a", -1), ValidationError);
  EXPECT_THROW(QrelSet::from_tsv("q1\ta\n"), ParseError);
}

TEST(RankByScores, TiesBrokenById) {
  const auto r = rank_by_scores("q", {"c", "a", "b"}, {0.5, 0.5, 0.9});
  EXPECT_EQ(r.case_ids, (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_TRUE(std::is_sorted(r.scores.rbegin(), r.scores.rend()));
}

TEST(Rank, DualEncoderBehaviour) {
  const auto m = tiny_model();
  CaseDocument same{"x1", "alpha beta", "", "", {"A"}};
  CaseDocument other{"x0", "gamma delta eps", "eps", "", {"A"}};
  QueryCase q{"q", "alpha beta"};
  EXPECT_THROW(rank(q, CandidatePool{"q", {}}, m), ValidationError);
  const auto single = rank(q, CandidatePool{"q", {other}}, m);
  EXPECT_EQ(single.case_ids, (std::vector<std::string>{"x0"}));
  // Empty holding makes the candidate input identical to the query input.
  const auto r = rank(q, CandidatePool{"q", {other, same}}, m);
  EXPECT_EQ(r.case_ids.front(), "x1");
  EXPECT_NEAR(r.scores.front(), 1.0, 1e-12);
  const auto reversed = rank(q, CandidatePool{"q", {same, other}}, m);
  EXPECT_EQ(reversed.case_ids, r.case_ids);
  EXPECT_EQ(reversed.scores, r.scores);
  const auto all = rank_all({q}, {other, same}, m);
  EXPECT_EQ(all[0].case_ids, r.case_ids);
  EXPECT_EQ(all[0].scores, r.scores);
}

TEST(Pca2d, RecoversPlanarDistances) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  Matrix plane(20, 2);
  for (Eigen::Index i = 0; i < plane.size(); ++i) plane.data()[i] = g(rng);
  Matrix basis(2, 6);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = g(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(basis.transpose()).householderQ();
  const Matrix embed = plane * q.leftCols(2).transpose() + Matrix::Constant(20, 6, 0.7);
  const auto pr = pca2d(embed);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      EXPECT_NEAR((pr.coords.row(i) - pr.coords.row(j)).norm(), (plane.row(i) - plane.row(j)).norm(), 1e-9);
  EXPECT_NEAR(pr.explained_variance, 1.0, 1e-9);
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg;
    pr.components.row(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(pr.components(c, arg), 0.0);
  }
}

TEST(Pca2d, EigenvaluesMatchJacobiOracle) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 1);
  Matrix pts(12, 5);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = g(rng) * (1 + i % 5);
  const auto pr = pca2d(pts);
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  const Matrix centered = pts.rowwise() - mean;
  const Matrix cov = centered.transpose() * centered / 11.0;
  std::vector<std::vector<double>> c(5, std::vector<double>(5));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) c[i][j] = cov(i, j);
  const auto ev = oracle::jacobi_eigenvalues(c);
  double total = 0;
  for (double v : ev) total += v;
  EXPECT_NEAR(pr.explained_variance, (ev[0] + ev[1]) / total, 1e-9);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(pr.eigenvalues[i], ev[static_cast<std::size_t>(i)], 1e-9);
  EXPECT_THROW(pca2d(pts.topRows(1)), ValidationError);
}

TEST(ExportEmbeddings, Shapes) {
  Matrix e = Matrix::Random(5, 64);
  std::vector<std::string> ids{"a", "b", "c", "d", "e"}, labels{"x", "x", "y", "y", "z"};
  const std::string raw = export_embeddings(ids, labels, e, ProjectionMode::kNone);
  std::istringstream in(raw);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 65);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 65);
  }
  EXPECT_EQ(rows, 5);
  const std::string proj = export_embeddings(ids, labels, e, ProjectionMode::kPca2d);
  EXPECT_EQ(proj.substr(0, proj.find('\n')), "case_id,label,x,y");
  EXPECT_THROW(export_embeddings({"a"}, {"x"}, e.topRows(1), ProjectionMode::kPca2d), ValidationError);
}
