#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "caseenc/encoder.hpp"
#include "caseenc/error.hpp"
#include "oracles.hpp"

using namespace caseenc;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.vocab_size = 12;
  c.hidden = 8;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 16;
  c.max_length = 8;
  c.seed = 99;
  // Larger than the training default so every gradient is well above finite-difference noise.
  c.init_std = 0.4;
  return c;
}

std::vector<Matrix*> tensors(EncoderParams& p) {
  std::vector<Matrix*> out;
  visit_tensors(p, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<std::string> tensor_names(EncoderParams& p) {
  std::vector<std::string> out;
  visit_tensors(p, [&](const std::string& n, Matrix&) { out.push_back(n); });
  return out;
}

// Scalar objective touching both the hidden states and the MLM head:
// Σ R ∘ hidden + mlm_loss(logits at positions).
struct Objective {
  const EncoderConfig& cfg;
  std::vector<int> ids;
  std::vector<std::size_t> positions;
  std::vector<int> targets;
  Matrix r;

  double value(const EncoderParams& p) const {
    const auto t = forward(p, cfg, ids);
    return (t.hidden.array() * r.array()).sum() + mlm_loss(mlm_logits(p, t, positions), targets).value;
  }

  void gradient(const EncoderParams& p, EncoderParams& g) const {
    const auto t = forward(p, cfg, ids);
    const auto loss = mlm_loss(mlm_logits(p, t, positions), targets);
    Matrix d_hidden = mlm_head_backward(p, t, positions, loss.d_logits, g);
    d_hidden += r;
    backward(p, cfg, t, d_hidden, g);
  }
};

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST(Vocabulary, SpecialsFirstAndRoundTrip) {
  auto v = Vocabulary::build({{"b", "a"}, {"c", "a"}});
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.token(kPad), "[PAD]");
  EXPECT_EQ(v.id("a"), 5);
  EXPECT_EQ(v.id("zz"), kUnk);
  EXPECT_EQ(Vocabulary::parse(v.serialize()), v);
  EXPECT_THROW(Vocabulary::parse("0\t[PAD]\n2\tx\n"), ParseError);
}

TEST(EncoderConfig, Validation) {
  auto c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.max_length = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.vocab_size = 5;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(InitParams, SeededAndShaped) {
  const auto c = tiny_config();
  auto a = init_params(c), b = init_params(c);
  auto ta = tensors(a), tb = tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i], *tb[i]);
  EXPECT_EQ(a.token_embedding.rows(), 12);
  EXPECT_EQ(a.token_embedding.cols(), 8);
  EXPECT_EQ(a.mlm_weight.rows(), 8);
  EXPECT_EQ(a.mlm_weight.cols(), 12);
  EXPECT_TRUE(all_finite(a));
  EXPECT_EQ(parameter_count(a), parameter_count(zeros_like(a)));
}

TEST(Forward, DeterministicAndWellFormed) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  const std::vector<int> ids{kCls, 5, 6, 7, kSep, kPad};
  const auto t1 = forward(p, c, ids);
  const auto t2 = forward(p, c, ids);
  EXPECT_EQ(t1.hidden, t2.hidden);
  EXPECT_EQ(t1.hidden.rows(), 6);
  EXPECT_EQ(t1.hidden.cols(), 8);
  for (const auto& probs : t1.layers[0].probs) {
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      EXPECT_NEAR(probs.row(i).sum(), 1.0, 1e-9);
      EXPECT_EQ(probs(i, 5), 0.0);  // PAD key receives no attention
    }
  }
}

TEST(Forward, LayerNormRowsAreStandardized) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> ids{kCls};
    for (int i = 0; i < 6; ++i) ids.push_back(5 + static_cast<int>(rng() % 7));
    const auto t = forward(p, c, ids);
    for (const NormCache* n : {&t.layers[0].ln1, &t.layers[0].ln2, &t.final_norm}) {
      for (Eigen::Index r = 0; r < n->normalized.rows(); ++r) {
        const auto row = n->normalized.row(r);
        const double mean = row.mean();
        const double var = (row.array() - mean).square().mean();
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-3);  // eps in the denominator shifts variance slightly below 1
      }
    }
  }
}

TEST(Forward, RejectsBadInput) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  EXPECT_THROW(forward(p, c, {}), ValidationError);
  EXPECT_THROW(forward(p, c, std::vector<int>(9, 5)), ValidationError);
  EXPECT_THROW(forward(p, c, {kCls, 40}), ValidationError);
  EXPECT_THROW(forward(p, c, {kPad, kPad}), ValidationError);
}

TEST(Encode, IdenticalRowsAndPermutationEquivariance) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  const std::vector<std::vector<int>> seqs{{kCls, 5, 6, kSep}, {kCls, 7, kSep}, {kCls, 5, 6, kSep}, {kCls, 9, 10, 11, kSep}};
  const auto e = encode(seqs, p, c, {"a", "b", "c", "d"});
  EXPECT_EQ(e.embeddings.rows(), 4);
  EXPECT_EQ(e.embeddings.cols(), 8);
  EXPECT_EQ(e.embeddings.row(0), e.embeddings.row(2));
  const std::vector<std::vector<int>> perm{seqs[3], seqs[1], seqs[0], seqs[2]};
  const auto ep = encode(perm, p, c);
  EXPECT_EQ(ep.embeddings.row(0), e.embeddings.row(3));
  EXPECT_EQ(ep.embeddings.row(1), e.embeddings.row(1));
  EXPECT_EQ(ep.embeddings.row(2), e.embeddings.row(0));
}

TEST(Encode, TruncatesOverLength) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  std::vector<int> longer{kCls, 5, 6, 7, 8, 9, 10, 11, 5, 6};
  std::vector<int> cut(longer.begin(), longer.begin() + 8);
  const auto e = encode({longer, cut}, p, c);
  EXPECT_EQ(e.truncated, 1u);
  EXPECT_EQ(e.embeddings.row(0), e.embeddings.row(1));
  EXPECT_THROW(encode({{5, 6}}, p, c), ValidationError);
}

TEST(MakeInput, Layout) {
  EXPECT_EQ(make_input({5, 6}, {}, 10), (std::vector<int>{kCls, 5, 6, kSep}));
  EXPECT_EQ(make_input({5}, {7}, 10), (std::vector<int>{kCls, 5, kSep, 7, kSep}));
  EXPECT_EQ(make_input({5, 6, 7}, {}, 3), (std::vector<int>{kCls, 5, 6}));
}

TEST(MlmMask, CountsAndDeterminism) {
  std::vector<int> ids{kCls};
  for (int i = 0; i < 20; ++i) ids.push_back(5 + i % 7);
  ids.push_back(kSep);
  const auto m = mlm_mask(ids, 17);
  EXPECT_EQ(m.positions.size(), 3u);
  EXPECT_EQ(m.targets.size(), 3u);
  const auto again = mlm_mask(ids, 17);
  EXPECT_EQ(m.positions, again.positions);
  EXPECT_EQ(m.input, again.input);
  for (std::size_t k = 0; k < m.positions.size(); ++k) {
    const auto pos = m.positions[k];
    EXPECT_NE(pos, 0u);
    EXPECT_NE(pos, ids.size() - 1);
    EXPECT_EQ(m.input[pos], kMask);
    EXPECT_EQ(m.targets[k], ids[pos]);
  }
  EXPECT_TRUE(std::is_sorted(m.positions.begin(), m.positions.end()));
}

TEST(MlmMask, AtLeastOneAndErrors) {
  EXPECT_EQ(mlm_mask({kCls, 5, kSep}, 1).positions.size(), 1u);
  EXPECT_THROW(mlm_mask({kCls, kSep}, 1), ValidationError);
  EXPECT_THROW(mlm_mask({}, 1), ValidationError);
}

TEST(MlmMask, UniformOverPositions) {
  std::vector<int> ids{kCls, 5, 6, 7, 8, 9, 10, 11, 5, 6, 7, kSep};  // 10 maskable
  std::vector<int> hits(ids.size(), 0);
  for (std::uint64_t s = 0; s < 4000; ++s)
    for (auto p : mlm_mask(ids, s).positions) ++hits[p];
  // round(1.5) = 2 masks per draw; each maskable position expects 800 hits.
  for (std::size_t i = 1; i + 1 < ids.size(); ++i) EXPECT_NEAR(hits[i], 800, 120) << i;
}

TEST(MlmMask, BertSplitKeepsSpecialsSafe) {
  std::vector<int> ids{kCls};
  for (int i = 0; i < 40; ++i) ids.push_back(5 + i % 7);
  MaskingOptions opt{0.5, true, 12};
  const auto m = mlm_mask(ids, 3, opt);
  EXPECT_EQ(m.input[0], kCls);
  for (int id : m.input) EXPECT_LT(id, 12);
  EXPECT_THROW(mlm_mask(ids, 3, MaskingOptions{0.5, true, 0}), ValidationError);
}

TEST(MlmLoss, AnalyticCases) {
  Matrix confident = Matrix::Constant(2, 6, -1e3);
  confident(0, 2) = 0;
  confident(1, 4) = 0;
  EXPECT_NEAR(mlm_loss(confident, {2, 4}).value, 0.0, 1e-12);
  Matrix uniform = Matrix::Zero(3, 6);
  EXPECT_NEAR(mlm_loss(uniform, {0, 1, 5}).value, 3 * std::log(6.0), 1e-12);
  EXPECT_NEAR(mlm_loss(uniform, {0, 1, 5}, Reduction::kMean).value, std::log(6.0), 1e-12);
  EXPECT_THROW(mlm_loss(uniform, {0, 1}), ValidationError);
  EXPECT_THROW(mlm_loss(uniform, {0, 1, 6}), ValidationError);
}

TEST(MlmLoss, MatchesScalarLogSoftmax) {
  const Matrix logits = random_matrix(4, 7, 8) * 3.0;
  const std::vector<int> targets{0, 6, 3, 3};
  double want = 0;
  for (int r = 0; r < 4; ++r) {
    std::vector<double> row(logits.row(r).data(), logits.row(r).data() + 7);
    want += oracle::neg_log_softmax(row, targets[static_cast<std::size_t>(r)]);
  }
  EXPECT_NEAR(mlm_loss(logits, targets).value, want, 1e-9);
}

TEST(MlmLoss, GradientMatchesFiniteDifference) {
  Matrix logits = random_matrix(3, 5, 21);
  const std::vector<int> targets{1, 4, 0};
  const auto loss = mlm_loss(logits, targets);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double num = oracle::central_difference([&] { return mlm_loss(logits, targets).value; }, logits.data()[i], 1e-5);
    EXPECT_LT(oracle::relative_error(loss.d_logits.data()[i], num), 1e-6);
  }
}

TEST(Backward, EveryParameterMatchesFiniteDifferences) {
  const auto c = tiny_config();
  EncoderParams p = init_params(c);
  // Perturb gains and biases away from their 1/0 initial values so their gradients are generic.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 0.3);
  visit_tensors(p, [&](const std::string&, Matrix& m) {
    if (m.rows() == 1)
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += n(rng);
  });
  Objective obj{c, {kCls, 5, 9, 6, 11, kSep, kPad}, {2, 4}, {7, 10}, random_matrix(7, 8, 3)};

  EncoderParams g = zeros_like(p);
  obj.gradient(p, g);
  auto pt = tensors(p);
  auto gt = tensors(g);
  const auto names = tensor_names(p);
  double worst = 0;
  std::string worst_at;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (Eigen::Index i = 0; i < pt[k]->size(); ++i) {
      const double num = oracle::central_difference([&] { return obj.value(p); }, pt[k]->data()[i], 1e-4);
      // The floor matters only for the key bias, whose exact gradient is zero
      // because adding a constant to every score in a row leaves softmax unchanged.
      const double err = oracle::relative_error(gt[k]->data()[i], num, 1e-6);
      if (err > worst) {
        worst = err;
        worst_at = names[k] + "[" + std::to_string(i) + "]";
      }
    }
  }
  EXPECT_LT(worst, 1e-4) << "worst at " << worst_at;
}

TEST(Backward, PadInputsGetZeroGradient) {
  const auto c = tiny_config();
  const auto p = init_params(c);
  const std::vector<int> ids{kCls, 5, 6, kSep, kPad, kPad};
  const auto t = forward(p, c, ids);
  Matrix d_hidden = Matrix::Zero(6, 8);
  d_hidden.topRows(4) = random_matrix(4, 8, 5);
  EncoderParams g = zeros_like(p);
  const Matrix d_input = backward(p, c, t, d_hidden, g);
  EXPECT_EQ(d_input.row(4).norm(), 0.0);
  EXPECT_EQ(d_input.row(5).norm(), 0.0);
  EXPECT_GT(d_input.row(1).norm(), 0.0);
  // Unused vocabulary rows receive no gradient.
  EXPECT_EQ(g.token_embedding.row(10).norm(), 0.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ck;
  ck.config = tiny_config();
  ck.params = init_params(ck.config);
  ck.extra = {zeros_like(ck.params), init_params(ck.config)};
  ck.metadata_json = R"({"step":3})";
  const auto path = std::filesystem::temp_directory_path() / "caseenc_test_ckpt.bin";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.config, ck.config);
  auto a = ck.params, b = back.params;
  auto ta = tensors(a), tb = tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i], *tb[i]);
  ASSERT_EQ(back.extra.size(), 2u);
  EXPECT_EQ(back.extra[1].mlm_bias, ck.extra[1].mlm_bias);
  EXPECT_NE(back.metadata_json.find("step"), std::string::npos);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), Error);
}
