#include "caseenc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/random.hpp"

namespace caseenc {

// ---------------------------------------------------------------- vocabulary

namespace {
const char* const kSpecialNames[kNumSpecialTokens] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecialTokens; ++i) {
    tokens_.emplace_back(kSpecialNames[i]);
    index_.emplace(tokens_.back(), i);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists) {
  std::vector<std::string> all;
  for (const auto& list : token_lists) all.insert(all.end(), list.begin(), list.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  Vocabulary v;
  for (auto& tok : all) {
    if (v.index_.count(tok)) continue;
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(const std::string& text) {
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line " + std::to_string(lineno) + ": missing tab");
    if (line.substr(0, tab) != std::to_string(v.tokens_.size()))
      throw ParseError("vocabulary line " + std::to_string(lineno) + ": ids must be consecutive from 0");
    std::string tok = line.substr(tab + 1);
    if (!v.index_.emplace(tok, static_cast<int>(v.tokens_.size())).second)
      throw ParseError("vocabulary line " + std::to_string(lineno) + ": duplicate token");
    v.tokens_.push_back(std::move(tok));
  }
  for (int i = 0; i < kNumSpecialTokens; ++i) {
    if (v.tokens_.size() <= static_cast<std::size_t>(i) || v.tokens_[i] != kSpecialNames[i])
      throw ParseError("vocabulary must start with the special tokens");
  }
  return v;
}

// ---------------------------------------------------------------- params

void EncoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecialTokens))
    throw ValidationError("vocab_size must exceed the number of special tokens");
  if (hidden == 0 || layers == 0 || heads == 0 || ffn == 0) throw ValidationError("encoder sizes must be positive");
  if (hidden % heads != 0) throw ValidationError("hidden size must be divisible by the number of heads");
  if (max_length < 2) throw ValidationError("max_length must be at least 2");
  if (!(init_std > 0.0) || !(norm_eps > 0.0)) throw ValidationError("init_std and norm_eps must be positive");
}

namespace {

double standard_normal(Rng& rng) {
  // Box-Muller; avoids implementation-defined std::normal_distribution output.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double std_dev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std_dev * standard_normal(rng);
  return m;
}

Matrix ones(std::size_t n) { return Matrix::Ones(1, static_cast<Eigen::Index>(n)); }
Matrix zeros(std::size_t r, std::size_t c) {
  return Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

}  // namespace

EncoderParams init_params(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t H = cfg.hidden, F = cfg.ffn, V = cfg.vocab_size;
  const double s = cfg.init_std;
  EncoderParams p;
  p.token_embedding = random_matrix(V, H, s, rng);
  p.position_embedding = random_matrix(cfg.max_length, H, s, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerParams L;
    L.ln1_gain = ones(H);
    L.ln1_bias = zeros(1, H);
    L.wq = random_matrix(H, H, s, rng);
    L.bq = zeros(1, H);
    L.wk = random_matrix(H, H, s, rng);
    L.bk = zeros(1, H);
    L.wv = random_matrix(H, H, s, rng);
    L.bv = zeros(1, H);
    L.wo = random_matrix(H, H, s, rng);
    L.bo = zeros(1, H);
    L.ln2_gain = ones(H);
    L.ln2_bias = zeros(1, H);
    L.w1 = random_matrix(H, F, s, rng);
    L.b1 = zeros(1, F);
    L.w2 = random_matrix(F, H, s, rng);
    L.b2 = zeros(1, H);
    p.layers.push_back(std::move(L));
  }
  p.final_gain = ones(H);
  p.final_bias = zeros(1, H);
  p.mlm_weight = random_matrix(H, V, s, rng);
  p.mlm_bias = zeros(1, V);
  return p;
}

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z = p;
  visit_tensors(z, [](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

std::size_t parameter_count(const EncoderParams& p) {
  std::size_t n = 0;
  visit_tensors(p, [&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool all_finite(const EncoderParams& p) {
  bool ok = true;
  visit_tensors(p, [&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

// ---------------------------------------------------------------- forward / backward

namespace {

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps, NormCache& cache) {
  const auto n = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(n);
  cache.inv_std = (var.array() + eps).rsqrt();
  cache.normalized = centered.array().colwise() * cache.inv_std.array();
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const NormCache& cache, const Matrix& gain, Matrix& d_gain,
                           Matrix& d_bias) {
  const double n = static_cast<double>(dy.cols());
  d_gain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  d_bias.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
  Eigen::VectorXd sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).rowwise().sum();
  Matrix dx = (n * dxhat.array()).colwise() - sum_dxhat.array();
  dx -= (cache.normalized.array().colwise() * sum_dxhat_xhat.array()).matrix();
  dx = dx.array().colwise() * (cache.inv_std.array() / n);
  return dx;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * pdf;
}

Matrix reapply_affine(const NormCache& cache, const Matrix& gain, const Matrix& bias) {
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

}  // namespace

ForwardTrace forward(const EncoderParams& params, const EncoderConfig& cfg, const std::vector<int>& ids) {
  const auto L = static_cast<Eigen::Index>(ids.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  if (ids.empty()) throw ValidationError("cannot encode an empty sequence");
  if (ids.size() > cfg.max_length) throw ValidationError("sequence longer than max_length");

  ForwardTrace t;
  t.ids = ids;
  t.attend.resize(ids.size());
  bool any = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cfg.vocab_size)
      throw ValidationError("token id " + std::to_string(ids[i]) + " outside the vocabulary");
    t.attend[i] = ids[i] != kPad;
    any = any || t.attend[i];
  }
  if (!any) throw ValidationError("sequence consists only of padding");

  Matrix x(L, H);
  for (Eigen::Index i = 0; i < L; ++i)
    x.row(i) = params.token_embedding.row(ids[static_cast<std::size_t>(i)]) + params.position_embedding.row(i);

  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const Eigen::Index dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();

  for (const LayerParams& P : params.layers) {
    LayerTrace lt;
    lt.input = x;
    Matrix a = layer_norm(x, P.ln1_gain, P.ln1_bias, cfg.norm_eps, lt.ln1);
    lt.q = affine(a, P.wq, P.bq);
    lt.k = affine(a, P.wk, P.bk);
    lt.v = affine(a, P.wv, P.bv);
    lt.context = Matrix::Zero(L, H);
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix s = lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose() * scale;
      for (Eigen::Index j = 0; j < L; ++j)
        if (!t.attend[static_cast<std::size_t>(j)]) s.col(j).setConstant(neg_inf);
      Eigen::VectorXd row_max = s.rowwise().maxCoeff();
      Matrix e = (s.colwise() - row_max).array().exp();
      Eigen::VectorXd denom = e.rowwise().sum();
      Matrix p = e.array().colwise() / denom.array();
      lt.context.middleCols(h * dh, dh) = p * lt.v.middleCols(h * dh, dh);
      lt.probs.push_back(std::move(p));
    }
    lt.mid = x + affine(lt.context, P.wo, P.bo);
    Matrix f = layer_norm(lt.mid, P.ln2_gain, P.ln2_bias, cfg.norm_eps, lt.ln2);
    lt.ffn_pre = affine(f, P.w1, P.b1);
    lt.ffn_act = lt.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    x = lt.mid + affine(lt.ffn_act, P.w2, P.b2);
    t.layers.push_back(std::move(lt));
  }
  t.final_input = x;
  t.hidden = layer_norm(x, params.final_gain, params.final_bias, cfg.norm_eps, t.final_norm);
  return t;
}

Matrix backward(const EncoderParams& params, const EncoderConfig& cfg, const ForwardTrace& t, const Matrix& d_hidden,
                EncoderParams& g) {
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const Eigen::Index dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = layer_norm_backward(d_hidden, t.final_norm, params.final_gain, g.final_gain, g.final_bias);

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& P = params.layers[l];
    LayerParams& G = g.layers[l];
    const LayerTrace& lt = t.layers[l];

    // x_out = mid + gelu(ln2(mid) W1 + b1) W2 + b2
    Matrix d_mid = dx;
    G.w2 += lt.ffn_act.transpose() * dx;
    G.b2.row(0) += dx.colwise().sum();
    Matrix d_pre = (dx * P.w2.transpose()).array() * lt.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    const Matrix f = reapply_affine(lt.ln2, P.ln2_gain, P.ln2_bias);
    G.w1 += f.transpose() * d_pre;
    G.b1.row(0) += d_pre.colwise().sum();
    d_mid += layer_norm_backward(d_pre * P.w1.transpose(), lt.ln2, P.ln2_gain, G.ln2_gain, G.ln2_bias);

    // mid = input + context Wo + bo
    Matrix d_input = d_mid;
    G.wo += lt.context.transpose() * d_mid;
    G.bo.row(0) += d_mid.colwise().sum();
    Matrix d_context = d_mid * P.wo.transpose();

    Matrix dq = Matrix::Zero(lt.q.rows(), H), dk = dq, dv = dq;
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& p = lt.probs[static_cast<std::size_t>(h)];
      const auto dc = d_context.middleCols(h * dh, dh);
      Matrix dp = dc * lt.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * dc;
      Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      Matrix ds = p.array() * (dp.colwise() - row_dot).array();
      dq.middleCols(h * dh, dh) = ds * lt.k.middleCols(h * dh, dh) * scale;
      dk.middleCols(h * dh, dh) = ds.transpose() * lt.q.middleCols(h * dh, dh) * scale;
    }
    const Matrix a = reapply_affine(lt.ln1, P.ln1_gain, P.ln1_bias);
    G.wq += a.transpose() * dq;
    G.bq.row(0) += dq.colwise().sum();
    G.wk += a.transpose() * dk;
    G.bk.row(0) += dk.colwise().sum();
    G.wv += a.transpose() * dv;
    G.bv.row(0) += dv.colwise().sum();
    Matrix da = dq * P.wq.transpose() + dk * P.wk.transpose() + dv * P.wv.transpose();
    d_input += layer_norm_backward(da, lt.ln1, P.ln1_gain, G.ln1_gain, G.ln1_bias);
    dx = std::move(d_input);
  }

  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    g.token_embedding.row(t.ids[i]) += dx.row(row);
    g.position_embedding.row(row) += dx.row(row);
  }
  return dx;
}

Matrix mlm_logits(const EncoderParams& params, const ForwardTrace& trace, const std::vector<std::size_t>& positions) {
  Matrix h(static_cast<Eigen::Index>(positions.size()), trace.hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i)
    h.row(static_cast<Eigen::Index>(i)) = trace.hidden.row(static_cast<Eigen::Index>(positions[i]));
  return affine(h, params.mlm_weight, params.mlm_bias);
}

Matrix mlm_head_backward(const EncoderParams& params, const ForwardTrace& trace,
                         const std::vector<std::size_t>& positions, const Matrix& d_logits, EncoderParams& grads) {
  Matrix d_hidden = Matrix::Zero(trace.hidden.rows(), trace.hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto pos = static_cast<Eigen::Index>(positions[i]);
    grads.mlm_weight += trace.hidden.row(pos).transpose() * d_logits.row(r);
    d_hidden.row(pos) += d_logits.row(r) * params.mlm_weight.transpose();
  }
  grads.mlm_bias.row(0) += d_logits.colwise().sum();
  return d_hidden;
}

// ---------------------------------------------------------------- encode / inputs

EmbeddingBatch encode(const std::vector<std::vector<int>>& sequences, const EncoderParams& params,
                      const EncoderConfig& cfg, const std::vector<std::string>& ids) {
  if (!ids.empty() && ids.size() != sequences.size()) throw ValidationError("one id per sequence required");
  EmbeddingBatch out;
  out.ids = ids;
  out.embeddings.resize(static_cast<Eigen::Index>(sequences.size()), static_cast<Eigen::Index>(cfg.hidden));
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    std::vector<int> cut = seq;
    if (cut.size() > cfg.max_length) {
      cut.resize(cfg.max_length);
      ++out.truncated;
    }
    if (cut.empty() || cut.front() != kCls) throw ValidationError("sequences must start with [CLS]");
    out.embeddings.row(static_cast<Eigen::Index>(i)) = forward(params, cfg, cut).hidden.row(0);
  }
  return out;
}

std::vector<int> make_input(const std::vector<int>& a, const std::vector<int>& b, std::size_t max_length) {
  std::vector<int> out;
  out.reserve(a.size() + b.size() + 3);
  out.push_back(kCls);
  out.insert(out.end(), a.begin(), a.end());
  out.push_back(kSep);
  if (!b.empty()) {
    out.insert(out.end(), b.begin(), b.end());
    out.push_back(kSep);
  }
  if (out.size() > max_length) out.resize(max_length);
  return out;
}

// ---------------------------------------------------------------- MLM

MlmInstance mlm_mask(const std::vector<int>& ids, std::uint64_t seed, const MaskingOptions& opt) {
  if (ids.empty()) throw ValidationError("cannot mask an empty sequence");
  if (!(opt.rate > 0.0 && opt.rate <= 1.0)) throw ValidationError("mask rate must lie in (0, 1]");
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!is_special(ids[i])) maskable.push_back(i);
  if (maskable.empty()) throw ValidationError("sequence has no maskable tokens");

  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(opt.rate * static_cast<double>(maskable.size()))));
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` entries become a uniform sample.
  for (std::size_t i = 0; i < count; ++i)
    std::swap(maskable[i], maskable[i + uniform_index(rng, maskable.size() - i)]);
  maskable.resize(count);
  std::sort(maskable.begin(), maskable.end());

  MlmInstance inst;
  inst.input = ids;
  inst.positions = maskable;
  for (std::size_t pos : maskable) {
    inst.targets.push_back(ids[pos]);
    int replacement = kMask;
    if (opt.bert_split) {
      const double u = uniform01(rng);
      if (u >= 0.9) {
        replacement = ids[pos];
      } else if (u >= 0.8) {
        if (opt.vocab_size <= static_cast<std::size_t>(kNumSpecialTokens))
          throw ValidationError("bert_split masking needs the vocabulary size");
        replacement = kNumSpecialTokens +
                      static_cast<int>(uniform_index(rng, opt.vocab_size - kNumSpecialTokens));
      }
    }
    inst.input[pos] = replacement;
  }
  return inst;
}

MlmLoss mlm_loss(const Matrix& logits, const std::vector<int>& targets, Reduction reduction) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ValidationError("mlm_loss: " + std::to_string(logits.rows()) + " logit rows for " +
                          std::to_string(targets.size()) + " targets");
  MlmLoss out;
  out.d_logits.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int target = targets[static_cast<std::size_t>(r)];
    if (target < 0 || target >= logits.cols()) throw ValidationError("mlm_loss: target outside the vocabulary");
    const double m = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - m).exp();
    const double z = e.sum();
    out.value += std::log(z) + m - logits(r, target);
    out.d_logits.row(r) = e / z;
    out.d_logits(r, target) -= 1.0;
  }
  if (reduction == Reduction::kMean && logits.rows() > 0) {
    out.value /= static_cast<double>(logits.rows());
    out.d_logits /= static_cast<double>(logits.rows());
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'A', 'S', 'E', 'E', 'N', 'C', '1'};

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"hidden", c.hidden},     {"layers", c.layers},
          {"heads", c.heads},           {"ffn", c.ffn},           {"max_length", c.max_length},
          {"seed", c.seed},             {"init_std", c.init_std}, {"norm_eps", c.norm_eps}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn = j.at("ffn").get<std::size_t>();
  c.max_length = j.at("max_length").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_std = j.at("init_std").get<double>();
  c.norm_eps = j.at("norm_eps").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json tensors = nlohmann::json::array();
  visit_tensors(ckpt.params, [&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  nlohmann::json header = {{"format_version", 1},
                           {"config", config_json(ckpt.config)},
                           {"tensors", std::move(tensors)},
                           {"extra_sets", ckpt.extra.size()},
                           {"metadata", nlohmann::json::parse(ckpt.metadata_json)}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto write_set = [&](const EncoderParams& p) {
    visit_tensors(p, [&](const std::string&, const Matrix& m) {
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
  };
  write_set(ckpt.params);
  for (const auto& e : ckpt.extra) write_set(e);
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path.string() + ": not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw ParseError(path.string() + ": corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": checkpoint header: " + e.what());
  }
  if (header.value("format_version", 0) != 1) throw ParseError(path.string() + ": unsupported checkpoint version");

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.metadata_json = header.at("metadata").dump();
  ckpt.params = init_params(ckpt.config);
  const auto& tensors = header.at("tensors");
  auto read_set = [&](EncoderParams& p) {
    std::size_t idx = 0;
    visit_tensors(p, [&](const std::string& name, Matrix& m) {
      if (idx >= tensors.size() || tensors[idx].at("name") != name || tensors[idx].at("rows") != m.rows() ||
          tensors[idx].at("cols") != m.cols())
        throw ParseError(path.string() + ": tensor layout mismatch at '" + name + "'");
      ++idx;
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
    if (!in) throw ParseError(path.string() + ": truncated checkpoint data");
  };
  read_set(ckpt.params);
  const auto extra = header.at("extra_sets").get<std::size_t>();
  for (std::size_t i = 0; i < extra; ++i) {
    ckpt.extra.push_back(zeros_like(ckpt.params));
    read_set(ckpt.extra.back());
  }
  return ckpt;
}

}  // namespace caseenc
