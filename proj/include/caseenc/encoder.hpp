#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace caseenc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Reserved ids at the front of every vocabulary.
enum SpecialToken : int { kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMask = 4 };
inline constexpr int kNumSpecialTokens = 5;
inline bool is_special(int id) { return id < kNumSpecialTokens; }

class Vocabulary {
 public:
  Vocabulary();
  /// Specials followed by every distinct token, sorted bytewise.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::vector<int> ids(const std::vector<std::string>& tokens) const;

  /// One "id<TAB>token" line per entry.
  std::string serialize() const;
  static Vocabulary parse(const std::string& text);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn = 128;
  std::size_t max_length = 128;
  std::uint64_t seed = 1234;
  double init_std = 0.02;
  double norm_eps = 1e-5;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_gain, ln2_bias;
  Matrix w1, b1, w2, b2;
};

/// Pre-norm transformer encoder with learned absolute positions, a final
/// normalization and an untied MLM output head. Bias and gain tensors are 1 x n.
struct EncoderParams {
  Matrix token_embedding;     // V x H
  Matrix position_embedding;  // max_length x H
  std::vector<LayerParams> layers;
  Matrix final_gain, final_bias;
  Matrix mlm_weight;  // H x V
  Matrix mlm_bias;    // 1 x V
};

/// Calls fn(name, tensor) for every tensor in a fixed order.
template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
  fn("token_embedding", p.token_embedding);
  fn("position_embedding", p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    fn(pre + "ln1_gain", L.ln1_gain);
    fn(pre + "ln1_bias", L.ln1_bias);
    fn(pre + "wq", L.wq);
    fn(pre + "bq", L.bq);
    fn(pre + "wk", L.wk);
    fn(pre + "bk", L.bk);
    fn(pre + "wv", L.wv);
    fn(pre + "bv", L.bv);
    fn(pre + "wo", L.wo);
    fn(pre + "bo", L.bo);
    fn(pre + "ln2_gain", L.ln2_gain);
    fn(pre + "ln2_bias", L.ln2_bias);
    fn(pre + "w1", L.w1);
    fn(pre + "b1", L.b1);
    fn(pre + "w2", L.w2);
    fn(pre + "b2", L.b2);
  }
  fn("final_gain", p.final_gain);
  fn("final_bias", p.final_bias);
  fn("mlm_weight", p.mlm_weight);
  fn("mlm_bias", p.mlm_bias);
}

/// Weights ~ N(0, init_std) from cfg.seed; gains 1; biases 0.
EncoderParams init_params(const EncoderConfig& cfg);
EncoderParams zeros_like(const EncoderParams& p);
std::size_t parameter_count(const EncoderParams& p);
bool all_finite(const EncoderParams& p);

struct NormCache {
  Matrix normalized;       // pre-affine, zero mean / unit variance rows
  Eigen::VectorXd inv_std;
};

struct LayerTrace {
  Matrix input;
  NormCache ln1;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, L x L
  Matrix context;
  Matrix mid;                 // residual stream after attention
  NormCache ln2;
  Matrix ffn_pre;             // before GELU
  Matrix ffn_act;
};

/// Intermediate values of one sequence's forward pass, kept for backward.
struct ForwardTrace {
  std::vector<int> ids;
  std::vector<bool> attend;  // false for PAD keys
  std::vector<LayerTrace> layers;
  Matrix final_input;
  NormCache final_norm;
  Matrix hidden;             // L x H, last-layer output
};

/// Single-sequence forward. `ids` must fit max_length; PAD positions are
/// excluded as attention keys.
ForwardTrace forward(const EncoderParams& params, const EncoderConfig& cfg, const std::vector<int>& ids);

/// Accumulates parameter gradients for an upstream gradient on trace.hidden.
/// Returns the gradient on the summed input embeddings (L x H).
Matrix backward(const EncoderParams& params, const EncoderConfig& cfg, const ForwardTrace& trace,
                const Matrix& d_hidden, EncoderParams& grads);

/// Logits of the MLM head at the given positions (M x V).
Matrix mlm_logits(const EncoderParams& params, const ForwardTrace& trace, const std::vector<std::size_t>& positions);

/// Adds the MLM head's contribution for d_logits to grads and returns d_hidden (L x H).
Matrix mlm_head_backward(const EncoderParams& params, const ForwardTrace& trace,
                         const std::vector<std::size_t>& positions, const Matrix& d_logits,
                         EncoderParams& grads);

struct EmbeddingBatch {
  std::vector<std::string> ids;
  Matrix embeddings;  // one row per sequence, H columns
  std::size_t truncated = 0;
};

/// [CLS] embeddings of independent sequences. Sequences longer than
/// max_length are cut to their first max_length ids and counted in `truncated`.
EmbeddingBatch encode(const std::vector<std::vector<int>>& sequences, const EncoderParams& params,
                      const EncoderConfig& cfg, const std::vector<std::string>& ids = {});

/// [CLS] a [SEP], or [CLS] a [SEP] b [SEP] when b is nonempty, cut to max_length.
std::vector<int> make_input(const std::vector<int>& a, const std::vector<int>& b, std::size_t max_length);

struct MlmInstance {
  std::vector<int> input;                // masked copy of the sequence
  std::vector<std::size_t> positions;    // m(x), ascending
  std::vector<int> targets;              // original ids at positions
};

struct MaskingOptions {
  double rate = 0.15;
  bool bert_split = false;  // 80% MASK / 10% random / 10% unchanged
  std::size_t vocab_size = 0;  // needed for bert_split random replacement
};

/// Masks round(rate * maskable) uniformly chosen non-special positions, at
/// least one. Throws when nothing is maskable.
MlmInstance mlm_mask(const std::vector<int>& ids, std::uint64_t seed, const MaskingOptions& opt = {});

enum class Reduction { kSum, kMean };

struct MlmLoss {
  double value = 0.0;
  Matrix d_logits;
};

/// Σ over rows of -log softmax(logits)[target]; optionally divided by rows.
MlmLoss mlm_loss(const Matrix& logits, const std::vector<int>& targets, Reduction reduction = Reduction::kSum);

// Checkpoint: "CASEENC1" magic, u64 header length, JSON header (config,
// tensor names and shapes, extra metadata), then little-endian doubles for
// the parameters and any extra tensor sets in visit order.
struct Checkpoint {
  EncoderConfig config;
  EncoderParams params;
  std::vector<EncoderParams> extra;  // e.g. optimizer moments
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace caseenc
