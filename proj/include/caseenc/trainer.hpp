#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "caseenc/bcl_loss.hpp"
#include "caseenc/model.hpp"
#include "caseenc/relevance.hpp"
#include "caseenc/sampler.hpp"

namespace caseenc {

struct TrainConfig {
  std::size_t steps = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
  double mask_rate = 0.15;
  bool bert_split = false;
  Reduction mlm_reduction = Reduction::kSum;
  std::uint64_t seed = 42;
  std::size_t checkpoint_every = 0;  // 0: no periodic checkpoints
  std::filesystem::path checkpoint_dir;
  SamplerConfig sampler;  // N, W_pos, epoch resampling; seed and W_T come from this config
  BclHyperParams bcl;     // includes λ

  void validate() const;
};

/// Full-scale preset: learning rate 1e-5, everything else default.
TrainConfig full_scale_preset();

/// mlm + λ · bcl; throws DivergenceError on non-finite input.
double total_loss(double mlm, double bcl, double lambda);

struct TrainStep {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;
  double mlm = 0.0;
  double bcl = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t num_classes = 0;
  std::size_t masked_tokens = 0;
  double wall_ms = 0.0;  // kept in memory only
};

struct TrainLog {
  std::vector<TrainStep> steps;
  /// JSON lines without wall-clock fields, so reruns are byte-identical.
  std::string to_jsonl() const;
};

struct BatchLoss {
  double mlm = 0.0;
  double bcl = 0.0;
  double total = 0.0;
  std::size_t masked_tokens = 0;
  std::size_t num_classes = 0;
};

/// Joint MLM + BCL optimizer over one corpus. One step consumes one batch of
/// 2N cases; masking and batch choice depend only on (seed, step).
class Trainer {
 public:
  /// `cases` and `weights` must outlive the trainer; weights cover every case.
  Trainer(CaseEncoderModel model, const std::vector<CaseDocument>& cases, const WeightTable& weights,
          TrainConfig cfg);

  /// Restores params, optimizer moments and step counter from save_model output.
  static Trainer resume(const std::filesystem::path& checkpoint, const std::vector<CaseDocument>& cases,
                        const WeightTable& weights, TrainConfig cfg);

  /// Runs one optimization step and returns its log entry.
  TrainStep step();
  /// Runs until `cfg.steps` steps have been taken in total.
  const TrainLog& run(const std::function<void(const TrainStep&)>& on_step = {});

  /// Loss on the batch of a given zero-based step without updating anything.
  BatchLoss batch_loss(std::size_t step_index) const;
  /// Loss and gradients for a given step's batch.
  BatchLoss batch_gradient(std::size_t step_index, EncoderParams& grads) const;

  void save(const std::filesystem::path& dir) const;

  const CaseEncoderModel& model() const { return model_; }
  CaseEncoderModel& mutable_model() { return model_; }
  const TrainLog& log() const { return log_; }
  std::size_t steps_done() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  /// Batch (and its epoch) used at a zero-based step.
  const Batch& batch(std::size_t step_index) const;
  BatchPartition partition(std::size_t step_index) const;
  const std::optional<std::filesystem::path>& last_checkpoint() const { return last_checkpoint_; }

 private:
  BatchLoss compute(std::size_t step_index, EncoderParams* grads) const;

  CaseEncoderModel model_;
  const std::vector<CaseDocument>& cases_;
  const WeightTable& weights_;
  TrainConfig cfg_;
  mutable BatchSchedule schedule_;
  std::unordered_map<std::string, std::size_t> case_pos_;
  EncoderParams m_, v_;
  std::size_t step_ = 0;
  TrainLog log_;
  std::optional<std::filesystem::path> last_checkpoint_;
};

/// Scales grads in place so their global L2 norm is at most max_norm; returns the original norm.
double clip_global_norm(EncoderParams& grads, double max_norm);

}  // namespace caseenc
