#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "caseenc/random.hpp"
#include "caseenc/relevance.hpp"

namespace caseenc {

struct SamplerConfig {
  double positive_floor = 0.5;    // W_pos: minimum w(anchor, positive)
  double class_threshold = 0.25;  // W_T: strict threshold for merging cases into a class
  std::size_t quadruples_per_batch = 4;  // N; a batch holds 2N cases
  bool resample_each_epoch = true;
  std::size_t max_resample = 16;
  std::uint64_t seed = 42;
};

/// An anchor, its sampled positive and the weight w(anchor, positive). The
/// similarity profiles of both cases are addressed by the same ids.
struct Quadruple {
  std::string anchor;
  std::string positive;
  double weight = 0.0;

  bool operator==(const Quadruple&) const = default;
};

struct BatchPartition {
  std::vector<std::string> case_ids;
  std::vector<int> labels;           // canonical: classes numbered by smallest member index
  std::size_t num_classes = 0;
  std::vector<double> weights;       // row-major |batch| x |batch| table restricted to the batch

  double weight(std::size_t a, std::size_t b) const { return weights[a * case_ids.size() + b]; }
  bool operator==(const BatchPartition&) const = default;
};

/// Draws a positive with probability proportional to w(anchor, c) among cases
/// c != anchor with w >= floor. Throws NoPositiveError when none qualifies.
std::string sample_positive(const std::string& anchor, const WeightTable& table, double floor, Rng& rng);
std::string sample_positive(const std::string& anchor, const WeightTable& table, double floor,
                            std::uint64_t seed);

/// Interleaves (c_1, c_1+, c_2, c_2+, ...). Throws on repeated ids.
std::vector<std::string> build_batch(const std::vector<Quadruple>& quadruples);

/// Connected components of {(a, b) : w_ab > threshold or w_ba > threshold}.
BatchPartition class_partition(const std::vector<std::string>& batch, const WeightTable& table,
                               double threshold);

struct Batch {
  std::size_t epoch = 0;
  std::vector<Quadruple> quadruples;
  std::vector<std::string> case_ids;  // build_batch(quadruples)
};

/// Deterministic stream of batches. Epoch e is a function of (seed, e) only,
/// so any step can be reconstructed without replaying earlier ones.
class BatchSchedule {
 public:
  BatchSchedule(const WeightTable& table, SamplerConfig cfg);

  /// Anchors that have at least one eligible positive, in table order.
  const std::vector<std::string>& eligible_anchors() const { return eligible_; }
  const std::vector<std::string>& excluded_anchors() const { return excluded_; }

  std::vector<Batch> plan_epoch(std::size_t epoch) const;
  /// Batch for a zero-based global step.
  const Batch& batch_for_step(std::size_t step);

  const SamplerConfig& config() const { return cfg_; }

 private:
  const WeightTable& table_;
  SamplerConfig cfg_;
  std::vector<std::string> eligible_;
  std::vector<std::string> excluded_;
  std::map<std::size_t, std::vector<Batch>> epochs_;
  std::vector<std::size_t> epoch_start_;  // first global step of each planned epoch
};

/// One JSON object per line: step, epoch, case ids, labels, positive weights
/// and the batch-restricted weight table.
std::string manifest_line(std::size_t step, const Batch& batch, const BatchPartition& partition);

}  // namespace caseenc
