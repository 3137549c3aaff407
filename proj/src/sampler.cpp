#include "caseenc/sampler.hpp"

#include <cmath>
#include <deque>
#include <set>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/union_find.hpp"

namespace caseenc {

namespace {

std::vector<std::pair<std::size_t, double>> eligible_positives(std::size_t anchor, const WeightTable& table,
                                                               double floor) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (j == anchor) continue;
    const double w = table.at(anchor, j);
    if (w >= floor && w > 0.0) out.emplace_back(j, w);
  }
  return out;
}

std::size_t draw_weighted(const std::vector<std::pair<std::size_t, double>>& items, Rng& rng) {
  double total = 0.0;
  for (const auto& [_, w] : items) total += w;
  double u = uniform01(rng) * total;
  for (const auto& [idx, w] : items) {
    if (u < w) return idx;
    u -= w;
  }
  return items.back().first;
}

}  // namespace

std::string sample_positive(const std::string& anchor, const WeightTable& table, double floor, Rng& rng) {
  const std::size_t a = table.index_of(anchor);
  const auto items = eligible_positives(a, table, floor);
  if (items.empty()) throw NoPositiveError("no positive available for case '" + anchor + "'");
  return table.case_ids()[draw_weighted(items, rng)];
}

std::string sample_positive(const std::string& anchor, const WeightTable& table, double floor,
                            std::uint64_t seed) {
  Rng rng(seed);
  return sample_positive(anchor, table, floor, rng);
}

std::vector<std::string> build_batch(const std::vector<Quadruple>& quadruples) {
  if (quadruples.empty()) throw ValidationError("a batch needs at least one quadruple");
  std::vector<std::string> out;
  std::set<std::string> seen;
  out.reserve(2 * quadruples.size());
  for (const auto& q : quadruples) {
    for (const auto* id : {&q.anchor, &q.positive}) {
      if (!seen.insert(*id).second) throw ValidationError("case '" + *id + "' appears twice in the batch");
      out.push_back(*id);
    }
  }
  return out;
}

BatchPartition class_partition(const std::vector<std::string>& batch, const WeightTable& table, double threshold) {
  const std::size_t n = batch.size();
  BatchPartition part;
  part.case_ids = batch;
  part.weights.resize(n * n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = table.index_of(batch[i]);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double w = table.at(idx[a], idx[b]);
      if (std::isnan(w))
        throw ValidationError("missing weight for pair (" + batch[a] + ", " + batch[b] + ")");
      part.weights[a * n + b] = w;
    }
  }

  UnionFind uf(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (part.weight(a, b) > threshold || part.weight(b, a) > threshold) uf.unite(a, b);
    }
  }

  // Scanning in index order assigns each class the label of its smallest member's rank.
  std::vector<int> root_label(n, -1);
  part.labels.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t r = uf.find(a);
    if (root_label[r] < 0) root_label[r] = static_cast<int>(part.num_classes++);
    part.labels[a] = root_label[r];
  }
  return part;
}

BatchSchedule::BatchSchedule(const WeightTable& table, SamplerConfig cfg) : table_(table), cfg_(cfg) {
  if (cfg_.quadruples_per_batch == 0) throw ValidationError("batch size N must be at least 1");
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (eligible_positives(i, table_, cfg_.positive_floor).empty())
      excluded_.push_back(table_.case_ids()[i]);
    else
      eligible_.push_back(table_.case_ids()[i]);
  }
  if (eligible_.size() < cfg_.quadruples_per_batch)
    throw ValidationError("only " + std::to_string(eligible_.size()) +
                          " anchors have a positive; cannot fill a batch of N = " +
                          std::to_string(cfg_.quadruples_per_batch));
}

std::vector<Batch> BatchSchedule::plan_epoch(std::size_t epoch) const {
  const std::size_t n = cfg_.quadruples_per_batch;
  const std::size_t draw_epoch = cfg_.resample_each_epoch ? epoch : 0;

  std::vector<std::string> order = eligible_;
  Rng order_rng(derive_seed(cfg_.seed, {0x0eu, epoch}));
  shuffle(order, order_rng);

  std::vector<Batch> batches;
  std::deque<std::string> pending(order.begin(), order.end());
  Batch current{epoch, {}, {}};
  std::set<std::string> used;
  std::deque<std::string> deferred;

  auto try_add = [&](const std::string& anchor) {
    if (used.count(anchor)) return false;
    const std::size_t a = table_.index_of(anchor);
    Rng rng(derive_seed(cfg_.seed, {0xa0u, draw_epoch, a}));
    for (std::size_t attempt = 0; attempt < cfg_.max_resample; ++attempt) {
      std::string pos = sample_positive(anchor, table_, cfg_.positive_floor, rng);
      if (used.count(pos)) continue;
      used.insert(anchor);
      used.insert(pos);
      current.quadruples.push_back({anchor, pos, table_.at(a, table_.index_of(pos))});
      return true;
    }
    return false;
  };

  while (!pending.empty()) {
    std::string anchor = std::move(pending.front());
    pending.pop_front();
    if (!try_add(anchor)) deferred.push_back(std::move(anchor));
    if (current.quadruples.size() == n) {
      current.case_ids = build_batch(current.quadruples);
      batches.push_back(std::move(current));
      current = Batch{epoch, {}, {}};
      used.clear();
      // Deferred anchors go first in the next batch, where they cannot collide.
      pending.insert(pending.begin(), deferred.begin(), deferred.end());
      deferred.clear();
    }
  }
  if (batches.empty())
    throw ValidationError("epoch " + std::to_string(epoch) + " could not fill a single batch of N = " +
                          std::to_string(n) + " without id collisions");
  return batches;
}

const Batch& BatchSchedule::batch_for_step(std::size_t step) {
  std::size_t epoch = 0, start = 0;
  while (true) {
    auto it = epochs_.find(epoch);
    if (it == epochs_.end()) it = epochs_.emplace(epoch, plan_epoch(epoch)).first;
    if (step < start + it->second.size()) return it->second[step - start];
    start += it->second.size();
    ++epoch;
  }
}

std::string manifest_line(std::size_t step, const Batch& batch, const BatchPartition& partition) {
  nlohmann::json pos_w = nlohmann::json::array();
  for (const auto& q : batch.quadruples) pos_w.push_back(q.weight);
  const std::size_t n = partition.case_ids.size();
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t a = 0; a < n; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t b = 0; b < n; ++b) row.push_back(partition.weight(a, b));
    table.push_back(std::move(row));
  }
  nlohmann::json line = {{"step", step},
                         {"epoch", batch.epoch},
                         {"case_ids", batch.case_ids},
                         {"labels", partition.labels},
                         {"num_classes", partition.num_classes},
                         {"positive_weights", std::move(pos_w)},
                         {"weights", std::move(table)}};
  return line.dump() + "\n";
}

}  // namespace caseenc
