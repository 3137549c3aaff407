#include "caseenc/trainer.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/random.hpp"

namespace caseenc {

void TrainConfig::validate() const {
  if (sampler.quadruples_per_batch == 0) throw ValidationError("batch size N must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("Adam betas must lie in [0, 1)");
  if (!(mask_rate > 0.0 && mask_rate <= 1.0)) throw ValidationError("mask rate must lie in (0, 1]");
  bcl.validate();
}

TrainConfig full_scale_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 1e-5;
  return cfg;
}

double total_loss(double mlm, double bcl, double lambda) {
  if (!std::isfinite(mlm) || !std::isfinite(bcl) || !std::isfinite(lambda))
    throw DivergenceError("non-finite loss component");
  return mlm + lambda * bcl;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["mlm"] = s.mlm;
    j["bcl"] = s.bcl;
    j["total"] = s.total;
    j["grad_norm"] = s.grad_norm;
    j["num_classes"] = s.num_classes;
    j["masked_tokens"] = s.masked_tokens;
    out += j.dump() + "\n";
  }
  return out;
}

double clip_global_norm(EncoderParams& grads, double max_norm) {
  double sq = 0.0;
  visit_tensors(grads, [&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    visit_tensors(grads, [&](const std::string&, Matrix& m) { m *= s; });
  }
  return norm;
}

namespace {
TrainConfig validated(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}
}  // namespace

Trainer::Trainer(CaseEncoderModel model, const std::vector<CaseDocument>& cases, const WeightTable& weights,
                 TrainConfig cfg)
    : model_(std::move(model)),
      cases_(cases),
      weights_(weights),
      cfg_(validated(std::move(cfg))),
      schedule_(weights, [&] {
        SamplerConfig s = cfg_.sampler;
        s.seed = cfg_.seed;
        s.class_threshold = cfg_.bcl.class_threshold;
        return s;
      }()) {
  for (std::size_t i = 0; i < cases_.size(); ++i) case_pos_.emplace(cases_[i].case_id, i);
  for (const auto& id : weights_.case_ids())
    if (!case_pos_.count(id)) throw ValidationError("weight table mentions unknown case '" + id + "'");
  m_ = zeros_like(model_.params);
  v_ = zeros_like(model_.params);
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, const std::vector<CaseDocument>& cases,
                        const WeightTable& weights, TrainConfig cfg) {
  LoadedModel loaded = load_model(checkpoint);
  if (loaded.extra.size() != 2) throw ParseError(checkpoint.string() + ": checkpoint has no optimizer state");
  Trainer t(std::move(loaded.model), cases, weights, std::move(cfg));
  t.m_ = std::move(loaded.extra[0]);
  t.v_ = std::move(loaded.extra[1]);
  const auto meta = nlohmann::json::parse(loaded.metadata_json);
  t.step_ = meta.at("step").get<std::size_t>();
  return t;
}

const Batch& Trainer::batch(std::size_t step_index) const { return schedule_.batch_for_step(step_index); }

BatchPartition Trainer::partition(std::size_t step_index) const {
  return class_partition(batch(step_index).case_ids, weights_, cfg_.bcl.class_threshold);
}

BatchLoss Trainer::compute(std::size_t step_index, EncoderParams* grads) const {
  const Batch& b = batch(step_index);
  const BatchPartition part = class_partition(b.case_ids, weights_, cfg_.bcl.class_threshold);
  const std::size_t n = b.case_ids.size();
  const auto& cfg = model_.config;

  struct Item {
    ForwardTrace trace;
    MlmInstance mask;
    MlmLoss loss;
  };
  std::vector<Item> items;
  items.reserve(n);
  Matrix cls(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.hidden));
  BatchLoss out;
  out.num_classes = part.num_classes;

  MaskingOptions mopt{cfg_.mask_rate, cfg_.bert_split, cfg.vocab_size};
  std::size_t total_masked = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const CaseDocument& doc = cases_[case_pos_.at(b.case_ids[i])];
    const auto input = model_.query_input(doc.facts);
    Item it;
    it.mask = mlm_mask(input, derive_seed(cfg_.seed, {0x3a5cu, step_index, i}), mopt);
    it.trace = forward(model_.params, cfg, it.mask.input);
    cls.row(static_cast<Eigen::Index>(i)) = it.trace.hidden.row(0);
    total_masked += it.mask.positions.size();
    items.push_back(std::move(it));
  }

  // Sum reduction follows the per-token sum; mean averages over every masked token in the batch.
  for (auto& it : items) {
    it.loss = mlm_loss(mlm_logits(model_.params, it.trace, it.mask.positions), it.mask.targets, Reduction::kSum);
    if (cfg_.mlm_reduction == Reduction::kMean) {
      it.loss.value /= static_cast<double>(total_masked);
      it.loss.d_logits /= static_cast<double>(total_masked);
    }
    out.mlm += it.loss.value;
  }
  out.masked_tokens = total_masked;

  const BclResult bcl = bcl_gradient(cls, part, cfg_.bcl);
  out.bcl = bcl.value;
  out.total = total_loss(out.mlm, out.bcl, cfg_.bcl.lambda);

  if (grads) {
    for (std::size_t i = 0; i < n; ++i) {
      Item& it = items[i];
      Matrix d_hidden = mlm_head_backward(model_.params, it.trace, it.mask.positions, it.loss.d_logits, *grads);
      d_hidden.row(0) += cfg_.bcl.lambda * bcl.gradient.row(static_cast<Eigen::Index>(i));
      backward(model_.params, cfg, it.trace, d_hidden, *grads);
    }
  }
  return out;
}

BatchLoss Trainer::batch_loss(std::size_t step_index) const { return compute(step_index, nullptr); }

BatchLoss Trainer::batch_gradient(std::size_t step_index, EncoderParams& grads) const {
  return compute(step_index, &grads);
}

TrainStep Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  EncoderParams grads = zeros_like(model_.params);
  const BatchLoss loss = compute(step_, &grads);
  if (!std::isfinite(loss.total) || !all_finite(grads)) {
    std::string where = last_checkpoint_ ? last_checkpoint_->string() : std::string("none");
    throw DivergenceError("training diverged at step " + std::to_string(step_ + 1) + "; last good checkpoint: " + where);
  }
  const double norm = clip_global_norm(grads, cfg_.clip_norm);

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  std::vector<Matrix*> ps, ms, vs, gs;
  visit_tensors(model_.params, [&](const std::string&, Matrix& x) { ps.push_back(&x); });
  visit_tensors(m_, [&](const std::string&, Matrix& x) { ms.push_back(&x); });
  visit_tensors(v_, [&](const std::string&, Matrix& x) { vs.push_back(&x); });
  visit_tensors(grads, [&](const std::string&, Matrix& x) { gs.push_back(&x); });
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Matrix& g = *gs[i];
    *ms[i] = cfg_.beta1 * *ms[i] + (1.0 - cfg_.beta1) * g;
    *vs[i] = cfg_.beta2 * *vs[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = *ms[i] / c1;
    const Matrix v_hat = *vs[i] / c2;
    *ps[i] -= (cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.adam_eps)).matrix();
  }

  TrainStep rec;
  rec.step = step_;
  rec.epoch = batch(step_ - 1).epoch;
  rec.mlm = loss.mlm;
  rec.bcl = loss.bcl;
  rec.total = loss.total;
  rec.grad_norm = norm;
  rec.num_classes = loss.num_classes;
  rec.masked_tokens = loss.masked_tokens;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  log_.steps.push_back(rec);

  if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_dir.empty() && step_ % cfg_.checkpoint_every == 0) {
    char name[32];
    std::snprintf(name, sizeof(name), "step-%06zu", step_);
    const auto dir = cfg_.checkpoint_dir / name;
    save(dir);
    last_checkpoint_ = dir;
  }
  return rec;
}

const TrainLog& Trainer::run(const std::function<void(const TrainStep&)>& on_step) {
  while (step_ < cfg_.steps) {
    const TrainStep s = step();
    if (on_step) on_step(s);
  }
  return log_;
}

void Trainer::save(const std::filesystem::path& dir) const {
  nlohmann::json meta = {{"step", step_}};
  save_model(dir, model_, {m_, v_}, meta.dump());
}

}  // namespace caseenc
