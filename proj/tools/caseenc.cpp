// caseenc: command-line driver for the case-encoder pipeline.
//
// Every subcommand writes into an output directory and leaves a copy of its
// effective configuration there as effective_config.toml. Values come from
// command-line flags first, then from a TOML file given with --config, then
// from the built-in defaults shown by --help.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "caseenc/article_corpus.hpp"
#include "caseenc/bm25.hpp"
#include "caseenc/case_document.hpp"
#include "caseenc/error.hpp"
#include "caseenc/io.hpp"
#include "caseenc/model.hpp"
#include "caseenc/relevance.hpp"
#include "caseenc/retrieval_eval.hpp"
#include "caseenc/sampler.hpp"
#include "caseenc/synth_corpus.hpp"
#include "caseenc/trainer.hpp"

namespace fs = std::filesystem;
using namespace caseenc;

namespace {

struct Common {
  std::uint64_t seed = 42;
  std::string tokenizer = "char";
};

TokenizerConfig tokenizer_config(const Common& c) {
  TokenizerConfig t;
  t.mode = parse_tokenizer_mode(c.tokenizer);
  return t;
}

struct GenCorpusOpts {
  fs::path out;
  SynthSpec spec;
  std::size_t train_per_branch = 10;
  std::size_t queries_per_branch = 2;
};

struct ExpandOpts {
  fs::path articles, out;
};

struct WeightsOpts {
  fs::path articles, cases, out;
  Bm25Params bm25;
};

struct SampleOpts {
  fs::path weights, out;
  SamplerConfig sampler;
  std::size_t steps = 100;
};

struct PretrainOpts {
  fs::path cases, weights, out, resume;
  EncoderConfig encoder;
  TrainConfig train;
  std::string reduction = "sum";
};

struct EncodeOpts {
  fs::path model, input, out;
  std::string kind = "candidates";
};

struct RankOpts {
  fs::path model, queries, candidates, out;
};

struct EvaluateOpts {
  fs::path run, qrels, out;
  std::vector<std::size_t> ks{10, 20, 30};
  bool skip_unjudged = false;
};

struct ExportOpts {
  fs::path model, cases, labels, out;
  std::string projection = "pca2d";
};

void prepare_out(const fs::path& out) { fs::create_directories(out); }

// Keeps global options and those of the active subcommand, dropping unset
// paths, so the file can be passed back through --config unchanged.
std::string effective_config(const CLI::App& app, const std::string& active) {
  std::istringstream in(app.config_to_str(true, false));
  std::string line, out;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const bool global = key.find('.') == std::string::npos;
    const bool own = key.rfind(active + ".", 0) == 0;
    if ((global || own) && line.compare(eq, std::string::npos, "=\"\"") != 0) out += line + "\n";
  }
  return out;
}

void warn_truncated(std::size_t over, std::size_t total, std::size_t max_length) {
  if (over > 0)
    std::cerr << "warning: " << over << " of " << total << " inputs exceed max_length " << max_length
              << " and were truncated\n";
}

// Inputs are built without the length cut so that overflow can be reported.
std::vector<int> full_candidate_input(const CaseEncoderModel& m, const CaseDocument& d) {
  const auto facts = m.facts_ids(d.facts);
  const auto holding = m.facts_ids(d.holding);
  return make_input(facts, holding, facts.size() + holding.size() + 3);
}

std::vector<int> full_query_input(const CaseEncoderModel& m, const std::string& facts) {
  const auto ids = m.facts_ids(facts);
  return make_input(ids, {}, ids.size() + 2);
}

EmbeddingBatch embed(const CaseEncoderModel& model, const std::vector<std::vector<int>>& seqs,
                     const std::vector<std::string>& ids) {
  auto batch = encode(seqs, model.params, model.config, ids);
  warn_truncated(batch.truncated, seqs.size(), model.config.max_length);
  return batch;
}

int run_gen_corpus(const GenCorpusOpts& o, const Common& c) {
  SynthSpec spec = o.spec;
  spec.seed = c.seed;
  const auto corpus = generate(spec);
  const auto split = split_corpus(corpus, o.train_per_branch, o.queries_per_branch);
  prepare_out(o.out);
  save_article_specs(o.out / "articles.json", corpus.articles);
  write_text_file(o.out / "train.jsonl", serialize_cases_jsonl(split.train));
  write_text_file(o.out / "candidates.jsonl", serialize_cases_jsonl(split.eval.candidates));
  write_text_file(o.out / "queries.jsonl", serialize_queries_jsonl(split.eval.queries));
  write_text_file(o.out / "qrels.tsv", split.eval.qrels.to_tsv());
  write_text_file(o.out / "labels.tsv", labels_to_tsv(split.train_labels));
  write_text_file(o.out / "candidate_labels.tsv", labels_to_tsv(split.candidate_labels));
  std::cout << "generated " << corpus.cases.size() << " cases: " << split.train.size() << " train, "
            << split.eval.queries.size() << " queries, " << split.eval.candidates.size() << " candidates\n";
  return 0;
}

int run_expand(const ExpandOpts& o, const Common& c) {
  const auto specs = load_article_specs(o.articles);
  const auto corpus = build_corpus(specs, tokenizer_config(c));
  std::string tsv = "article_id\tbranch_index\tkeywords\n";
  for (const auto& b : corpus.branches()) {
    tsv += b.article_id + "\t" + std::to_string(b.branch_index) + "\t";
    for (std::size_t i = 0; i < b.keyword_sequence.size(); ++i) tsv += (i ? " " : "") + b.keyword_sequence[i];
    tsv += "\n";
  }
  prepare_out(o.out);
  write_text_file(o.out / "branches.tsv", tsv);
  for (const auto& id : corpus.article_ids()) std::cout << id << ": " << corpus.branch_count(id) << " branches\n";
  return 0;
}

int run_weights(const WeightsOpts& o, const Common& c) {
  const auto tok = tokenizer_config(c);
  const auto corpus = build_corpus(load_article_specs(o.articles), tok);
  const auto cases = load_cases(o.cases);
  const Bm25Index index(corpus, o.bm25);
  const auto profiles = similarity_profiles(cases, corpus, index, tok);
  const auto table = pairwise_weights(cases, profiles);
  prepare_out(o.out);
  write_text_file(o.out / "weights.csv", table.to_csv());
  std::cout << "weights for " << table.size() << " cases (" << table.size() * table.size() << " ordered pairs)\n";
  return 0;
}

int run_sample(const SampleOpts& o, const Common& c) {
  const auto table = WeightTable::from_csv(read_text_file(o.weights));
  SamplerConfig cfg = o.sampler;
  cfg.seed = c.seed;
  BatchSchedule schedule(table, cfg);
  if (!schedule.excluded_anchors().empty())
    std::cerr << "note: " << schedule.excluded_anchors().size() << " cases have no positive above "
              << cfg.positive_floor << " and are never anchors\n";
  std::string manifest;
  for (std::size_t s = 0; s < o.steps; ++s) {
    const Batch& b = schedule.batch_for_step(s);
    manifest += manifest_line(s, b, class_partition(b.case_ids, table, cfg.class_threshold));
  }
  prepare_out(o.out);
  write_text_file(o.out / "manifest.jsonl", manifest);
  std::cout << o.steps << " batches from " << schedule.eligible_anchors().size() << " eligible anchors\n";
  return 0;
}

int run_pretrain(const PretrainOpts& o, const Common& c) {
  const auto cases = load_cases(o.cases);
  const auto weights = WeightTable::from_csv(read_text_file(o.weights));
  TrainConfig cfg = o.train;
  cfg.seed = c.seed;
  cfg.mlm_reduction = o.reduction == "mean" ? Reduction::kMean : Reduction::kSum;
  if (cfg.checkpoint_every > 0) cfg.checkpoint_dir = o.out / "checkpoints";
  prepare_out(o.out);

  auto report = [](const TrainStep& s) {
    if (s.step % 10 == 0 || s.step == 1)
      std::cerr << "step " << s.step << " loss " << s.total << " (mlm " << s.mlm << ", bcl " << s.bcl << ")\n";
  };
  std::optional<Trainer> trainer;
  if (!o.resume.empty()) {
    trainer.emplace(Trainer::resume(o.resume, cases, weights, cfg));
  } else {
    CaseEncoderModel model;
    model.tokenizer = tokenizer_config(c);
    model.vocab = build_vocabulary(cases, model.tokenizer);
    model.config = o.encoder;
    model.config.vocab_size = model.vocab.size();
    model.config.seed = c.seed;
    model.params = init_params(model.config);
    trainer.emplace(std::move(model), cases, weights, cfg);
  }
  trainer->run(report);
  trainer->save(o.out / "model");
  write_text_file(o.out / "train_log.jsonl", trainer->log().to_jsonl());
  const auto& last = trainer->log().steps;
  std::cout << "trained to step " << trainer->steps_done();
  if (!last.empty()) std::cout << ", final loss " << format_double(last.back().total);
  std::cout << "\n";
  return 0;
}

int run_encode(const EncodeOpts& o, const Common&) {
  const auto model = load_model(o.model).model;
  std::vector<std::string> ids;
  std::vector<std::vector<int>> seqs;
  if (o.kind == "queries") {
    for (const auto& q : load_queries(o.input)) {
      ids.push_back(q.query_id);
      seqs.push_back(full_query_input(model, q.facts));
    }
  } else {
    for (const auto& d : load_cases(o.input)) {
      ids.push_back(d.case_id);
      seqs.push_back(o.kind == "facts" ? full_query_input(model, d.facts) : full_candidate_input(model, d));
    }
  }
  const auto batch = embed(model, seqs, ids);
  prepare_out(o.out);
  const std::vector<std::string> no_labels(ids.size());
  write_text_file(o.out / "embeddings.csv", export_embeddings(ids, no_labels, batch.embeddings, ProjectionMode::kNone));
  std::cout << "encoded " << ids.size() << " inputs\n";
  return 0;
}

int run_rank(const RankOpts& o, const Common&) {
  const auto model = load_model(o.model).model;
  const auto queries = load_queries(o.queries);
  const auto pool = load_cases(o.candidates);
  const std::size_t max_len = model.config.max_length;
  std::size_t over = 0;
  for (const auto& q : queries) over += full_query_input(model, q.facts).size() > max_len;
  for (const auto& d : pool) over += full_candidate_input(model, d).size() > max_len;
  warn_truncated(over, queries.size() + pool.size(), max_len);

  const auto runs = rank_all(queries, pool, model);
  prepare_out(o.out);
  write_text_file(o.out / "run.tsv", runs_to_tsv(runs));
  std::cout << "ranked " << pool.size() << " candidates for " << queries.size() << " queries\n";
  return 0;
}

int run_evaluate(const EvaluateOpts& o, const Common&) {
  const auto runs = runs_from_tsv(read_text_file(o.run));
  const auto qrels = QrelSet::from_tsv(read_text_file(o.qrels));
  const auto table = evaluate(runs, qrels, o.ks, o.skip_unjudged);
  prepare_out(o.out);
  write_text_file(o.out / "metrics.json", table.to_json());
  for (std::size_t i = 0; i < table.ks.size(); ++i)
    std::cout << "NDCG@" << table.ks[i] << " " << format_double(table.means[i]) << "\n";
  if (table.skipped) std::cout << table.skipped << " queries skipped (no relevant candidate)\n";
  return 0;
}

int run_export(const ExportOpts& o, const Common&) {
  const auto model = load_model(o.model).model;
  const auto docs = load_cases(o.cases);
  std::map<std::string, std::string> label_of;
  if (!o.labels.empty())
    for (const auto& l : labels_from_tsv(read_text_file(o.labels))) label_of[l.case_id] = l.name();
  std::vector<std::string> ids, labels;
  std::vector<std::vector<int>> seqs;
  for (const auto& d : docs) {
    ids.push_back(d.case_id);
    seqs.push_back(full_candidate_input(model, d));
    const auto it = label_of.find(d.case_id);
    labels.push_back(it == label_of.end() ? "" : it->second);
  }
  const auto batch = embed(model, seqs, ids);
  const auto mode = o.projection == "none" ? ProjectionMode::kNone : ProjectionMode::kPca2d;
  prepare_out(o.out);
  write_text_file(o.out / "embeddings.csv", export_embeddings(ids, labels, batch.embeddings, mode));
  std::cout << "exported " << ids.size() << " embeddings (" << o.projection << ")\n";
  return 0;
}

void add_bcl_options(CLI::App* sub, BclHyperParams& bcl) {
  sub->add_option("--gamma", bcl.gamma, "BCL scale factor");
  sub->add_option("--optimum-pos", bcl.optimum_pos, "Positive optimum O_p");
  sub->add_option("--optimum-neg", bcl.optimum_neg, "Negative optimum O_n");
  sub->add_option("--margin-pos", bcl.margin_pos, "Positive margin");
  sub->add_option("--margin-neg", bcl.margin_neg, "Negative margin");
  sub->add_option("--class-threshold", bcl.class_threshold, "Weight above which two cases share a class (W_T)");
  sub->add_option("--lambda", bcl.lambda, "Weight of the contrastive term in the total loss");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Case encoder: article expansion, relevance weights, contrastive pre-training and retrieval"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string("caseenc ") + CASEENC_VERSION + " (C++" +
                                        std::to_string(__cplusplus / 100 % 100) + ", built " + __DATE__ + ")");
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");
  app.require_subcommand(1);

  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice");
  app.add_option("--tokenizer", common.tokenizer, "Tokenizer: char or whitespace")
      ->check(CLI::IsMember({"char", "whitespace"}));

  const auto existing = CLI::ExistingFile;

  GenCorpusOpts gen;
  auto* s_gen = app.add_subcommand("gen-corpus", "Generate a synthetic article/case corpus with a retrieval split");
  s_gen->add_option("--out", gen.out, "Output directory")->required();
  s_gen->add_option("--articles", gen.spec.num_articles, "Number of articles");
  s_gen->add_option("--branches", gen.spec.branches_per_article, "Branches per article");
  s_gen->add_option("--keywords", gen.spec.keywords_per_branch, "Keywords per branch");
  s_gen->add_option("--vocab", gen.spec.vocab_size, "Vocabulary size");
  s_gen->add_option("--cases-per-branch", gen.spec.cases_per_branch, "Cases generated per branch");
  s_gen->add_option("--facts-min", gen.spec.facts_length.min, "Minimum facts length in tokens");
  s_gen->add_option("--facts-max", gen.spec.facts_length.max, "Maximum facts length in tokens");
  s_gen->add_option("--holding-min", gen.spec.holding_length.min, "Minimum holding length in tokens");
  s_gen->add_option("--holding-max", gen.spec.holding_length.max, "Maximum holding length in tokens");
  s_gen->add_option("--noise", gen.spec.noise_rate, "Share of tokens replaced by off-branch keywords");
  s_gen->add_option("--train-per-branch", gen.train_per_branch, "Training cases per branch");
  s_gen->add_option("--queries-per-branch", gen.queries_per_branch, "Query cases per branch");

  ExpandOpts exp;
  auto* s_exp = app.add_subcommand("expand-articles", "Expand article specs into unambiguous branches");
  s_exp->add_option("--articles", exp.articles, "Article spec JSON file")->required()->check(existing);
  s_exp->add_option("--out", exp.out, "Output directory")->required();

  WeightsOpts wts;
  auto* s_wts = app.add_subcommand("weights", "Compute pairwise legal relevance weights");
  s_wts->add_option("--articles", wts.articles, "Article spec JSON file")->required()->check(existing);
  s_wts->add_option("--cases", wts.cases, "Case JSONL file")->required()->check(existing);
  s_wts->add_option("--out", wts.out, "Output directory")->required();
  s_wts->add_option("--k1", wts.bm25.k1, "BM25 term saturation");
  s_wts->add_option("--b", wts.bm25.b, "BM25 length normalization");

  SampleOpts smp;
  auto* s_smp = app.add_subcommand("sample", "Write the batch manifest the trainer would use");
  s_smp->add_option("--weights", smp.weights, "weights.csv from the weights subcommand")->required()->check(existing);
  s_smp->add_option("--out", smp.out, "Output directory")->required();
  s_smp->add_option("--steps", smp.steps, "Number of batches to write");
  s_smp->add_option("--quadruples", smp.sampler.quadruples_per_batch, "Anchor/positive pairs per batch (N)");
  s_smp->add_option("--positive-floor", smp.sampler.positive_floor, "Minimum weight of a sampled positive (W_pos)");
  s_smp->add_option("--class-threshold", smp.sampler.class_threshold, "Weight above which two cases share a class");
  s_smp->add_option("--resample-each-epoch", smp.sampler.resample_each_epoch, "Draw fresh positives every epoch");

  PretrainOpts pre;
  auto* s_pre = app.add_subcommand("pretrain", "Train the encoder with masked-LM and contrastive losses");
  s_pre->add_option("--cases", pre.cases, "Training case JSONL file")->required()->check(existing);
  s_pre->add_option("--weights", pre.weights, "weights.csv covering the training cases")->required()->check(existing);
  s_pre->add_option("--out", pre.out, "Output directory")->required();
  s_pre->add_option("--resume", pre.resume, "Checkpoint directory to continue from")->check(CLI::ExistingDirectory);
  s_pre->add_option("--hidden", pre.encoder.hidden, "Hidden size");
  s_pre->add_option("--layers", pre.encoder.layers, "Transformer layers");
  s_pre->add_option("--heads", pre.encoder.heads, "Attention heads");
  s_pre->add_option("--ffn", pre.encoder.ffn, "Feed-forward size");
  s_pre->add_option("--max-length", pre.encoder.max_length, "Maximum input length in tokens");
  s_pre->add_option("--init-std", pre.encoder.init_std, "Standard deviation of weight initialization");
  s_pre->add_option("--steps", pre.train.steps, "Total optimization steps");
  s_pre->add_option("--lr", pre.train.learning_rate, "Adam learning rate (1e-5 at full scale)");
  s_pre->add_option("--clip-norm", pre.train.clip_norm, "Global gradient norm limit; 0 disables");
  s_pre->add_option("--mask-rate", pre.train.mask_rate, "Share of tokens masked per sequence");
  s_pre->add_option("--bert-split", pre.train.bert_split, "Use 80/10/10 mask/random/keep replacement");
  s_pre->add_option("--reduction", pre.reduction, "Masked-LM loss reduction")->check(CLI::IsMember({"sum", "mean"}));
  s_pre->add_option("--checkpoint-every", pre.train.checkpoint_every, "Steps between checkpoints; 0 disables");
  s_pre->add_option("--quadruples", pre.train.sampler.quadruples_per_batch, "Anchor/positive pairs per batch (N)");
  s_pre->add_option("--positive-floor", pre.train.sampler.positive_floor, "Minimum weight of a sampled positive");
  add_bcl_options(s_pre, pre.train.bcl);

  EncodeOpts enc;
  auto* s_enc = app.add_subcommand("encode", "Write [CLS] embeddings of cases or queries");
  s_enc->add_option("--model", enc.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  s_enc->add_option("--input", enc.input, "Case or query JSONL file")->required()->check(existing);
  s_enc->add_option("--kind", enc.kind, "candidates (facts and holding), facts, or queries")
      ->check(CLI::IsMember({"candidates", "facts", "queries"}));
  s_enc->add_option("--out", enc.out, "Output directory")->required();

  RankOpts rnk;
  auto* s_rnk = app.add_subcommand("rank", "Rank candidates for each query by cosine similarity");
  s_rnk->add_option("--model", rnk.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  s_rnk->add_option("--queries", rnk.queries, "Query JSONL file")->required()->check(existing);
  s_rnk->add_option("--candidates", rnk.candidates, "Candidate case JSONL file")->required()->check(existing);
  s_rnk->add_option("--out", rnk.out, "Output directory")->required();

  EvaluateOpts ev;
  auto* s_ev = app.add_subcommand("evaluate", "Compute NDCG@k of a run against graded labels");
  s_ev->add_option("--run", ev.run, "run.tsv from the rank subcommand")->required()->check(existing);
  s_ev->add_option("--qrels", ev.qrels, "Graded labels TSV")->required()->check(existing);
  s_ev->add_option("--k", ev.ks, "Cutoffs")->delimiter(',');
  s_ev->add_option("--skip-unjudged", ev.skip_unjudged, "Leave out queries with no relevant candidate");
  s_ev->add_option("--out", ev.out, "Output directory")->required();

  ExportOpts ex;
  auto* s_ex = app.add_subcommand("export-embeddings", "Export case embeddings, optionally projected to 2-D");
  s_ex->add_option("--model", ex.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  s_ex->add_option("--cases", ex.cases, "Case JSONL file")->required()->check(existing);
  s_ex->add_option("--labels", ex.labels, "Optional case labels TSV")->check(existing);
  s_ex->add_option("--projection", ex.projection, "none or pca2d")->check(CLI::IsMember({"none", "pca2d"}));
  s_ex->add_option("--out", ex.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  struct Route {
    CLI::App* sub;
    const fs::path* out;
    std::function<int()> run;
  };
  const std::vector<Route> routes{
      {s_gen, &gen.out, [&] { return run_gen_corpus(gen, common); }},
      {s_exp, &exp.out, [&] { return run_expand(exp, common); }},
      {s_wts, &wts.out, [&] { return run_weights(wts, common); }},
      {s_smp, &smp.out, [&] { return run_sample(smp, common); }},
      {s_pre, &pre.out, [&] { return run_pretrain(pre, common); }},
      {s_enc, &enc.out, [&] { return run_encode(enc, common); }},
      {s_rnk, &rnk.out, [&] { return run_rank(rnk, common); }},
      {s_ev, &ev.out, [&] { return run_evaluate(ev, common); }},
      {s_ex, &ex.out, [&] { return run_export(ex, common); }},
  };
  try {
    for (const auto& r : routes) {
      if (!r.sub->parsed()) continue;
      const int status = r.run();
      write_text_file(*r.out / "effective_config.toml", effective_config(app, r.sub->get_name()));
      return status;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
