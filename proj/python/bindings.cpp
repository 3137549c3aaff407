// Python bindings for the case-encoder core. Text formats are passed as
// strings and dense data as NumPy arrays; see caseencoder/__init__.py for the
// public surface.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "caseenc/article_corpus.hpp"
#include "caseenc/bcl_loss.hpp"
#include "caseenc/bm25.hpp"
#include "caseenc/case_document.hpp"
#include "caseenc/error.hpp"
#include "caseenc/model.hpp"
#include "caseenc/relevance.hpp"
#include "caseenc/retrieval_eval.hpp"
#include "caseenc/sampler.hpp"
#include "caseenc/synth_corpus.hpp"
#include "caseenc/trainer.hpp"

namespace py = pybind11;
using namespace caseenc;

namespace {

TokenizerConfig tokenizer(const std::string& mode) {
  TokenizerConfig t;
  t.mode = parse_tokenizer_mode(mode);
  return t;
}

BatchPartition make_partition(const std::vector<int>& labels, const Matrix& weights) {
  const std::size_t n = labels.size();
  if (weights.rows() != static_cast<Eigen::Index>(n) || weights.cols() != static_cast<Eigen::Index>(n))
    throw ValidationError("weights must be a square matrix matching the number of labels");
  BatchPartition p;
  for (std::size_t i = 0; i < n; ++i) p.case_ids.push_back(std::to_string(i));
  p.labels = labels;
  p.num_classes = labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
  p.weights.assign(weights.data(), weights.data() + weights.size());
  return p;
}

BclHyperParams bcl_params(double gamma, double optimum_pos, double optimum_neg, double margin_pos,
                          double margin_neg) {
  BclHyperParams hp;
  hp.gamma = gamma;
  hp.optimum_pos = optimum_pos;
  hp.optimum_neg = optimum_neg;
  hp.margin_pos = margin_pos;
  hp.margin_neg = margin_neg;
  hp.validate();
  return hp;
}

// Holds the training data so the Trainer's references stay valid.
struct PyTrainer {
  std::vector<CaseDocument> cases;
  WeightTable weights;
  std::unique_ptr<Trainer> trainer;
};

}  // namespace

PYBIND11_MODULE(_caseencoder, m) {
  m.doc() = "Case encoder core: article expansion, relevance weights, contrastive training and retrieval";
  m.attr("__version__") = CASEENC_VERSION;

  static py::exception<Error> base(m, "CaseEncError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<NoPositiveError>(m, "NoPositiveError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  m.def("tokenize", [](const std::string& text, const std::string& mode) { return tokenize(text, tokenizer(mode)); },
        py::arg("text"), py::arg("mode") = "char");

  m.def(
      "expand_articles",
      [](const std::string& json, const std::string& mode) {
        std::vector<std::tuple<std::string, std::size_t, std::vector<std::string>>> out;
        for (const auto& spec : parse_article_specs(json))
          for (auto& b : expand_branches(spec, tokenizer(mode)))
            out.emplace_back(b.article_id, b.branch_index, std::move(b.keyword_sequence));
        return out;
      },
      py::arg("articles_json"), py::arg("mode") = "char",
      "List of (article_id, branch_index, keywords) for every branch.");
  m.def("count_branches", [](const std::string& json) {
    std::vector<std::size_t> out;
    for (const auto& spec : parse_article_specs(json)) out.push_back(count_branches(spec));
    return out;
  });

  m.def(
      "bm25_scores",
      [](const std::string& articles_json, const std::vector<std::string>& query, double k1, double b,
         const std::string& mode) {
        const auto corpus = build_corpus(parse_article_specs(articles_json), tokenizer(mode));
        const Bm25Index index(corpus, {k1, b});
        std::vector<double> out;
        for (std::size_t d = 0; d < corpus.size(); ++d) out.push_back(index.score(d, query));
        return out;
      },
      py::arg("articles_json"), py::arg("query"), py::arg("k1") = 1.5, py::arg("b") = 0.75, py::arg("mode") = "char",
      "BM25 score of a token list against every branch, in corpus order.");

  m.def(
      "relevance_weights",
      [](const std::string& articles_json, const std::string& cases_jsonl, double k1, double b,
         const std::string& mode) {
        const auto tok = tokenizer(mode);
        const auto corpus = build_corpus(parse_article_specs(articles_json), tok);
        const auto cases = parse_cases_jsonl(cases_jsonl);
        const Bm25Index index(corpus, {k1, b});
        const auto table = pairwise_weights(cases, similarity_profiles(cases, corpus, index, tok));
        Matrix w(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(table.size()));
        for (std::size_t i = 0; i < table.size(); ++i)
          for (std::size_t j = 0; j < table.size(); ++j)
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.at(i, j);
        return py::make_tuple(table.case_ids(), w, table.to_csv());
      },
      py::arg("articles_json"), py::arg("cases_jsonl"), py::arg("k1") = 1.5, py::arg("b") = 0.75,
      py::arg("mode") = "char", "Returns (case_ids, weight matrix, weights CSV text).");

  m.def(
      "class_partition",
      [](const std::string& weights_csv, const std::vector<std::string>& batch, double threshold) {
        return class_partition(batch, WeightTable::from_csv(weights_csv), threshold).labels;
      },
      py::arg("weights_csv"), py::arg("batch"), py::arg("threshold") = 0.25);

  m.def(
      "bcl_loss",
      [](const Matrix& embeddings, const std::vector<int>& labels, const Matrix& weights, double gamma,
         double optimum_pos, double optimum_neg, double margin_pos, double margin_neg) {
        const auto hp = bcl_params(gamma, optimum_pos, optimum_neg, margin_pos, margin_neg);
        const auto r = bcl_gradient(embeddings, make_partition(labels, weights), hp);
        return py::make_tuple(r.value, r.gradient);
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("weights"), py::arg("gamma") = 16.0,
      py::arg("optimum_pos") = 1.25, py::arg("optimum_neg") = 0.25, py::arg("margin_pos") = 0.75,
      py::arg("margin_neg") = 0.25,
      "Contrastive loss and its gradient for a batch. labels must be canonical class ids.");

  m.def(
      "ndcg_at_k",
      [](const std::vector<std::string>& ranked, const std::map<std::string, int>& grades, std::size_t k) {
        RankedList r{"q", ranked, std::vector<double>(ranked.size(), 0.0)};
        QrelSet q;
        for (const auto& [id, g] : grades) q.set("q", id, g);
        return ndcg_at_k(r, q, k);
      },
      py::arg("ranked"), py::arg("grades"), py::arg("k"));

  m.def(
      "pca2d",
      [](const Matrix& points) {
        const auto p = pca2d(points);
        return py::make_tuple(p.coords, p.components, p.eigenvalues, p.explained_variance);
      },
      py::arg("points"), "Returns (coords, components, eigenvalues, explained_variance).");

  m.def(
      "generate_corpus",
      [](std::size_t articles, std::size_t branches, std::size_t keywords, std::size_t vocab,
         std::size_t cases_per_branch, double noise, std::uint64_t seed) {
        SynthSpec s;
        s.num_articles = articles;
        s.branches_per_article = branches;
        s.keywords_per_branch = keywords;
        s.vocab_size = vocab;
        s.cases_per_branch = cases_per_branch;
        s.noise_rate = noise;
        s.seed = seed;
        const auto c = generate(s);
        py::dict out;
        out["articles_json"] = serialize_article_specs(c.articles);
        out["cases_jsonl"] = serialize_cases_jsonl(c.cases);
        out["labels_tsv"] = labels_to_tsv(c.labels);
        return out;
      },
      py::arg("articles") = 3, py::arg("branches") = 3, py::arg("keywords") = 4, py::arg("vocab") = 160,
      py::arg("cases_per_branch") = 16, py::arg("noise") = 0.0, py::arg("seed") = 7);

  py::class_<CaseEncoderModel>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& dir) { return load_model(dir).model; }, py::arg("path"))
      .def(
          "save", [](const CaseEncoderModel& self, const std::filesystem::path& dir) { save_model(dir, self); },
          py::arg("path"))
      .def_property_readonly("hidden", [](const CaseEncoderModel& self) { return self.config.hidden; })
      .def_property_readonly("vocab_size", [](const CaseEncoderModel& self) { return self.config.vocab_size; })
      .def("embed_queries", &CaseEncoderModel::embed_queries, py::arg("facts"))
      .def(
          "embed_candidates",
          [](const CaseEncoderModel& self, const std::string& cases_jsonl) {
            return self.embed_candidates(parse_cases_jsonl(cases_jsonl));
          },
          py::arg("cases_jsonl"))
      .def(
          "rank",
          [](const CaseEncoderModel& self, const std::string& queries_jsonl, const std::string& candidates_jsonl) {
            return runs_to_tsv(
                rank_all(parse_queries_jsonl(queries_jsonl), parse_cases_jsonl(candidates_jsonl), self));
          },
          py::arg("queries_jsonl"), py::arg("candidates_jsonl"), "Ranked run as TSV text.");

  py::class_<PyTrainer>(m, "Trainer")
      .def(py::init([](const std::string& cases_jsonl, const std::string& weights_csv, std::size_t steps,
                       double learning_rate, double lambda_, std::size_t quadruples, std::size_t hidden,
                       std::size_t layers, std::size_t heads, std::size_t ffn, std::size_t max_length,
                       std::uint64_t seed) {
             auto t = std::make_unique<PyTrainer>();
             t->cases = parse_cases_jsonl(cases_jsonl);
             t->weights = WeightTable::from_csv(weights_csv);
             CaseEncoderModel model;
             model.vocab = build_vocabulary(t->cases, model.tokenizer);
             model.config.vocab_size = model.vocab.size();
             model.config.hidden = hidden;
             model.config.layers = layers;
             model.config.heads = heads;
             model.config.ffn = ffn;
             model.config.max_length = max_length;
             model.config.seed = seed;
             model.params = init_params(model.config);
             TrainConfig cfg;
             cfg.steps = steps;
             cfg.learning_rate = learning_rate;
             cfg.bcl.lambda = lambda_;
             cfg.sampler.quadruples_per_batch = quadruples;
             cfg.seed = seed;
             t->trainer = std::make_unique<Trainer>(std::move(model), t->cases, t->weights, cfg);
             return t;
           }),
           py::arg("cases_jsonl"), py::arg("weights_csv"), py::arg("steps") = 200, py::arg("learning_rate") = 1e-3,
           py::arg("lambda_") = BclHyperParams{}.lambda, py::arg("quadruples") = 4, py::arg("hidden") = 64,
           py::arg("layers") = 2, py::arg("heads") = 4, py::arg("ffn") = 128, py::arg("max_length") = 128,
           py::arg("seed") = 42)
      .def(
          "run",
          [](PyTrainer& self) {
            py::gil_scoped_release release;
            self.trainer->run();
          },
          "Trains until the configured number of steps.")
      .def(
          "step",
          [](PyTrainer& self) {
            const auto s = self.trainer->step();
            return py::dict(py::arg("step") = s.step, py::arg("mlm") = s.mlm, py::arg("bcl") = s.bcl,
                            py::arg("total") = s.total);
          })
      .def("batch_loss", [](const PyTrainer& self, std::size_t step) { return self.trainer->batch_loss(step).total; })
      .def_property_readonly("steps_done", [](const PyTrainer& self) { return self.trainer->steps_done(); })
      .def_property_readonly("log_jsonl", [](const PyTrainer& self) { return self.trainer->log().to_jsonl(); })
      .def_property_readonly("model", [](const PyTrainer& self) { return self.trainer->model(); });
}
