#pragma once

// Shared setup for tests that need a trained-ready corpus: a synthetic
// statute/case corpus with its relevance weights and a fresh encoder.

#include "caseenc/bm25.hpp"
#include "caseenc/model.hpp"
#include "caseenc/relevance.hpp"
#include "caseenc/synth_corpus.hpp"

namespace fixture {

struct Pipeline {
  caseenc::SynthCorpus synth;
  caseenc::ArticleCorpus corpus;
  std::vector<caseenc::SimilarityProfile> profiles;
  caseenc::WeightTable weights;
};

inline Pipeline weigh(caseenc::SynthCorpus synth, const std::vector<caseenc::CaseDocument>& cases) {
  Pipeline p;
  p.synth = std::move(synth);
  p.corpus = caseenc::build_corpus(p.synth.articles);
  const caseenc::Bm25Index index(p.corpus);
  p.profiles = caseenc::similarity_profiles(cases, p.corpus, index);
  p.weights = caseenc::pairwise_weights(cases, p.profiles);
  return p;
}

inline Pipeline small_pipeline(std::uint64_t seed = 7) {
  caseenc::SynthSpec spec;
  spec.num_articles = 2;
  spec.branches_per_article = 2;
  spec.cases_per_branch = 5;
  spec.vocab_size = 60;
  spec.facts_length = {8, 12};
  spec.holding_length = {6, 8};
  spec.seed = seed;
  auto synth = caseenc::generate(spec);
  const auto cases = synth.cases;
  return weigh(std::move(synth), cases);
}

inline caseenc::CaseEncoderModel small_model(const std::vector<caseenc::CaseDocument>& cases,
                                            std::size_t hidden = 16, std::uint64_t seed = 1234) {
  caseenc::CaseEncoderModel m;
  m.vocab = caseenc::build_vocabulary(cases, m.tokenizer);
  m.config.vocab_size = m.vocab.size();
  m.config.hidden = hidden;
  m.config.layers = 1;
  m.config.heads = 2;
  m.config.ffn = 2 * hidden;
  m.config.max_length = 32;
  m.config.seed = seed;
  m.params = caseenc::init_params(m.config);
  return m;
}

}  // namespace fixture
