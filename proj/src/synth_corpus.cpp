#include "caseenc/synth_corpus.hpp"

#include <map>
#include <sstream>

#include "caseenc/error.hpp"
#include "caseenc/random.hpp"

namespace caseenc {

namespace {

constexpr std::size_t kMinFiller = 8;
constexpr char32_t kFirstCodePoint = 0x4E00;  // CJK unified ideographs

std::string code_point_utf8(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return s;
}

std::size_t draw_length(const LengthRange& r, Rng& rng) { return r.min + uniform_index(rng, r.max - r.min + 1); }

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (const auto& t : toks) s += t;
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_articles == 0 || branches_per_article == 0 || keywords_per_branch == 0 || cases_per_branch == 0)
    throw ValidationError("synthetic corpus counts must be positive");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ValidationError("noise rate must lie in [0, 1)");
  if (facts_length.min == 0 || facts_length.max < facts_length.min || holding_length.min == 0 ||
      holding_length.max < holding_length.min)
    throw ValidationError("length ranges must be nonempty with 1 <= min <= max");
  const std::size_t keywords = num_articles * (1 + branches_per_article * keywords_per_branch);
  if (vocab_size < keywords + kMinFiller)
    throw ValidationError("vocabulary of " + std::to_string(vocab_size) + " cannot keep " +
                          std::to_string(num_articles * branches_per_article) +
                          " branches lexically distinct; need at least " + std::to_string(keywords + kMinFiller));
  if (holding_length.min < 1 + keywords_per_branch)
    throw ValidationError("holding length must fit the article keyword and every branch keyword");
  if (vocab_size > 20000) throw ValidationError("vocab_size above 20000 exceeds the synthetic alphabet");
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0x5e}));

  // Random assignment of code points to roles keeps corpora with different seeds distinct.
  std::vector<std::string> alphabet(spec.vocab_size);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) alphabet[i] = code_point_utf8(kFirstCodePoint + static_cast<char32_t>(i));
  shuffle(alphabet, rng);

  std::size_t next = 0;
  std::vector<std::string> article_kw(spec.num_articles);
  std::vector<std::vector<std::vector<std::string>>> branch_kw(spec.num_articles);
  for (std::size_t a = 0; a < spec.num_articles; ++a) {
    article_kw[a] = alphabet[next++];
    branch_kw[a].resize(spec.branches_per_article);
    for (auto& kws : branch_kw[a])
      for (std::size_t k = 0; k < spec.keywords_per_branch; ++k) kws.push_back(alphabet[next++]);
  }
  const std::vector<std::string> filler(alphabet.begin() + static_cast<std::ptrdiff_t>(next), alphabet.end());

  SynthCorpus out;
  for (std::size_t a = 0; a < spec.num_articles; ++a) {
    ArticleSpec art;
    art.article_id = "A" + std::to_string(a + 1);
    Slot phrases;
    for (const auto& kws : branch_kw[a]) phrases.push_back(join(kws));
    art.acts.push_back({Slot{article_kw[a]}, std::move(phrases)});
    out.articles.push_back(std::move(art));
  }

  std::size_t case_no = 0;
  for (std::size_t a = 0; a < spec.num_articles; ++a) {
    for (std::size_t b = 0; b < spec.branches_per_article; ++b) {
      std::vector<std::string> off_branch;
      for (std::size_t a2 = 0; a2 < spec.num_articles; ++a2)
        for (std::size_t b2 = 0; b2 < spec.branches_per_article; ++b2)
          if (a2 != a || b2 != b) off_branch.insert(off_branch.end(), branch_kw[a2][b2].begin(), branch_kw[a2][b2].end());

      for (std::size_t j = 0; j < spec.cases_per_branch; ++j) {
        const auto& kws = branch_kw[a][b];
        auto noisy = [&](std::string tok) {
          if (spec.noise_rate > 0.0 && !off_branch.empty() && uniform01(rng) < spec.noise_rate)
            return off_branch[uniform_index(rng, off_branch.size())];
          return tok;
        };

        std::vector<std::string> holding{article_kw[a]};
        holding.insert(holding.end(), kws.begin(), kws.end());
        const std::size_t h_len = draw_length(spec.holding_length, rng);
        while (holding.size() < h_len) holding.push_back(kws[uniform_index(rng, kws.size())]);
        for (auto& t : holding) t = noisy(std::move(t));
        shuffle(holding, rng);

        std::vector<std::string> facts{article_kw[a]};
        for (const auto& k : kws)
          if (uniform01(rng) < 0.75) facts.push_back(k);
        while (facts.size() < 3) facts.push_back(kws[uniform_index(rng, kws.size())]);
        for (auto& t : facts) t = noisy(std::move(t));
        const std::size_t f_len = std::max(draw_length(spec.facts_length, rng), facts.size());
        while (facts.size() < f_len) facts.push_back(filler[uniform_index(rng, filler.size())]);
        shuffle(facts, rng);

        std::vector<std::string> decision;
        for (int d = 0; d < 4; ++d) decision.push_back(filler[uniform_index(rng, filler.size())]);

        char id[32];
        std::snprintf(id, sizeof(id), "c%05zu", case_no++);
        CaseDocument doc{id, join(facts), join(holding), join(decision), {out.articles[a].article_id}};
        out.labels.push_back({doc.case_id, doc.articles.front(), b});
        out.cases.push_back(std::move(doc));
      }
    }
  }
  return out;
}

SynthSplit split_corpus(const SynthCorpus& corpus, std::size_t train_per_branch, std::size_t queries_per_branch) {
  std::map<std::string, std::size_t> seen;
  SynthSplit split;
  std::vector<std::size_t> query_idx, cand_idx;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    const std::size_t pos = seen[corpus.labels[i].name()]++;
    if (pos < train_per_branch) {
      split.train.push_back(corpus.cases[i]);
      split.train_labels.push_back(corpus.labels[i]);
    } else if (pos < train_per_branch + queries_per_branch) {
      query_idx.push_back(i);
    } else {
      cand_idx.push_back(i);
    }
  }
  for (std::size_t qi : query_idx) {
    const auto& q = corpus.cases[qi];
    split.eval.queries.push_back({"q" + q.case_id.substr(1), q.facts});
    for (std::size_t ci : cand_idx) {
      int grade = 0;
      if (corpus.labels[ci].article_id == corpus.labels[qi].article_id)
        grade = corpus.labels[ci].branch_index == corpus.labels[qi].branch_index ? 2 : 1;
      split.eval.qrels.set(split.eval.queries.back().query_id, corpus.cases[ci].case_id, grade);
    }
  }
  for (std::size_t ci : cand_idx) {
    split.eval.candidates.push_back(corpus.cases[ci]);
    split.candidate_labels.push_back(corpus.labels[ci]);
  }
  return split;
}

std::string labels_to_tsv(const std::vector<BranchLabel>& labels) {
  std::string out;
  for (const auto& l : labels) out += l.case_id + "\t" + l.article_id + "\t" + std::to_string(l.branch_index) + "\n";
  return out;
}

std::vector<BranchLabel> labels_from_tsv(const std::string& text) {
  std::vector<BranchLabel> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    BranchLabel l;
    if (!(std::getline(fields, l.case_id, '\t') && std::getline(fields, l.article_id, '\t') && (fields >> l.branch_index)))
      throw ParseError("labels line " + std::to_string(lineno) + ": expected case_id, article_id, branch_index");
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace caseenc
