#include "caseenc/article_corpus.hpp"

#include <set>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/io.hpp"

namespace caseenc {

using nlohmann::json;

namespace {

std::string path_of(const std::string& article_id, std::size_t act, std::size_t slot = SIZE_MAX,
                    std::size_t phrase = SIZE_MAX) {
  std::string p = "article '" + article_id + "' acts[" + std::to_string(act) + "]";
  if (slot != SIZE_MAX) p += "[" + std::to_string(slot) + "]";
  if (phrase != SIZE_MAX) p += "[" + std::to_string(phrase) + "]";
  return p;
}

// Odometer increment over slot choices, last slot fastest. False once wrapped.
template <typename ActTokens>
bool advance(std::vector<std::size_t>& choice, const ActTokens& act) {
  for (std::size_t s = act.size(); s-- > 0;) {
    if (++choice[s] < act[s].size()) return true;
    choice[s] = 0;
  }
  return false;
}

}  // namespace

void validate(const ArticleSpec& spec) {
  if (spec.article_id.empty()) throw ValidationError("article_id is empty");
  if (spec.acts.empty()) throw ValidationError("article '" + spec.article_id + "' has no acts");
  for (std::size_t a = 0; a < spec.acts.size(); ++a) {
    const Act& act = spec.acts[a];
    if (act.empty()) throw ValidationError(path_of(spec.article_id, a) + " has no slots");
    for (std::size_t s = 0; s < act.size(); ++s) {
      if (act[s].empty()) throw ValidationError(path_of(spec.article_id, a, s) + " is an empty slot");
      for (std::size_t p = 0; p < act[s].size(); ++p) {
        if (act[s][p].empty())
          throw ValidationError(path_of(spec.article_id, a, s, p) + " is an empty phrase");
      }
    }
  }
}

std::size_t count_branches(const ArticleSpec& spec) {
  std::size_t total = 0;
  for (const Act& act : spec.acts) {
    std::size_t prod = 1;
    for (const Slot& slot : act) prod *= slot.size();
    total += act.empty() ? 0 : prod;
  }
  return total;
}

std::vector<UnambiguousArticle> expand_branches(const ArticleSpec& spec, const TokenizerConfig& cfg) {
  validate(spec);

  // Tokenize each phrase once.
  std::vector<std::vector<std::vector<std::vector<std::string>>>> toks(spec.acts.size());
  for (std::size_t a = 0; a < spec.acts.size(); ++a) {
    for (std::size_t s = 0; s < spec.acts[a].size(); ++s) {
      auto& slot_toks = toks[a].emplace_back();
      for (std::size_t p = 0; p < spec.acts[a][s].size(); ++p) {
        slot_toks.push_back(tokenize(spec.acts[a][s][p], cfg));
        if (slot_toks.back().empty())
          throw ValidationError(path_of(spec.article_id, a, s, p) + " has no tokens after tokenization");
      }
    }
  }

  std::vector<UnambiguousArticle> out;
  out.reserve(count_branches(spec));
  for (std::size_t a = 0; a < spec.acts.size(); ++a) {
    const auto& act = toks[a];
    std::vector<std::size_t> choice(act.size(), 0);
    while (true) {
      UnambiguousArticle branch{spec.article_id, out.size(), {}};
      for (std::size_t s = 0; s < act.size(); ++s) {
        const auto& phrase = act[s][choice[s]];
        branch.keyword_sequence.insert(branch.keyword_sequence.end(), phrase.begin(), phrase.end());
      }
      out.push_back(std::move(branch));

      if (!advance(choice, act)) break;
    }
  }
  return out;
}

bool ArticleCorpus::contains(const std::string& article_id) const {
  return ranges_.count(article_id) != 0;
}

ArticleCorpus::Range ArticleCorpus::article_range(const std::string& article_id) const {
  auto it = ranges_.find(article_id);
  if (it == ranges_.end()) throw ValidationError("article '" + article_id + "' is not in the corpus");
  return it->second;
}

std::size_t ArticleCorpus::global_index(const std::string& article_id, std::size_t branch_index) const {
  Range r = article_range(article_id);
  if (branch_index >= r.count)
    throw ValidationError("article '" + article_id + "' has no branch " + std::to_string(branch_index));
  return r.begin + branch_index;
}

ArticleCorpus build_corpus(const std::vector<ArticleSpec>& specs, const TokenizerConfig& cfg) {
  ArticleCorpus corpus;
  for (const ArticleSpec& spec : specs) {
    if (corpus.ranges_.count(spec.article_id))
      throw ValidationError("duplicate article_id '" + spec.article_id + "'");
    auto branches = expand_branches(spec, cfg);
    corpus.ranges_[spec.article_id] = {corpus.branches_.size(), branches.size()};
    corpus.article_ids_.push_back(spec.article_id);
    for (auto& b : branches) corpus.branches_.push_back(std::move(b));
  }
  return corpus;
}

std::vector<ArticleSpec> parse_article_specs(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("article spec: " + describe_offset(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                     e.what());
  }
  if (!doc.is_object() || !doc.contains("articles") || !doc["articles"].is_array())
    throw ParseError("article spec: top level must be an object with an 'articles' array");

  std::vector<ArticleSpec> specs;
  const json& arr = doc["articles"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "articles[" + std::to_string(i) + "]";
    const json& item = arr[i];
    if (!item.is_object()) throw ParseError(where + ": expected an object");
    if (!item.contains("article_id") || !item["article_id"].is_string())
      throw ParseError(where + ".article_id: expected a string");
    if (!item.contains("acts") || !item["acts"].is_array())
      throw ParseError(where + ".acts: expected a list of acts");

    ArticleSpec spec;
    spec.article_id = item["article_id"].get<std::string>();
    const json& acts = item["acts"];
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const std::string act_where = where + ".acts[" + std::to_string(a) + "]";
      if (!acts[a].is_array()) throw ParseError(act_where + ": expected a list of slots");
      Act act;
      for (std::size_t s = 0; s < acts[a].size(); ++s) {
        const json& slot = acts[a][s];
        const std::string slot_where = act_where + "[" + std::to_string(s) + "]";
        if (!slot.is_array()) throw ParseError(slot_where + ": expected a list of phrases");
        Slot phrases;
        for (std::size_t p = 0; p < slot.size(); ++p) {
          if (!slot[p].is_string())
            throw ParseError(slot_where + "[" + std::to_string(p) + "]: expected a string");
          phrases.push_back(slot[p].get<std::string>());
        }
        act.push_back(std::move(phrases));
      }
      spec.acts.push_back(std::move(act));
    }
    validate(spec);
    specs.push_back(std::move(spec));
  }

  std::set<std::string> seen;
  for (const auto& s : specs) {
    if (!seen.insert(s.article_id).second)
      throw ValidationError("duplicate article_id '" + s.article_id + "'");
  }
  return specs;
}

std::vector<ArticleSpec> load_article_specs(const std::filesystem::path& path) {
  try {
    return parse_article_specs(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_article_specs(const std::vector<ArticleSpec>& specs) {
  json arr = json::array();
  for (const auto& spec : specs) {
    json acts = json::array();
    for (const Act& act : spec.acts) {
      json slots = json::array();
      for (const Slot& slot : act) slots.push_back(slot);
      acts.push_back(std::move(slots));
    }
    arr.push_back({{"article_id", spec.article_id}, {"acts", std::move(acts)}});
  }
  json doc = {{"articles", std::move(arr)}};
  return doc.dump(2) + "\n";
}

void save_article_specs(const std::filesystem::path& path, const std::vector<ArticleSpec>& specs) {
  write_text_file(path, serialize_article_specs(specs));
}

}  // namespace caseenc
