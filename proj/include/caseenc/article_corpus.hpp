#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "caseenc/tokenizer.hpp"

namespace caseenc {

/// Alternative keyword phrases that may fill one position of an act.
using Slot = std::vector<std::string>;
/// Slots of one act, read in order.
using Act = std::vector<Slot>;

/// Structured encoding of a statute article. Each act describes one kind of
/// conduct; the phrases of a slot are parallel alternatives and the slots of
/// an act are sequential.
struct ArticleSpec {
  std::string article_id;
  std::vector<Act> acts;

  bool operator==(const ArticleSpec&) const = default;
};

/// One branch of an article: a single choice of phrase per slot of one act.
struct UnambiguousArticle {
  std::string article_id;
  std::size_t branch_index = 0;
  std::vector<std::string> keyword_sequence;

  bool operator==(const UnambiguousArticle&) const = default;
};

/// All branches of a set of articles. `branches()` enumerates them globally in
/// spec order then branch order; `article_range()` gives each article's span.
class ArticleCorpus {
 public:
  struct Range {
    std::size_t begin = 0;
    std::size_t count = 0;
  };

  ArticleCorpus() = default;

  const std::vector<UnambiguousArticle>& branches() const { return branches_; }
  const std::vector<std::string>& article_ids() const { return article_ids_; }
  bool empty() const { return branches_.empty(); }
  std::size_t size() const { return branches_.size(); }

  bool contains(const std::string& article_id) const;
  Range article_range(const std::string& article_id) const;
  std::size_t branch_count(const std::string& article_id) const {
    return article_range(article_id).count;
  }
  /// Global position of (article_id, branch_index).
  std::size_t global_index(const std::string& article_id, std::size_t branch_index) const;

 private:
  friend ArticleCorpus build_corpus(const std::vector<ArticleSpec>&, const TokenizerConfig&);

  std::vector<UnambiguousArticle> branches_;
  std::vector<std::string> article_ids_;
  std::map<std::string, Range> ranges_;
};

/// Throws ValidationError naming the first empty act/slot/phrase.
void validate(const ArticleSpec& spec);

/// Union over acts of the Cartesian product of that act's slots. The last slot
/// varies fastest. Phrases are split with the shared tokenizer.
std::vector<UnambiguousArticle> expand_branches(const ArticleSpec& spec,
                                                const TokenizerConfig& cfg = {});

/// Σ_acts Π_slots |slot|, computed without expanding.
std::size_t count_branches(const ArticleSpec& spec);

ArticleCorpus build_corpus(const std::vector<ArticleSpec>& specs, const TokenizerConfig& cfg = {});

// Article-spec files are JSON documents:
//   {"articles": [{"article_id": "...", "acts": [[["phrase", ...], ...], ...]}]}
// where each act is a list of slots and each slot a list of alternative phrases.
std::vector<ArticleSpec> parse_article_specs(const std::string& text);
std::vector<ArticleSpec> load_article_specs(const std::filesystem::path& path);
std::string serialize_article_specs(const std::vector<ArticleSpec>& specs);
void save_article_specs(const std::filesystem::path& path, const std::vector<ArticleSpec>& specs);

}  // namespace caseenc
