#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace caseenc {

enum class TokenizerMode { kWhitespace, kCharUnigram };

struct TokenizerConfig {
  TokenizerMode mode = TokenizerMode::kCharUnigram;
  bool lowercase = true;
  bool strip_punctuation = true;
};

/// Splits text into tokens. Character-unigram mode yields one token per UTF-8
/// code point and drops whitespace; whitespace mode splits on ASCII spaces.
/// Lowercasing and punctuation stripping only touch ASCII characters.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg = {});

TokenizerMode parse_tokenizer_mode(std::string_view name);
std::string_view to_string(TokenizerMode mode);

}  // namespace caseenc
