#include "caseenc/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "caseenc/error.hpp"

namespace caseenc {
namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: pass through as its own token
}

bool is_ascii_space(unsigned char c) { return c < 0x80 && std::isspace(c) != 0; }
bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

std::string normalize(std::string_view piece, const TokenizerConfig& cfg) {
  std::string out;
  out.reserve(piece.size());
  for (char ch : piece) {
    auto c = static_cast<unsigned char>(ch);
    if (cfg.strip_punctuation && is_ascii_punct(c)) continue;
    out.push_back(cfg.lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  std::vector<std::string> tokens;
  if (cfg.mode == TokenizerMode::kWhitespace) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t start = i;
      while (i < text.size() && !is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
      if (i > start) {
        std::string tok = normalize(text.substr(start, i - start), cfg);
        if (!tok.empty()) tokens.push_back(std::move(tok));
      }
    }
    return tokens;
  }

  std::size_t i = 0;
  while (i < text.size()) {
    auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = std::min(utf8_length(lead), text.size() - i);
    if (!(len == 1 && is_ascii_space(lead))) {
      std::string tok = normalize(text.substr(i, len), cfg);
      if (!tok.empty()) tokens.push_back(std::move(tok));
    }
    i += len;
  }
  return tokens;
}

TokenizerMode parse_tokenizer_mode(std::string_view name) {
  if (name == "whitespace") return TokenizerMode::kWhitespace;
  if (name == "char" || name == "character-unigram") return TokenizerMode::kCharUnigram;
  throw ValidationError("unknown tokenizer mode '" + std::string(name) + "'");
}

std::string_view to_string(TokenizerMode mode) {
  return mode == TokenizerMode::kWhitespace ? "whitespace" : "character-unigram";
}

}  // namespace caseenc
