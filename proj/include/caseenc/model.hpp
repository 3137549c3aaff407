#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "caseenc/case_document.hpp"
#include "caseenc/encoder.hpp"
#include "caseenc/tokenizer.hpp"

namespace caseenc {

/// Encoder parameters bundled with the vocabulary and tokenizer that map
/// case text to token ids.
struct CaseEncoderModel {
  EncoderConfig config;
  EncoderParams params;
  Vocabulary vocab;
  TokenizerConfig tokenizer;

  /// [CLS] facts [SEP]
  std::vector<int> query_input(const std::string& facts) const;
  /// [CLS] facts [SEP] holding [SEP]
  std::vector<int> candidate_input(const CaseDocument& doc) const;
  /// Token ids of the facts without special tokens.
  std::vector<int> facts_ids(const std::string& facts) const;

  Matrix embed_queries(const std::vector<std::string>& facts) const;
  Matrix embed_candidates(const std::vector<CaseDocument>& docs) const;
};

/// Vocabulary over the facts and holdings of `cases`.
Vocabulary build_vocabulary(const std::vector<CaseDocument>& cases, const TokenizerConfig& tok);

/// Writes <dir>/model.bin and <dir>/vocab.txt. Extra tensor sets (optimizer
/// state) and metadata are stored in model.bin.
void save_model(const std::filesystem::path& dir, const CaseEncoderModel& model,
                const std::vector<EncoderParams>& extra = {}, const std::string& metadata_json = "{}");

struct LoadedModel {
  CaseEncoderModel model;
  std::vector<EncoderParams> extra;
  std::string metadata_json;
};
LoadedModel load_model(const std::filesystem::path& dir);

}  // namespace caseenc
