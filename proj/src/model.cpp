#include "caseenc/model.hpp"

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/io.hpp"

namespace caseenc {

std::vector<int> CaseEncoderModel::facts_ids(const std::string& facts) const {
  return vocab.ids(tokenize(facts, tokenizer));
}

std::vector<int> CaseEncoderModel::query_input(const std::string& facts) const {
  return make_input(facts_ids(facts), {}, config.max_length);
}

std::vector<int> CaseEncoderModel::candidate_input(const CaseDocument& doc) const {
  return make_input(facts_ids(doc.facts), vocab.ids(tokenize(doc.holding, tokenizer)), config.max_length);
}

Matrix CaseEncoderModel::embed_queries(const std::vector<std::string>& facts) const {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(facts.size());
  for (const auto& f : facts) seqs.push_back(query_input(f));
  return encode(seqs, params, config).embeddings;
}

Matrix CaseEncoderModel::embed_candidates(const std::vector<CaseDocument>& docs) const {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(docs.size());
  for (const auto& d : docs) seqs.push_back(candidate_input(d));
  return encode(seqs, params, config).embeddings;
}

Vocabulary build_vocabulary(const std::vector<CaseDocument>& cases, const TokenizerConfig& tok) {
  std::vector<std::vector<std::string>> lists;
  lists.reserve(2 * cases.size());
  for (const auto& c : cases) {
    lists.push_back(tokenize(c.facts, tok));
    lists.push_back(tokenize(c.holding, tok));
  }
  return Vocabulary::build(lists);
}

void save_model(const std::filesystem::path& dir, const CaseEncoderModel& model,
                const std::vector<EncoderParams>& extra, const std::string& metadata_json) {
  nlohmann::json meta = nlohmann::json::parse(metadata_json);
  meta["tokenizer"] = {{"mode", std::string(to_string(model.tokenizer.mode))},
                       {"lowercase", model.tokenizer.lowercase},
                       {"strip_punctuation", model.tokenizer.strip_punctuation}};
  Checkpoint ckpt{model.config, model.params, extra, meta.dump()};
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.bin", ckpt);
  write_text_file(dir / "vocab.txt", model.vocab.serialize());
}

LoadedModel load_model(const std::filesystem::path& dir) {
  Checkpoint ckpt = load_checkpoint(dir / "model.bin");
  LoadedModel out;
  out.model.config = ckpt.config;
  out.model.params = std::move(ckpt.params);
  out.model.vocab = Vocabulary::parse(read_text_file(dir / "vocab.txt"));
  if (out.model.vocab.size() != out.model.config.vocab_size)
    throw ParseError(dir.string() + ": vocabulary size does not match the checkpoint");
  nlohmann::json meta = nlohmann::json::parse(ckpt.metadata_json);
  if (meta.contains("tokenizer")) {
    const auto& t = meta["tokenizer"];
    out.model.tokenizer.mode = parse_tokenizer_mode(t.at("mode").get<std::string>());
    out.model.tokenizer.lowercase = t.at("lowercase").get<bool>();
    out.model.tokenizer.strip_punctuation = t.at("strip_punctuation").get<bool>();
  }
  out.extra = std::move(ckpt.extra);
  out.metadata_json = ckpt.metadata_json;
  return out;
}

}  // namespace caseenc
