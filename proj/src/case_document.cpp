#include "caseenc/case_document.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "caseenc/error.hpp"
#include "caseenc/io.hpp"

namespace caseenc {

using nlohmann::json;

namespace {

std::string require_string(const json& obj, const char* field, std::size_t line, bool required = true) {
  if (!obj.contains(field)) {
    if (!required) return {};
    throw ParseError("line " + std::to_string(line) + ": missing field '" + field + "'");
  }
  if (!obj[field].is_string())
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' must be a string");
  return obj[field].get<std::string>();
}

template <typename Fn>
void for_each_json_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) throw ParseError("line " + std::to_string(lineno) + ": expected an object");
    fn(obj, lineno);
  }
}

}  // namespace

void normalize_and_check(CaseDocument& doc) {
  if (doc.case_id.empty()) throw ValidationError("case with empty case_id");
  if (doc.facts.empty()) throw ValidationError("case '" + doc.case_id + "' has empty facts");
  std::sort(doc.articles.begin(), doc.articles.end());
  doc.articles.erase(std::unique(doc.articles.begin(), doc.articles.end()), doc.articles.end());
}

std::vector<CaseDocument> parse_cases_jsonl(const std::string& text) {
  std::vector<CaseDocument> cases;
  std::set<std::string> seen;
  for_each_json_line(text, [&](const json& obj, std::size_t lineno) {
    CaseDocument doc;
    doc.case_id = require_string(obj, "case_id", lineno);
    doc.facts = require_string(obj, "facts", lineno);
    doc.holding = require_string(obj, "holding", lineno, false);
    doc.decision = require_string(obj, "decision", lineno, false);
    if (obj.contains("articles")) {
      if (!obj["articles"].is_array())
        throw ParseError("line " + std::to_string(lineno) + ": field 'articles' must be a list");
      for (const auto& a : obj["articles"]) {
        if (!a.is_string())
          throw ParseError("line " + std::to_string(lineno) + ": article ids must be strings");
        doc.articles.push_back(a.get<std::string>());
      }
    }
    try {
      normalize_and_check(doc);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(doc.case_id).second)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate case_id '" + doc.case_id + "'");
    cases.push_back(std::move(doc));
  });
  return cases;
}

std::vector<CaseDocument> load_cases(const std::filesystem::path& path) {
  try {
    return parse_cases_jsonl(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_cases_jsonl(const std::vector<CaseDocument>& cases) {
  std::string out;
  for (const auto& c : cases) {
    json obj = {{"case_id", c.case_id},
                {"facts", c.facts},
                {"holding", c.holding},
                {"decision", c.decision},
                {"articles", c.articles}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<QueryCase> parse_queries_jsonl(const std::string& text) {
  std::vector<QueryCase> queries;
  std::set<std::string> seen;
  for_each_json_line(text, [&](const json& obj, std::size_t lineno) {
    QueryCase q{require_string(obj, "query_id", lineno), require_string(obj, "facts", lineno)};
    if (q.query_id.empty() || q.facts.empty())
      throw ValidationError("line " + std::to_string(lineno) + ": query_id and facts must be nonempty");
    if (!seen.insert(q.query_id).second)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate query_id '" + q.query_id + "'");
    queries.push_back(std::move(q));
  });
  return queries;
}

std::vector<QueryCase> load_queries(const std::filesystem::path& path) {
  try {
    return parse_queries_jsonl(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_queries_jsonl(const std::vector<QueryCase>& queries) {
  std::string out;
  for (const auto& q : queries) {
    out += json{{"query_id", q.query_id}, {"facts", q.facts}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace caseenc
