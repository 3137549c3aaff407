#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace caseenc {

struct CaseDocument {
  std::string case_id;
  std::string facts;
  std::string holding;
  std::string decision;
  std::vector<std::string> articles;  // sorted, unique

  bool operator==(const CaseDocument&) const = default;
};

/// Facts-only query case.
struct QueryCase {
  std::string query_id;
  std::string facts;

  bool operator==(const QueryCase&) const = default;
};

/// Sorts and deduplicates the article set; throws on empty id or facts.
void normalize_and_check(CaseDocument& doc);

// Case corpora are JSON lines, one object per line:
//   {"case_id", "facts", "holding", "decision", "articles": [...]}
// Query files hold {"query_id", "facts"} per line.
std::vector<CaseDocument> parse_cases_jsonl(const std::string& text);
std::vector<CaseDocument> load_cases(const std::filesystem::path& path);
std::string serialize_cases_jsonl(const std::vector<CaseDocument>& cases);

std::vector<QueryCase> parse_queries_jsonl(const std::string& text);
std::vector<QueryCase> load_queries(const std::filesystem::path& path);
std::string serialize_queries_jsonl(const std::vector<QueryCase>& queries);

}  // namespace caseenc
