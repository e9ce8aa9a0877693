#pragma once
// Concept bank: the ordered set of forgery-related words used to build the
// synthetic-class prompts, plus the pristine-class word. Banks are immutable
// values once constructed; retrieval from an LLM is advisory and the caller
// merges results explicitly.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"

namespace pfdet {

enum class ConceptSource { BuiltIn, File, Llm };

struct Concept {
  std::string text;  // non-empty, lowercase word or short phrase
  ConceptSource source = ConceptSource::BuiltIn;
  std::optional<std::string> retrieved_at;  // UTC timestamp for llm-sourced entries
};

struct ConceptBank {
  std::vector<Concept> fake_concepts;  // ordered; at least one entry
  Concept real_word{"real", ConceptSource::BuiltIn, std::nullopt};
  std::string query;  // LLM retrieval query, may be empty

  // Equality is over content (texts and query); provenance metadata is not
  // part of a bank's identity.
  friend bool operator==(const ConceptBank& a, const ConceptBank& b) {
    if (a.real_word.text != b.real_word.text || a.query != b.query) return false;
    if (a.fake_concepts.size() != b.fake_concepts.size()) return false;
    for (std::size_t i = 0; i < a.fake_concepts.size(); ++i)
      if (a.fake_concepts[i].text != b.fake_concepts[i].text) return false;
    return true;
  }
};

inline constexpr const char* kDefaultQuery = "what are the characters of deepfake images?";

inline void validate_bank(const ConceptBank& bank) {
  if (bank.fake_concepts.empty())
    fail(ErrorKind::Validation, "concept bank must contain at least one fake concept");
  if (trim_copy(bank.real_word.text).empty())
    fail(ErrorKind::Validation, "real-class word must be non-empty");
  std::set<std::string> seen;
  for (const Concept& c : bank.fake_concepts) {
    const std::string key = to_lower_copy(trim_copy(c.text));
    if (key.empty()) fail(ErrorKind::Validation, "concept text must be non-empty");
    if (!seen.insert(key).second)
      fail(ErrorKind::Validation, "duplicate concept in bank: '" + key + "'");
  }
  if (seen.count(to_lower_copy(trim_copy(bank.real_word.text))) != 0)
    fail(ErrorKind::Validation,
         "real-class word '" + bank.real_word.text + "' must not appear among fake concepts");
}

// The five concepts shipped as defaults, in fixed order. Users extend the set
// via a bank file or LLM retrieval.
inline ConceptBank default_bank() {
  ConceptBank bank;
  for (const char* word : {"fake", "blurred", "unnatural", "inconsistent", "unrealistic"})
    bank.fake_concepts.push_back({word, ConceptSource::BuiltIn, std::nullopt});
  bank.real_word = {"real", ConceptSource::BuiltIn, std::nullopt};
  bank.query = kDefaultQuery;
  validate_bank(bank);
  return bank;
}

// Bank file format: line 1 "real_word=<word>", line 2 "query=<string>", then
// one fake concept per line. '#' starts a comment line. UTF-8, LF endings.
inline ConceptBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "bank file not found: " + path.string());
  std::string line;
  ConceptBank bank;
  if (!std::getline(in, line) || !line.starts_with("real_word="))
    fail(ErrorKind::Validation, "bank file must start with 'real_word=': " + path.string());
  bank.real_word = {to_lower_copy(trim_copy(line.substr(10))), ConceptSource::File, std::nullopt};
  if (!std::getline(in, line) || !line.starts_with("query="))
    fail(ErrorKind::Validation, "bank file line 2 must be 'query=': " + path.string());
  bank.query = trim_copy(line.substr(6));
  bank.fake_concepts.clear();
  while (std::getline(in, line)) {
    const std::string text = trim_copy(line);
    if (text.empty() || text[0] == '#') continue;
    bank.fake_concepts.push_back({to_lower_copy(text), ConceptSource::File, std::nullopt});
  }
  validate_bank(bank);
  return bank;
}

inline std::string serialize_bank(const ConceptBank& bank) {
  std::ostringstream out;
  out << "real_word=" << bank.real_word.text << "\n";
  out << "query=" << bank.query << "\n";
  for (const Concept& c : bank.fake_concepts) out << c.text << "\n";
  return out.str();
}

inline void save_bank(const ConceptBank& bank, const std::filesystem::path& path) {
  validate_bank(bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open bank file for writing: " + path.string());
  out << serialize_bank(bank);
  if (!out) fail(ErrorKind::Io, "failed writing bank file: " + path.string());
}

// Single-request LLM contract: one text string in, one text string out.
// Implementations surface transport failures as ErrorKind::Retrieval.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& request) = 0;
};

struct RetrievalResult {
  std::vector<Concept> concepts;
  std::string diagnostic;  // non-empty when the response yielded nothing usable
};

namespace detail {

inline std::string strip_list_marker(std::string text) {
  std::size_t i = 0;
  while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) ||
                             text[i] == '.' || text[i] == ')' || text[i] == '-' ||
                             text[i] == '*' || text[i] == ' '))
    ++i;
  return text.substr(i);
}

inline std::string now_utc_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Queries the client and parses the response into lowercase, deduplicated
// concept words or short phrases. Fragments longer than six words are
// dropped as prose. An unusable response yields an empty list plus a
// diagnostic; only transport failures raise errors.
inline RetrievalResult retrieve_concepts(LlmClient& client, const std::string& query = kDefaultQuery) {
  std::string response;
  try {
    response = client.complete(query);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::Retrieval, std::string("LLM client failed: ") + e.what());
  }

  RetrievalResult result;
  const std::string stamp = detail::now_utc_iso8601();
  std::set<std::string> seen;
  std::size_t dropped = 0;
  for (const std::string& raw_line : split(response, '\n')) {
    for (const std::string& raw : split(raw_line, ',')) {
      for (std::string piece : split(raw, ';')) {
        piece = trim_copy(detail::strip_list_marker(trim_copy(piece)));
        while (!piece.empty() && (piece.back() == '.' || piece.back() == ':')) piece.pop_back();
        piece = to_lower_copy(trim_copy(piece));
        if (piece.empty()) continue;
        if (split(piece, ' ').size() > 6) {
          ++dropped;
          continue;
        }
        if (seen.insert(piece).second)
          result.concepts.push_back({piece, ConceptSource::Llm, stamp});
      }
    }
  }
  if (result.concepts.empty()) {
    result.diagnostic = "no concepts parsed from LLM response (" +
                        std::to_string(response.size()) + " bytes, " +
                        std::to_string(dropped) + " fragments dropped)";
  } else if (dropped > 0) {
    result.diagnostic = std::to_string(dropped) + " prose fragments dropped";
  }
  return result;
}

// Returns a copy of `bank` extended with any retrieved concepts that are not
// already present (case-insensitive) and do not collide with the real word.
inline ConceptBank merge_concepts(const ConceptBank& bank, const std::vector<Concept>& extra) {
  ConceptBank out = bank;
  std::set<std::string> seen;
  for (const Concept& c : out.fake_concepts) seen.insert(to_lower_copy(c.text));
  seen.insert(to_lower_copy(out.real_word.text));
  for (const Concept& c : extra) {
    const std::string key = to_lower_copy(trim_copy(c.text));
    if (key.empty() || !seen.insert(key).second) continue;
    out.fake_concepts.push_back({key, c.source, c.retrieved_at});
  }
  validate_bank(out);
  return out;
}

}  // namespace pfdet
