#include "cale/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "cale/error.hpp"

namespace cale {

using nlohmann::json;

std::string_view to_string(Pos pos) noexcept {
  switch (pos) {
    case Pos::adjective: return "a";
    case Pos::noun: return "n";
    case Pos::verb: return "v";
  }
  return "?";
}

namespace corpus {
namespace {

Pos parse_pos(const std::string& tag, const std::string& source, std::size_t line) {
  // WordNet satellite adjectives ("s") are folded into plain adjectives.
  if (tag == "a" || tag == "s") return Pos::adjective;
  if (tag == "n") return Pos::noun;
  if (tag == "v") return Pos::verb;
  throw ParseError(source, line, "unknown pos tag '" + tag + "'");
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <class T>
T required(const json& obj, const char* key, const std::string& source, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(source, line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(source, line, std::string("field '") + key + "' has the wrong type");
  }
}

Occurrence parse_record(const std::string& text, const std::string& source, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(source, line, "record is not a JSON object");

  Occurrence occ;
  occ.id = required<std::string>(obj, "id", source, line);
  occ.tokens = required<std::vector<std::string>>(obj, "tokens", source, line);
  const auto k = required<long long>(obj, "target_index", source, line);
  occ.lemma = lowercase(required<std::string>(obj, "lemma", source, line));
  occ.pos = parse_pos(required<std::string>(obj, "pos", source, line), source, line);
  occ.concept_id = ConceptId(required<std::string>(obj, "concept", source, line));
  occ.is_proper_noun = required<bool>(obj, "proper_noun", source, line);

  if (occ.id.empty()) throw ParseError(source, line, "empty id");
  if (occ.concept_id.value.empty()) throw ParseError(source, line, "empty concept");
  if (k < 0 || static_cast<std::size_t>(k) >= occ.tokens.size())
    throw ParseError(source, line, "target_index " + std::to_string(k) + " outside token range");
  occ.target_index = static_cast<std::size_t>(k);
  return occ;
}

}  // namespace

std::vector<Occurrence> parse_corpus(std::istream& in, const std::string& source) {
  std::vector<Occurrence> out;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto occ = parse_record(text, source, line);
    if (!seen.insert(occ.id).second)
      throw Error(source + ":" + std::to_string(line) + ": duplicate occurrence id '" + occ.id + "'");
    out.push_back(std::move(occ));
  }
  return out;
}

std::vector<Occurrence> parse_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string());
}

std::string to_jsonl(const Occurrence& occ) {
  json obj = {
      {"id", occ.id},
      {"tokens", occ.tokens},
      {"target_index", occ.target_index},
      {"lemma", occ.lemma},
      {"pos", std::string(to_string(occ.pos))},
      {"concept", occ.concept_id.value},
      {"proper_noun", occ.is_proper_noun},
  };
  return obj.dump();
}

bool lemma_shape_ok(std::string_view lemma) noexcept {
  if (lemma.size() < kMinLemmaLetters) return false;
  return std::all_of(lemma.begin(), lemma.end(),
                     [](unsigned char c) { return std::isalpha(c) != 0; });
}

std::vector<Occurrence> filter_corpus(const std::vector<Occurrence>& occs) {
  std::vector<const Occurrence*> eligible;
  eligible.reserve(occs.size());
  for (const auto& occ : occs) {
    const auto n = occ.tokens.size();
    if (n < kMinSentenceTokens || n > kMaxSentenceTokens) continue;
    if (!lemma_shape_ok(occ.lemma) || occ.is_proper_noun) continue;
    eligible.push_back(&occ);
  }

  // The frequency threshold counts only occurrences that passed the filters
  // above, separately for each POS.
  std::map<std::pair<std::string, Pos>, std::size_t> counts;
  for (const auto* occ : eligible) ++counts[{occ->lemma, occ->pos}];

  std::vector<Occurrence> out;
  for (const auto* occ : eligible)
    if (counts[{occ->lemma, occ->pos}] >= kMinLemmaOccurrences) out.push_back(*occ);
  return out;
}

}  // namespace corpus

std::vector<std::string> MarkedSentence::unmarked() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size() - 2);
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (i != open_ && i != open_ + 2) out.push_back(tokens_[i]);
  return out;
}

std::string MarkedSentence::text() const {
  std::string out;
  for (const auto& t : tokens_) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

MarkedSentence mark_target(const std::vector<std::string>& tokens, std::size_t target_index) {
  if (target_index >= tokens.size())
    throw DomainError("target index " + std::to_string(target_index) + " outside sentence of " +
                      std::to_string(tokens.size()) + " tokens");
  MarkedSentence m;
  m.tokens_.reserve(tokens.size() + 2);
  m.tokens_.insert(m.tokens_.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(target_index));
  m.tokens_.emplace_back(corpus::kOpenTag);
  m.tokens_.push_back(tokens[target_index]);
  m.tokens_.emplace_back(corpus::kCloseTag);
  m.tokens_.insert(m.tokens_.end(), tokens.begin() + static_cast<std::ptrdiff_t>(target_index) + 1, tokens.end());
  m.open_ = target_index;
  return m;
}

MarkedSentence mark_target(const Occurrence& occ) { return mark_target(occ.tokens, occ.target_index); }

}  // namespace cale
