#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cale {

// Opaque concept key (a WordNet synset name in practice). Equality is exact
// string match.
struct ConceptId {
  std::string value;

  ConceptId() = default;
  explicit ConceptId(std::string v) : value(std::move(v)) {}

  friend auto operator<=>(const ConceptId&, const ConceptId&) = default;
  friend bool operator==(const ConceptId&, const ConceptId&) = default;
};

enum class Pos { adjective, noun, verb };

std::string_view to_string(Pos pos) noexcept;

// One annotated usage of a target word.
struct Occurrence {
  std::string id;
  std::vector<std::string> tokens;
  std::size_t target_index = 0;
  std::string lemma;  // lowercased at parse time
  Pos pos = Pos::noun;
  ConceptId concept_id;
  bool is_proper_noun = false;

  const std::string& target() const { return tokens.at(target_index); }
};

namespace corpus {

inline constexpr std::string_view kOpenTag = "<t>";
inline constexpr std::string_view kCloseTag = "</t>";

inline constexpr std::size_t kMinSentenceTokens = 10;
inline constexpr std::size_t kMaxSentenceTokens = 100;
inline constexpr std::size_t kMinLemmaLetters = 3;
inline constexpr std::size_t kMinLemmaOccurrences = 10;

// Parses occurrence JSONL. Blank lines are skipped; any other malformed line
// raises ParseError carrying its 1-based line number. Duplicate ids raise an
// Error naming the id.
std::vector<Occurrence> parse_corpus(const std::filesystem::path& path);
std::vector<Occurrence> parse_corpus(std::istream& in, const std::string& source = "<stream>");

// Serializes one occurrence in the JSONL schema (single line, no newline).
std::string to_jsonl(const Occurrence& occ);

// Sentence length, lemma shape, proper-noun and per-(lemma, POS) frequency
// filters. Output keeps input order.
std::vector<Occurrence> filter_corpus(const std::vector<Occurrence>& occs);

bool lemma_shape_ok(std::string_view lemma) noexcept;

}  // namespace corpus

// Token sequence with the target wrapped in <t> ... </t>.
class MarkedSentence {
 public:
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Position of the opening tag; the target sits at open_index() + 1.
  std::size_t open_index() const noexcept { return open_; }

  // Index of the target in the unmarked sentence.
  std::size_t target_index() const noexcept { return open_; }

  // Drops the two delimiters.
  std::vector<std::string> unmarked() const;

  std::string text() const;

 private:
  friend MarkedSentence mark_target(const std::vector<std::string>& tokens, std::size_t target_index);
  std::vector<std::string> tokens_;
  std::size_t open_ = 0;
};

MarkedSentence mark_target(const std::vector<std::string>& tokens, std::size_t target_index);
MarkedSentence mark_target(const Occurrence& occ);

// Rooted hypernym DAG over concept ids.
class Taxonomy {
 public:
  Taxonomy() = default;

  // Builds from (child, parent) edges. Throws Error on a cycle.
  static Taxonomy from_edges(const std::vector<std::pair<ConceptId, ConceptId>>& edges);

  // Tab-separated `child<TAB>parent` lines.
  static Taxonomy read(const std::filesystem::path& path);
  static Taxonomy read(std::istream& in, const std::string& source = "<stream>");

  bool contains(const ConceptId& c) const { return nodes_.count(c) != 0; }
  const std::set<ConceptId>& nodes() const noexcept { return nodes_; }
  const std::set<ConceptId>& roots() const noexcept { return roots_; }
  const std::set<ConceptId>& parents(const ConceptId& c) const;

  // Node count on the shortest path to any root; roots have depth 1.
  std::size_t depth(const ConceptId& c) const;

  // Every ancestor of c (c included) mapped to its shortest upward distance
  // from c in edges.
  std::map<ConceptId, std::size_t> ancestors(const ConceptId& c) const;

 private:
  std::set<ConceptId> nodes_;
  std::set<ConceptId> roots_;
  std::map<ConceptId, std::set<ConceptId>> parents_;
  std::map<ConceptId, std::size_t> depth_;
};

}  // namespace cale

template <>
struct std::hash<cale::ConceptId> {
  std::size_t operator()(const cale::ConceptId& c) const noexcept {
    return std::hash<std::string>{}(c.value);
  }
};
