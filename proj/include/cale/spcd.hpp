#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cale/corpus.hpp"

namespace cale::spcd {

enum class Split { train, val, test };
enum class LemmaRel { SL, DL };
enum class ConceptRel { SC, DC };

std::string_view to_string(Split s) noexcept;
std::string_view to_string(LemmaRel r) noexcept;
std::string_view to_string(ConceptRel r) noexcept;
Split parse_split(std::string_view s);

inline constexpr std::array<Split, 3> kSplits{Split::train, Split::val, Split::test};

// The four pair categories in their canonical order.
enum class Category { SC_SL, SC_DL, DC_SL, DC_DL };
inline constexpr std::array<Category, 4> kCategories{Category::SC_SL, Category::SC_DL, Category::DC_SL,
                                                     Category::DC_DL};
std::string_view to_string(Category c) noexcept;  // "SC&SL", ...
Category category_of(ConceptRel c, LemmaRel l) noexcept;
ConceptRel concept_rel(Category c) noexcept;
LemmaRel lemma_rel(Category c) noexcept;

struct SplitSpec {
  double val_fraction = 0.05;
  double test_fraction = 0.10;
  std::uint64_t seed = 42;

  // Throws Error when the fractions are not positive or sum to >= 1.
  void validate() const;
};

struct SplitAssignment {
  std::map<ConceptId, Split> concept_split;
  std::map<std::string, Split> lemma_split;
  // Non-fatal notes, e.g. a held-out set rounded down to zero members.
  std::vector<std::string> warnings;
};

struct PairRecord {
  std::string occ_a;  // the occurrence whose sampling produced the pair
  std::string occ_b;
  LemmaRel lemma_rel = LemmaRel::SL;
  ConceptRel concept_rel = ConceptRel::SC;
  int label = 1;
  Split split = Split::train;

  Category category() const noexcept { return category_of(concept_rel, lemma_rel); }
  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// round(x) with halves rounded up, for held-out set sizes.
std::size_t held_out_size(std::size_t population, double fraction) noexcept;

SplitAssignment partition(const std::set<ConceptId>& concepts, const std::set<std::string>& lemmas,
                          const SplitSpec& spec);

// Routes occurrences; test beats val beats train when the concept and lemma
// triggers disagree.
std::map<Split, std::vector<Occurrence>> assign_occurrences(const std::vector<Occurrence>& occs,
                                                            const SplitAssignment& assignment);

// Samples up to one partner per category for every occurrence of one split.
// Each occurrence draws from its own stream derived from (seed, id), so the
// result does not depend on evaluation order. Reciprocal duplicates keep the
// first emitted record (input order).
std::vector<PairRecord> generate_pairs(const std::vector<Occurrence>& split_occs, Split split,
                                       std::uint64_t seed);

// Sorts by (split, occ_a, occ_b) with split order train < val < test.
void sort_pairs(std::vector<PairRecord>& pairs);

struct CategoryCounts {
  std::array<std::size_t, 4> by_category{};  // indexed like kCategories
  std::size_t total = 0;
  std::size_t label1 = 0;
  std::size_t same_lemma = 0;
  std::size_t unique_occurrences = 0;

  double label1_share() const noexcept { return total ? static_cast<double>(label1) / total : 0.0; }
};

struct PairStats {
  std::map<Split, CategoryCounts> per_split;
  CategoryCounts overall;
};

PairStats pair_stats(const std::vector<PairRecord>& pairs);

// Pairs TSV: occ_a, occ_b, lemma_rel, concept_rel, label, split.
void write_pairs(std::ostream& out, const std::vector<PairRecord>& pairs);
void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& pairs);
std::vector<PairRecord> read_pairs(std::istream& in, const std::string& source = "<stream>");
std::vector<PairRecord> read_pairs(const std::filesystem::path& path);

// Builds the pair record for two occurrences (relations derived from metadata).
PairRecord make_pair(const Occurrence& a, const Occurrence& b, Split split);

}  // namespace cale::spcd
