#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cale/conceptdiff.hpp"
#include "cale/corpus.hpp"
#include "cale/embedding.hpp"
#include "cale/stats.hpp"

namespace cale::geometry {

inline constexpr std::size_t kDefaultBins = 50;
inline constexpr double kMaxDistance = 2.0;

struct DistanceDistribution {
  spcd::Category category = spcd::Category::SC_SL;
  std::vector<std::size_t> counts;  // uniform bins over [0, 2]
  std::size_t total = 0;
  std::optional<double> mean;  // absent for an empty category

  double bin_lo(std::size_t b) const { return kMaxDistance * static_cast<double>(b) / counts.size(); }
  double bin_hi(std::size_t b) const { return kMaxDistance * static_cast<double>(b + 1) / counts.size(); }
};

struct Distributions {
  std::array<DistanceDistribution, 4> by_category;  // indexed like spcd::kCategories
  std::optional<double> threshold;
};

// Bins are half-open [lo, hi) except the last, which also takes d == 2.
Distributions category_distributions(std::span<const cdiff::ScoredPair> pairs, std::size_t bins = kDefaultBins,
                                     std::optional<double> threshold = std::nullopt);

// `category,bin_lo,bin_hi,count` with a header line, categories in order.
void write_csv(std::ostream& out, const Distributions& d);
// Four stacked histogram panels with the threshold drawn as a vertical line.
void write_svg(std::ostream& out, const Distributions& d);

// Mean silhouette under cosine distance. Singleton clusters score 0, and a
// point with a == b == 0 scores 0. Needs >= 2 points and >= 2 clusters.
double silhouette(const std::vector<std::vector<double>>& points, const std::vector<std::string>& labels,
                  std::size_t threads = 1);

// 2 depth(lcs) / (depth(c1) + depth(c2)), maximized over common ancestors.
// Error when the concepts share no ancestor.
double wup(const Taxonomy& taxonomy, const ConceptId& c1, const ConceptId& c2);

struct ConceptPair {
  std::vector<double> a, b;
  ConceptId concept_a, concept_b;
};

// Spearman between per-pair cosine similarity and per-pair wup.
stats::CorrelationResult wup_correlation(const std::vector<ConceptPair>& pairs, const Taxonomy& taxonomy);

struct UniqueBeginners {
  std::map<ConceptId, ConceptId> labels;
  std::vector<std::string> skipped;  // one message per skipped concept
};

// Labels each noun/verb concept with the root nearest to it (ties to the
// lexicographically smallest root). Adjectives are skipped and reported.
UniqueBeginners unique_beginner_labels(const Taxonomy& taxonomy,
                                       const std::vector<std::pair<ConceptId, Pos>>& concepts);

}  // namespace cale::geometry
