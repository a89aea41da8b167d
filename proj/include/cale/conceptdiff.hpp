#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "cale/embedding.hpp"
#include "cale/spcd.hpp"

namespace cale::cdiff {

struct ScoredPair {
  spcd::PairRecord pair;
  double distance = 0.0;  // cosine distance, in [0, 2]
};

std::vector<ScoredPair> score_pairs(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                                    std::size_t threads = 1);

struct Threshold {
  double value = 0.0;
  double accuracy = 0.0;  // plain accuracy reached on the tuning pairs
};

// Sweeps the midpoints between consecutive distinct distances plus one
// sentinel below the minimum and one above the maximum, maximizing plain
// accuracy; ties go to the smallest threshold. Needs both labels present.
Threshold tune_threshold(std::span<const ScoredPair> pairs);

// 1 iff distance < threshold.
std::vector<int> classify(std::span<const ScoredPair> pairs, double threshold);

// Predicts "same concept" iff the two occurrences share their lemma.
std::vector<int> baseline_1l1c(std::span<const spcd::PairRecord> pairs);
std::vector<int> baseline_1l1c(std::span<const ScoredPair> pairs);

struct SubsetMetrics {
  std::size_t n = 0;
  std::size_t positives = 0;
  std::optional<double> recall_pos;  // absent when the subset has no positives
  std::optional<double> recall_neg;  // absent when the subset has no negatives
  // Mean of the recalls that are defined; absent for an empty subset.
  std::optional<double> balanced_accuracy;
  double accuracy = 0.0;
  // Positive-class F1; 0 when there are no true positives.
  double f1 = 0.0;
};

struct CdReport {
  std::optional<double> threshold;
  SubsetMetrics all, same_lemma, diff_lemma;
  // Accuracy inside each category, indexed like spcd::kCategories.
  std::array<std::optional<double>, 4> category_accuracy{};
};

CdReport metrics(std::span<const int> predictions, std::span<const spcd::PairRecord> pairs);
CdReport metrics(std::span<const int> predictions, std::span<const ScoredPair> pairs);

}  // namespace cale::cdiff
