#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cale/corpus.hpp"
#include "cale/stats.hpp"

namespace cale::cosimlex {

struct Context {
  std::vector<std::string> tokens;
  std::size_t pos1 = 0;  // index of word1
  std::size_t pos2 = 0;  // index of word2
};

struct Entry {
  std::string id;
  std::string word1, word2;
  Context context1, context2;
  double gold_sim_c1 = 0.0;
  double gold_sim_c2 = 0.0;
};

// One vector per marked sentence. The target is tokens()[open_index() + 1].
using Encoder = std::function<std::vector<double>(const MarkedSentence&)>;

// Cosine similarity between the encodings of the sentence with pos1 marked
// and with pos2 marked.
double predict_sim(const Context& ctx, const Encoder& encoder);

struct Prediction {
  double c1 = 0.0;
  double c2 = 0.0;
};

// Pearson between gold deltas (c2 - c1) and predicted deltas.
stats::CorrelationResult subtask1(const std::vector<Entry>& entries, const std::vector<Prediction>& predictions);

// Spearman over every context as its own example: e1c1, e1c2, e2c1, ...
stats::CorrelationResult subtask2(const std::vector<Entry>& entries, const std::vector<Prediction>& predictions);

// JSONL: {"id", "word1", "word2", "context1": {"tokens", "pos1", "pos2"},
// "context2": {...}, "gold_sim_c1", "gold_sim_c2"}. Each word must appear at
// its stated position (case-insensitively).
std::vector<Entry> read_entries(std::istream& in, const std::string& source = "<stream>");
std::vector<Entry> read_entries(const std::filesystem::path& path);

// TSV `entry_id<TAB>context<TAB>pred_sim`, two lines per entry.
void write_predictions(std::ostream& out, const std::vector<Entry>& entries,
                       const std::vector<Prediction>& predictions);
// Returns predictions aligned with `entries`; every entry needs both contexts.
std::vector<Prediction> read_predictions(std::istream& in, const std::vector<Entry>& entries,
                                         const std::string& source = "<stream>");

}  // namespace cale::cosimlex
