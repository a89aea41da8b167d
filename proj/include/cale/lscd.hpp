#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cale/embedding.hpp"
#include "cale/stats.hpp"

namespace cale::lscd {

struct DiachronicTarget {
  std::string word;
  std::vector<std::string> usages_t1;
  std::vector<std::string> usages_t2;
  double gold_change = 0.0;
};

// Mean cross-period cosine distance over all n*m usage pairs.
double apd(const DiachronicTarget& t, const EmbeddingMatrix& m);
// Cosine distance between the two period means.
double prt(const DiachronicTarget& t, const EmbeddingMatrix& m);

// Vector-level forms used by the id-based ones above.
double apd(const std::vector<std::vector<double>>& t1, const std::vector<std::vector<double>>& t2);
double prt(const std::vector<std::vector<double>>& t1, const std::vector<std::vector<double>>& t2);

using ScoreFn = std::function<double(const DiachronicTarget&)>;

// Spearman between score_fn(target) and gold_change; needs >= 3 targets.
stats::CorrelationResult rank_against_gold(const std::vector<DiachronicTarget>& targets, const ScoreFn& score_fn);

// Gold TSV `word<TAB>gold` joined with usages TSV `word<TAB>period<TAB>occ_id`
// (period 1 or 2). Targets come out sorted by word.
std::vector<DiachronicTarget> read_targets(std::istream& gold, const std::string& gold_source, std::istream& usages,
                                           const std::string& usages_source);
std::vector<DiachronicTarget> read_targets(const std::filesystem::path& gold, const std::filesystem::path& usages);

struct TargetScore {
  std::string word;
  double gold = 0.0;
  double apd = 0.0;
  double prt = 0.0;
};

struct LscdReport {
  std::vector<TargetScore> scores;
  // Absent with fewer than 3 targets (or an undefined correlation); the
  // reason is kept in `notes`.
  std::optional<stats::CorrelationResult> rho_apd, rho_prt;
  // Z1* for "APD and PRT correlate equally with gold".
  std::optional<stats::SteigerResult> apd_vs_prt;
  std::vector<std::string> notes;
};

LscdReport evaluate(const std::vector<DiachronicTarget>& targets, const EmbeddingMatrix& m, std::size_t threads = 1);

}  // namespace cale::lscd
