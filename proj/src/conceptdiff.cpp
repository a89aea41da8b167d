#include "cale/conceptdiff.hpp"

#include <algorithm>
#include <numeric>

#include "cale/error.hpp"
#include "cale/parallel.hpp"

namespace cale::cdiff {

std::vector<ScoredPair> score_pairs(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                                    std::size_t threads) {
  std::vector<ScoredPair> out(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    out[i].pair = pairs[i];
    out[i].distance = cosine_distance(embeddings.at(pairs[i].occ_a), embeddings.at(pairs[i].occ_b));
  });
  return out;
}

Threshold tune_threshold(std::span<const ScoredPair> pairs) {
  std::vector<std::pair<double, int>> pts;
  pts.reserve(pairs.size());
  std::size_t pos = 0;
  for (const auto& p : pairs) {
    pts.emplace_back(p.distance, p.pair.label);
    pos += p.pair.label == 1;
  }
  if (pos == 0 || pos == pts.size())
    throw DomainError("threshold tuning needs pairs of both labels");
  std::sort(pts.begin(), pts.end());
  const auto n = pts.size();

  // Lower sentinel: everything predicted 0, i.e. all negatives correct.
  std::size_t neg_total = n - pos;
  Threshold best{pts.front().first - 1.0, static_cast<double>(neg_total) / static_cast<double>(n)};
  std::size_t correct_best = neg_total;

  // Walking up the sorted distances, each group of equal distances flips from
  // "predicted 0" to "predicted 1" once the threshold passes it.
  std::size_t correct = neg_total;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pts[j].first == pts[i].first) {
      correct += pts[j].second == 1 ? 1 : 0;
      correct -= pts[j].second == 0 ? 1 : 0;
      ++j;
    }
    const double candidate = j < n ? 0.5 * (pts[i].first + pts[j].first) : pts.back().first + 1.0;
    if (correct > correct_best) {
      correct_best = correct;
      best = {candidate, static_cast<double>(correct) / static_cast<double>(n)};
    }
    i = j;
  }
  return best;
}

std::vector<int> classify(std::span<const ScoredPair> pairs, double threshold) {
  std::vector<int> out(pairs.size());
  std::transform(pairs.begin(), pairs.end(), out.begin(),
                 [&](const ScoredPair& p) { return p.distance < threshold ? 1 : 0; });
  return out;
}

std::vector<int> baseline_1l1c(std::span<const spcd::PairRecord> pairs) {
  std::vector<int> out(pairs.size());
  std::transform(pairs.begin(), pairs.end(), out.begin(),
                 [](const spcd::PairRecord& p) { return p.lemma_rel == spcd::LemmaRel::SL ? 1 : 0; });
  return out;
}

std::vector<int> baseline_1l1c(std::span<const ScoredPair> pairs) {
  std::vector<int> out(pairs.size());
  std::transform(pairs.begin(), pairs.end(), out.begin(),
                 [](const ScoredPair& p) { return p.pair.lemma_rel == spcd::LemmaRel::SL ? 1 : 0; });
  return out;
}

namespace {

struct Confusion {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

  void add(int label, int pred) {
    if (label == 1) (pred == 1 ? tp : fn)++;
    else (pred == 0 ? tn : fp)++;
  }

  SubsetMetrics finish() const {
    SubsetMetrics m;
    m.n = tp + fn + tn + fp;
    m.positives = tp + fn;
    if (tp + fn) m.recall_pos = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tn + fp) m.recall_neg = static_cast<double>(tn) / static_cast<double>(tn + fp);
    if (m.recall_pos && m.recall_neg) m.balanced_accuracy = 0.5 * (*m.recall_pos + *m.recall_neg);
    else if (m.recall_pos) m.balanced_accuracy = m.recall_pos;
    else if (m.recall_neg) m.balanced_accuracy = m.recall_neg;
    if (m.n) m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(m.n);
    if (tp) m.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    return m;
  }
};

}  // namespace

CdReport metrics(std::span<const int> predictions, std::span<const spcd::PairRecord> pairs) {
  if (predictions.size() != pairs.size())
    throw DomainError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(pairs.size()) + " pairs");
  Confusion all, sl, dl;
  std::array<std::size_t, 4> cat_n{}, cat_ok{};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const int pred = predictions[i];
    if (pred != 0 && pred != 1) throw DomainError("predictions must be 0 or 1");
    all.add(p.label, pred);
    (p.lemma_rel == spcd::LemmaRel::SL ? sl : dl).add(p.label, pred);
    const auto c = static_cast<std::size_t>(p.category());
    ++cat_n[c];
    cat_ok[c] += pred == p.label;
  }
  CdReport r;
  r.all = all.finish();
  r.same_lemma = sl.finish();
  r.diff_lemma = dl.finish();
  for (std::size_t c = 0; c < 4; ++c)
    if (cat_n[c]) r.category_accuracy[c] = static_cast<double>(cat_ok[c]) / static_cast<double>(cat_n[c]);
  return r;
}

CdReport metrics(std::span<const int> predictions, std::span<const ScoredPair> pairs) {
  std::vector<spcd::PairRecord> records;
  records.reserve(pairs.size());
  for (const auto& p : pairs) records.push_back(p.pair);
  return metrics(predictions, records);
}

}  // namespace cale::cdiff
