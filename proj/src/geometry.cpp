#include "cale/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>

#include "cale/error.hpp"
#include "cale/parallel.hpp"

namespace cale::geometry {

Distributions category_distributions(std::span<const cdiff::ScoredPair> pairs, std::size_t bins,
                                     std::optional<double> threshold) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  Distributions out;
  out.threshold = threshold;
  std::array<double, 4> sums{};
  for (std::size_t c = 0; c < 4; ++c) {
    out.by_category[c].category = spcd::kCategories[c];
    out.by_category[c].counts.assign(bins, 0);
  }
  for (const auto& p : pairs) {
    const auto c = static_cast<std::size_t>(p.pair.category());
    const double d = std::clamp(p.distance, 0.0, kMaxDistance);
    auto b = static_cast<std::size_t>(d / kMaxDistance * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    auto& dist = out.by_category[c];
    ++dist.counts[b];
    ++dist.total;
    sums[c] += p.distance;
  }
  for (std::size_t c = 0; c < 4; ++c)
    if (out.by_category[c].total) out.by_category[c].mean = sums[c] / static_cast<double>(out.by_category[c].total);
  return out;
}

void write_csv(std::ostream& out, const Distributions& d) {
  out << "category,bin_lo,bin_hi,count\n";
  for (const auto& dist : d.by_category)
    for (std::size_t b = 0; b < dist.counts.size(); ++b)
      out << spcd::to_string(dist.category) << ',' << dist.bin_lo(b) << ',' << dist.bin_hi(b) << ','
          << dist.counts[b] << '\n';
}

void write_svg(std::ostream& out, const Distributions& d) {
  constexpr double width = 640, panel = 120, left = 90, right = 20, gap = 20;
  const double plot_w = width - left - right;
  const double height = 4 * (panel + gap) + 30;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "<style>text{font:11px sans-serif}</style>\n";
  for (std::size_t c = 0; c < 4; ++c) {
    const auto& dist = d.by_category[c];
    const double top = gap + static_cast<double>(c) * (panel + gap);
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(dist.counts.begin(), dist.counts.end()));
    const double bw = plot_w / static_cast<double>(dist.counts.size());
    std::string name(spcd::to_string(dist.category));
    name.replace(name.find('&'), 1, "&amp;");
    out << "<text x=\"4\" y=\"" << top + panel / 2 << "\">" << name << " (n=" << dist.total << ")</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + panel << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + panel << "\" stroke=\"black\"/>\n";
    for (std::size_t b = 0; b < dist.counts.size(); ++b) {
      if (!dist.counts[b]) continue;
      const double h = panel * static_cast<double>(dist.counts[b]) / static_cast<double>(peak);
      out << "<rect x=\"" << left + bw * static_cast<double>(b) << "\" y=\"" << top + panel - h << "\" width=\""
          << bw << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
    }
    if (d.threshold) {
      const double x = left + plot_w * std::clamp(*d.threshold, 0.0, kMaxDistance) / kMaxDistance;
      out << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + panel
          << "\" stroke=\"crimson\" stroke-dasharray=\"4 3\"/>\n";
    }
  }
  const double axis_y = height - 10;
  for (int t = 0; t <= 4; ++t) {
    const double v = 0.5 * t;
    out << "<text x=\"" << left + plot_w * v / kMaxDistance - 8 << "\" y=\"" << axis_y << "\">" << v << "</text>\n";
  }
  out << "</svg>\n";
}

double silhouette(const std::vector<std::vector<double>>& points, const std::vector<std::string>& labels,
                  std::size_t threads) {
  const auto n = points.size();
  if (labels.size() != n) throw DomainError("silhouette: labels and points differ in length");
  if (n < 2) throw DomainError("silhouette needs at least 2 points");

  std::map<std::string, std::size_t> cluster_ids;
  for (const auto& l : labels) cluster_ids.emplace(l, 0);
  if (cluster_ids.size() < 2) throw DomainError("silhouette needs at least 2 clusters");
  std::size_t next = 0;
  for (auto& [l, id] : cluster_ids) id = next++;
  std::vector<std::size_t> cluster(n), sizes(cluster_ids.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = cluster_ids[labels[i]];
    ++sizes[cluster[i]];
  }

  std::vector<double> score(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    if (sizes[cluster[i]] == 1) return;
    std::vector<double> sum(sizes.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum[cluster[j]] += cosine_distance(points[i], points[j]);
    const double a = sum[cluster[i]] / static_cast<double>(sizes[cluster[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sizes.size(); ++k)
      if (k != cluster[i]) b = std::min(b, sum[k] / static_cast<double>(sizes[k]));
    const double m = std::max(a, b);
    score[i] = m > 0.0 ? (b - a) / m : 0.0;
  });
  double total = 0.0;
  for (double s : score) total += s;  // fixed order
  return total / static_cast<double>(n);
}

double wup(const Taxonomy& taxonomy, const ConceptId& c1, const ConceptId& c2) {
  for (const auto* c : {&c1, &c2})
    if (!taxonomy.contains(*c)) throw MissingKeyError("concept '" + c->value + "' not in taxonomy");
  const auto up1 = taxonomy.ancestors(c1), up2 = taxonomy.ancestors(c2);
  const double denom = static_cast<double>(taxonomy.depth(c1) + taxonomy.depth(c2));
  std::optional<double> best;
  for (const auto& [anc, dist] : up1) {
    if (!up2.count(anc)) continue;
    const double s = 2.0 * static_cast<double>(taxonomy.depth(anc)) / denom;
    if (!best || s > *best) best = s;
  }
  if (!best) throw DomainError("concepts '" + c1.value + "' and '" + c2.value + "' share no root");
  // In a DAG the shortest-path depth of a common ancestor can exceed that of
  // a concept reached by a shorter route, so cap at 1.
  return std::min(*best, 1.0);
}

stats::CorrelationResult wup_correlation(const std::vector<ConceptPair>& pairs, const Taxonomy& taxonomy) {
  if (pairs.size() < 3) throw DomainError("wup correlation needs at least 3 pairs");
  std::vector<double> sims, wups;
  sims.reserve(pairs.size());
  wups.reserve(pairs.size());
  for (const auto& p : pairs) {
    sims.push_back(cosine_similarity(p.a, p.b));
    wups.push_back(wup(taxonomy, p.concept_a, p.concept_b));
  }
  return stats::spearman(sims, wups);
}

UniqueBeginners unique_beginner_labels(const Taxonomy& taxonomy,
                                       const std::vector<std::pair<ConceptId, Pos>>& concepts) {
  UniqueBeginners out;
  std::set<ConceptId> done;
  for (const auto& [c, pos] : concepts) {
    if (!done.insert(c).second) continue;
    if (pos == Pos::adjective) {
      out.skipped.push_back("skipped adjective concept '" + c.value + "'");
      continue;
    }
    if (!taxonomy.contains(c)) throw MissingKeyError("concept '" + c.value + "' not in taxonomy");
    std::optional<std::pair<std::size_t, ConceptId>> best;
    for (const auto& [anc, dist] : taxonomy.ancestors(c)) {
      if (!taxonomy.roots().count(anc)) continue;
      // map iteration is lexicographic, so strict < keeps the smallest id on ties
      if (!best || dist < best->first) best = {dist, anc};
    }
    if (!best) throw DomainError("no root reachable from '" + c.value + "'");
    out.labels.emplace(c, best->second);
  }
  return out;
}

}  // namespace cale::geometry
