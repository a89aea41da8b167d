#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cale/error.hpp"
#include "cale/geometry.hpp"
#include "cale/rng.hpp"
#include "oracles.hpp"

using namespace cale;
using namespace cale::geometry;
using Vs = std::vector<std::vector<double>>;
using Ls = std::vector<std::string>;

namespace {

ConceptId C(const char* s) { return ConceptId(s); }

Taxonomy chain_taxonomy() {
  // entity <- animal <- dog ; entity <- animal <- cat ; entity <- plant
  // abstraction <- communication <- message
  return Taxonomy::from_edges({{C("animal"), C("entity")},
                               {C("dog"), C("animal")},
                               {C("cat"), C("animal")},
                               {C("plant"), C("entity")},
                               {C("communication"), C("abstraction")},
                               {C("message"), C("communication")}});
}

cdiff::ScoredPair scored(spcd::ConceptRel c, spcd::LemmaRel l, double d) {
  cdiff::ScoredPair p;
  p.pair.concept_rel = c;
  p.pair.lemma_rel = l;
  p.pair.label = c == spcd::ConceptRel::SC ? 1 : 0;
  p.distance = d;
  return p;
}

}  // namespace

TEST_CASE("silhouette examples") {
  CHECK(silhouette(Vs{{1, 0}, {1, 0}, {0, 1}, {0, 1}}, Ls{"a", "a", "b", "b"}) == 1.0);
  CHECK(silhouette(Vs{{1, 1}, {1, 1}, {1, 1}, {1, 1}}, Ls{"a", "a", "b", "b"}) == 0.0);
  // singleton point contributes 0: the two "a" points score 1 each
  CHECK(silhouette(Vs{{1, 0}, {1, 0}, {0, 1}}, Ls{"a", "a", "b"}) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(silhouette(Vs{{1, 0}, {0, 1}}, Ls{"a", "a"}), DomainError);
  CHECK_THROWS_AS(silhouette(Vs{{1, 0}}, Ls{"a"}), DomainError);
}

TEST_CASE("silhouette matches the brute-force oracle and ignores label names") {
  auto g = rng::substream(5, "silhouette");
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng::uniform_index(g, 19), k = 2 + rng::uniform_index(g, 3), dim = 2 + rng::uniform_index(g, 6);
    Vs pts(n, std::vector<double>(dim));
    for (auto& p : pts)
      for (auto& x : p) x = rng::normal(g);
    Ls labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = "L" + std::to_string(i < k ? i : rng::uniform_index(g, k));
    if (n < k) continue;
    const double s = silhouette(pts, labels, 1 + t % 3);
    CHECK(std::abs(s - oracle::silhouette(pts, labels)) < 1e-12);
    Ls renamed;
    for (const auto& l : labels) renamed.push_back("z" + l + "q");
    CHECK(silhouette(pts, renamed) == s);
  }
}

TEST_CASE("wup similarity") {
  const auto tax = chain_taxonomy();
  CHECK(wup(tax, C("animal"), C("dog")) == 0.8);
  CHECK(wup(tax, C("dog"), C("cat")) == doctest::Approx(2.0 / 3));
  CHECK(wup(tax, C("dog"), C("dog")) == 1.0);
  CHECK(wup(tax, C("dog"), C("plant")) == wup(tax, C("plant"), C("dog")));
  CHECK(wup(tax, C("dog"), C("plant")) == doctest::Approx(2.0 / 5));
  CHECK_THROWS_AS(wup(tax, C("dog"), C("message")), DomainError);
  CHECK_THROWS_AS(wup(tax, C("dog"), C("unicorn")), MissingKeyError);
}

TEST_CASE("wup correlation") {
  const auto tax = chain_taxonomy();
  // cosine similarity rises with wup
  std::vector<ConceptPair> ps{{{1, 0}, {0, 1}, C("dog"), C("plant")},
                              {{1, 0}, {1, 1}, C("dog"), C("cat")},
                              {{1, 0}, {1, 0.1}, C("dog"), C("dog")}};
  CHECK(wup_correlation(ps, tax).coefficient == doctest::Approx(1.0));
  ps.pop_back();
  CHECK_THROWS_AS(wup_correlation(ps, tax), DomainError);
}

TEST_CASE("unique beginner labels") {
  const auto tax = chain_taxonomy();
  const auto ub = unique_beginner_labels(
      tax, {{C("dog"), Pos::noun}, {C("message"), Pos::noun}, {C("entity"), Pos::noun}, {C("red"), Pos::adjective}});
  CHECK(ub.labels.at(C("dog")) == C("entity"));
  CHECK(ub.labels.at(C("message")) == C("abstraction"));
  CHECK(ub.labels.at(C("entity")) == C("entity"));
  CHECK(ub.labels.size() == 3);
  CHECK(ub.skipped.size() == 1);

  // x reaches root r1 through p but r2 directly
  const auto diamond = Taxonomy::from_edges({{C("p"), C("r1")}, {C("x"), C("p")}, {C("x"), C("r2")}});
  CHECK(unique_beginner_labels(diamond, {{C("x"), Pos::verb}}).labels.at(C("x")) == C("r2"));
  // equidistant roots break ties lexicographically
  const auto tie = Taxonomy::from_edges({{C("x"), C("rb")}, {C("x"), C("ra")}});
  CHECK(unique_beginner_labels(tie, {{C("x"), Pos::noun}}).labels.at(C("x")) == C("ra"));
  CHECK_THROWS_AS(unique_beginner_labels(tax, {{C("unicorn"), Pos::noun}}), MissingKeyError);
}

TEST_CASE("category histograms") {
  using spcd::ConceptRel, spcd::LemmaRel;
  std::vector<cdiff::ScoredPair> ps{scored(ConceptRel::SC, LemmaRel::SL, 0.0), scored(ConceptRel::SC, LemmaRel::SL, 0.0),
                                    scored(ConceptRel::SC, LemmaRel::DL, 0.5), scored(ConceptRel::DC, LemmaRel::DL, 2.0),
                                    scored(ConceptRel::DC, LemmaRel::DL, 1.0)};
  const auto d = category_distributions(ps, kDefaultBins, 0.6);
  const auto& scsl = d.by_category[0];
  CHECK(scsl.counts.size() == 50);
  CHECK(scsl.counts[0] == 2);
  CHECK(scsl.mean == 0.0);
  CHECK(!d.by_category[2].mean);
  CHECK(d.by_category[2].total == 0);
  const auto& dcdl = d.by_category[3];
  CHECK(dcdl.counts[49] == 1);
  CHECK(dcdl.counts[25] == 1);
  CHECK(dcdl.mean == 1.5);
  std::size_t sum = 0;
  for (const auto& c : d.by_category)
    for (auto n : c.counts) sum += n;
  CHECK(sum == ps.size());

  std::ostringstream csv;
  write_csv(csv, d);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "category,bin_lo,bin_hi,count");
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 4 * 50);

  std::ostringstream svg;
  write_svg(svg, d);
  CHECK(svg.str().find("<svg") != std::string::npos);
  CHECK(svg.str().find("DC&amp;DL") != std::string::npos);
}
