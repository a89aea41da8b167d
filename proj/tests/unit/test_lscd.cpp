#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cale/error.hpp"
#include "cale/lscd.hpp"
#include "cale/rng.hpp"

using namespace cale;
using namespace cale::lscd;
using Vs = std::vector<std::vector<double>>;

TEST_CASE("APD and PRT hand examples") {
  CHECK(apd(Vs{{1, 2}}, Vs{{1, 2}}) == 0.0);
  CHECK(apd(Vs{{1, 0}}, Vs{{0, 1}, {1, 0}}) == 0.5);
  CHECK(prt(Vs{{1, 0}, {0, 1}}, Vs{{1, 1}}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(prt(Vs{{1, 0}, {3, 1}}, Vs{{1, 0}, {3, 1}}) == 0.0);
  CHECK_THROWS_AS(apd(Vs{}, Vs{{1, 0}}), DomainError);
  CHECK_THROWS_AS(prt(Vs{{1, 0}, {-1, 0}}, Vs{{1, 1}}), DomainError);
}

TEST_CASE("symmetry, scale invariance and singleton sets") {
  auto g = rng::substream(41, "lscd");
  const auto draw = [&](std::size_t n) {
    Vs v(n, std::vector<double>(4));
    for (auto& r : v)
      for (auto& x : r) x = rng::normal(g);
    return v;
  };
  for (int t = 0; t < 20; ++t) {
    const auto a = draw(5), b = draw(7);
    CHECK(apd(a, b) == doctest::Approx(apd(b, a)).epsilon(1e-14));
    CHECK(prt(a, b) == doctest::Approx(prt(b, a)).epsilon(1e-14));
    auto scaled = a;
    for (auto& r : scaled) {
      const double s = 0.5 + 3 * rng::uniform_unit(g);
      for (auto& x : r) x *= s;
    }
    CHECK(apd(scaled, b) == doctest::Approx(apd(a, b)).epsilon(1e-12));
    const auto x = draw(1), y = draw(1);
    CHECK(apd(x, y) == cosine_distance(x[0], y[0]));
  }
}

TEST_CASE("id-based scoring and missing embeddings") {
  EmbeddingMatrix m(2);
  m.add("u1", std::vector<float>{1, 0});
  m.add("u2", std::vector<float>{0, 1});
  m.add("u3", std::vector<float>{1, 0});
  DiachronicTarget t{"word", {"u1"}, {"u2", "u3"}, 0.3};
  CHECK(apd(t, m) == 0.5);
  t.usages_t2.push_back("ghost");
  CHECK_THROWS_AS(apd(t, m), MissingKeyError);
  CHECK_THROWS_AS(prt(t, m), MissingKeyError);
}

TEST_CASE("rank_against_gold") {
  std::vector<DiachronicTarget> ts;
  for (int i = 0; i < 5; ++i) ts.push_back({"w" + std::to_string(i), {}, {}, 0.1 * i});
  CHECK(rank_against_gold(ts, [](const DiachronicTarget& t) { return t.gold_change; }).coefficient ==
        doctest::Approx(1.0));
  CHECK(rank_against_gold(ts, [](const DiachronicTarget& t) { return -t.gold_change; }).coefficient ==
        doctest::Approx(-1.0));
  CHECK_THROWS_AS(rank_against_gold(ts, [](const DiachronicTarget&) { return 1.0; }), DomainError);
  ts.resize(2);
  CHECK_THROWS_AS(rank_against_gold(ts, [](const DiachronicTarget& t) { return t.gold_change; }), DomainError);
}

TEST_CASE("reading targets from TSV") {
  std::istringstream gold("plane\t0.8\ngay\t0.5\n");
  std::istringstream usages("plane\t1\ta\nplane\t2\tb\ngay\t1\tc\ngay\t2\td\ngay\t2\te\n");
  const auto ts = read_targets(gold, "gold", usages, "usages");
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].word == "gay");
  CHECK(ts[0].usages_t2 == std::vector<std::string>{"d", "e"});
  CHECK(ts[1].gold_change == 0.8);

  std::istringstream g2("plane\t0.8\n"), u2("plane\t3\ta\n");
  CHECK_THROWS_AS(read_targets(g2, "g", u2, "u"), ParseError);
  std::istringstream g3("plane\t0.8\n"), u3("plane\t1\ta\n");
  CHECK_THROWS_AS(read_targets(g3, "g", u3, "u"), ParseError);
  std::istringstream g4("plane\tx\n"), u4("");
  CHECK_THROWS_AS(read_targets(g4, "g", u4, "u"), ParseError);
  std::istringstream g5("plane\t0.1\n"), u5("plane\t1\ta\nplane\t2\ta\n");
  CHECK_THROWS_AS(read_targets(g5, "g", u5, "u"), ParseError);
}

TEST_CASE("evaluate refuses correlation below three targets") {
  EmbeddingMatrix m(2);
  m.add("a", std::vector<float>{1, 0});
  m.add("b", std::vector<float>{0, 1});
  m.add("c", std::vector<float>{1, 1});
  std::vector<DiachronicTarget> ts{{"x", {"a"}, {"b"}, 0.1}, {"y", {"a"}, {"c"}, 0.2}};
  const auto r = evaluate(ts, m);
  CHECK(r.scores.size() == 2);
  CHECK(!r.rho_apd);
  CHECK(!r.notes.empty());
  ts.push_back({"z", {"b"}, {"c"}, 0.3});
  ts.push_back({"q", {"a", "c"}, {"b"}, 0.9});
  const auto r4 = evaluate(ts, m, 2);
  CHECK(r4.rho_apd);
  CHECK(r4.rho_prt);
}
