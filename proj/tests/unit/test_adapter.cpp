#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cale/adapter.hpp"
#include "cale/error.hpp"
#include "cale/rng.hpp"
#include "synthetic.hpp"

using namespace cale;
using namespace cale::adapter;
using V = std::vector<double>;

namespace {

AdapterParams random_params(rng::Engine& g, std::size_t d_out, std::size_t d_in, bool bias) {
  auto p = AdapterParams::identity(d_in, d_out, bias);
  for (auto& w : p.weight) w += 0.5 * rng::normal(g);
  if (bias)
    for (auto& b : *p.bias) b = 0.3 * rng::normal(g);
  return p;
}

V random_vec(rng::Engine& g, std::size_t d) {
  V v(d);
  for (auto& x : v) x = rng::normal(g);
  return v;
}

}  // namespace

TEST_CASE("identity-padded initialization") {
  const auto p = AdapterParams::identity(2, 3);
  CHECK(p.weight == V{1, 0, 0, 1, 0, 0});
  CHECK(!p.bias);
  const auto q = AdapterParams::identity(3, 2, true);
  CHECK(q.weight == V{1, 0, 0, 0, 1, 0});
  CHECK(*q.bias == V{0, 0});
}

TEST_CASE("adapt") {
  auto p = AdapterParams::identity(2, 2);
  CHECK(adapt(V{3, 4}, p) == V{3, 4});
  p.weight = {0, 1, 1, 0};
  CHECK(adapt(V{3, 4}, p) == V{4, 3});
  p.weight = {2, 0, 0, 2};
  CHECK(cosine_similarity(adapt(V{1, 2}, p), adapt(V{2, 1}, p)) == doctest::Approx(0.8));
  p.bias = V{1, -1};
  CHECK(adapt(V{3, 4}, p) == V{7, 7});
  CHECK_THROWS_AS(adapt(V{1, 2, 3}, p), DomainError);
}

TEST_CASE("pair loss values") {
  CHECK(pair_loss(V{1, 2}, V{1, 2}, 1, 0.7) == 0.0);
  // d = 1 for orthogonal vectors.
  CHECK(pair_loss(V{1, 0}, V{0, 1}, 0, 0.7) == 0.0);
  CHECK(pair_loss(V{1, 0}, V{0, 1}, 1, 0.7) == doctest::Approx(0.5));
  // cos = 0.8 -> d = 0.2; negative: 1/2 (0.7 - 0.2)^2 = 0.125
  CHECK(pair_loss(V{1, 2}, V{2, 1}, 0, 0.7) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(pair_loss(V{1, 2}, V{2, 1}, 0, 0.7) == pair_loss(V{2, 1}, V{1, 2}, 0, 0.7));
  // similarity reading plugs cos itself in: 1/2 * 0.8^2.
  CHECK(pair_loss(V{1, 2}, V{2, 1}, 1, 0.7, LossReading::similarity) == doctest::Approx(0.32));
  CHECK_THROWS_AS(pair_loss(V{0, 0}, V{1, 0}, 1, 0.7), DomainError);
  CHECK_THROWS_AS(pair_loss(V{1, 0}, V{1, 0}, 2, 0.7), DomainError);
}

TEST_CASE("loss is non-negative and zero exactly where expected") {
  auto g = rng::substream(4, "loss");
  for (int t = 0; t < 300; ++t) {
    const auto a = random_vec(g, 5), b = random_vec(g, 5);
    const int y = static_cast<int>(rng::uniform_index(g, 2));
    const double l = pair_loss(a, b, y, 0.7);
    CHECK(l >= 0.0);
    const double d = cosine_distance(a, b);
    CHECK((l == 0.0) == ((y == 1 && d == 0.0) || (y == 0 && d >= 0.7)));
  }
}

TEST_CASE("gradient of a single positive pair against finite differences") {
  const auto p = AdapterParams::identity(2, 2);
  const V a{1, 0}, b{0, 1};
  const std::vector<PairExample> batch{{a, b, 1}};
  const auto r = gradient_check(p, batch, 0.7, 1e-4);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.entries == 4);
}

TEST_CASE("flat-loss region has a zero gradient and a zero check error") {
  const auto p = AdapterParams::identity(2, 2);
  const V a{1, 0}, b{0, 1}, c{2, 0};
  const std::vector<PairExample> batch{{a, b, 0}, {a, c, 1}};
  const auto g = batch_gradient(batch, p, 0.7);
  for (double x : g.weight) CHECK(x == 0.0);
  CHECK(g.loss == 0.0);
  CHECK(gradient_check(p, batch, 0.7, 1e-4).max_relative_error == 0.0);
}

TEST_CASE("duplicated batch gives the same mean gradient") {
  auto g = rng::substream(5, "dup");
  const auto p = random_params(g, 3, 3, true);
  const auto a = random_vec(g, 3), b = random_vec(g, 3), c = random_vec(g, 3);
  const std::vector<PairExample> once{{a, b, 1}, {a, c, 0}};
  const std::vector<PairExample> twice{{a, b, 1}, {a, c, 0}, {a, b, 1}, {a, c, 0}};
  const auto g1 = batch_gradient(once, p, 0.7), g2 = batch_gradient(twice, p, 0.7);
  for (std::size_t i = 0; i < g1.weight.size(); ++i) CHECK(g1.weight[i] == doctest::Approx(g2.weight[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < g1.bias.size(); ++i) CHECK(g1.bias[i] == doctest::Approx(g2.bias[i]).epsilon(1e-14));
}

TEST_CASE("random 3x3 draws with bias and both loss readings") {
  auto g = rng::substream(6, "gc");
  for (const auto reading : {LossReading::distance, LossReading::similarity}) {
    for (int t = 0; t < 20; ++t) {
      const auto p = random_params(g, 3, 3, t % 2 == 0);
      std::vector<V> rows;
      std::vector<PairExample> batch;
      rows.reserve(8);
      for (int k = 0; k < 4; ++k) {
        rows.push_back(random_vec(g, 3));
        rows.push_back(random_vec(g, 3));
      }
      for (int k = 0; k < 4; ++k) {
        const int y = k % 2;
        const double s = cosine_similarity(adapt(rows[2 * k], p), adapt(rows[2 * k + 1], p));
        const double q = reading == LossReading::distance ? 1 - s : s;
        if (y == 0 && std::abs(q - 0.7) < 1e-2) continue;
        batch.push_back({rows[2 * k], rows[2 * k + 1], y});
      }
      if (batch.empty()) continue;
      CHECK(gradient_check(p, batch, 0.7, 1e-4, reading).max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("error degrades as the step grows") {
  auto g = rng::substream(8, "steps");
  const auto p = random_params(g, 3, 3, false);
  const auto a = random_vec(g, 3), b = random_vec(g, 3);
  const std::vector<PairExample> batch{{a, b, 1}};
  const double e1 = gradient_check(p, batch, 0.7, 1e-1).max_relative_error;
  const double e2 = gradient_check(p, batch, 0.7, 1e-2).max_relative_error;
  const double e3 = gradient_check(p, batch, 0.7, 1e-3).max_relative_error;
  CHECK(e1 > e2);
  CHECK(e2 > e3);
}

TEST_CASE("one-sided differences at the hinge kink") {
  // Pick W so that d == margin exactly for a negative pair: the loss is flat
  // on one side and quadratic with zero slope on the other, so the zero
  // subgradient agrees with both one-sided differences up to O(step).
  const double m = 0.4;  // cos = 3/5, and 1 - 0.6 == 0.4 in double
  const auto p = AdapterParams::identity(2, 2);
  const V a{1, 0}, b{3, 4};
  REQUIRE(cosine_distance(a, b) == m);
  const std::vector<PairExample> batch{{a, b, 0}};
  const auto grad = batch_gradient(batch, p, m);
  for (double x : grad.weight) CHECK(x == 0.0);
  for (const auto scheme : {Difference::forward, Difference::backward}) {
    AdapterParams probe = p;
    const double h = 1e-6;
    for (std::size_t i = 0; i < probe.weight.size(); ++i) {
      const double orig = probe.weight[i];
      probe.weight[i] = scheme == Difference::forward ? orig + h : orig - h;
      const double fd = (batch_loss(batch, probe, m) - batch_loss(batch, p, m)) /
                        (scheme == Difference::forward ? h : -h);
      probe.weight[i] = orig;
      CHECK(std::abs(fd - grad.weight[i]) < 1e-5);
    }
  }
}

TEST_CASE("schedule") {
  CHECK(warmup_steps(100, 0.24) == 24);
  CHECK(warmup_steps(10, 0.24) == 3);  // ceil(2.4)
  CHECK(schedule_factor(0, 100, 24) == 0.0);
  CHECK(schedule_factor(12, 100, 24) == doctest::Approx(0.5));
  CHECK(schedule_factor(24, 100, 24) == doctest::Approx(1.0));
  CHECK(schedule_factor(62, 100, 24) == doctest::Approx(0.5));
  CHECK(schedule_factor(100, 100, 24) == 0.0);
  CHECK(schedule_factor(0, 10, 0) == 1.0);
}

TEST_CASE("config parsing") {
  std::istringstream in("# tuned\nmargin = 0.5\nbatch_size=8\nloss=similarity\nbias=true\n\n");
  const auto c = TrainConfig::parse(in);
  CHECK(c.margin == 0.5);
  CHECK(c.batch_size == 8);
  CHECK(c.loss == LossReading::similarity);
  CHECK(c.bias);
  CHECK(c.learning_rate == 6.02e-6);

  std::istringstream unknown("margn=0.5\n");
  CHECK_THROWS_AS(TrainConfig::parse(unknown), ParseError);
  std::istringstream bad("margin=abc\n");
  CHECK_THROWS_AS(TrainConfig::parse(bad), ParseError);
  std::istringstream noeq("margin\n");
  CHECK_THROWS_AS(TrainConfig::parse(noeq), ParseError);

  // to_map round-trips through set().
  TrainConfig d;
  d.learning_rate = 1.2345678901234567e-5;
  TrainConfig e;
  for (const auto& [k, v] : d.to_map()) e.set(k, v);
  CHECK(e.to_map() == d.to_map());
  CHECK(e.learning_rate == d.learning_rate);
}

namespace {

struct Fixture {
  testing::SyntheticData data;
  std::vector<spcd::PairRecord> pairs;
};

Fixture small_fixture() {
  testing::SyntheticSpec spec;
  spec.lemmas = 12;
  spec.occurrences_per_sense = 10;
  Fixture f{testing::make_synthetic(spec), {}};
  f.pairs = spcd::generate_pairs(f.data.occurrences, spcd::Split::train, 3);
  return f;
}

}  // namespace

TEST_CASE("lr 0 leaves the initialization untouched") {
  const auto f = small_fixture();
  TrainConfig c;
  c.learning_rate = 0.0;
  c.d_out = 20;
  const auto r = train(f.pairs, f.data.embeddings, c);
  CHECK(r.params == AdapterParams::identity(16, 20));
  CHECK(r.trace.size() == f.pairs.size());
}

TEST_CASE("training is deterministic and padded rows are inert") {
  const auto f = small_fixture();
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  c.d_out = 16;
  const auto a = train(f.pairs, f.data.embeddings, c);
  const auto b = train(f.pairs, f.data.embeddings, c);
  CHECK(a.params == b.params);
  CHECK(a.params != AdapterParams::identity(16, 16));

  c.d_out = 40;
  const auto wide = train(f.pairs, f.data.embeddings, c);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t k = 0; k < 16; ++k) CHECK(wide.params.w(r, k) == (r < 16 ? a.params.w(r, k) : 0.0));
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(wide.trace[i].loss == a.trace[i].loss);

  c.seed = 43;
  CHECK(train(f.pairs, f.data.embeddings, c).params != wide.params);
}

TEST_CASE("training lowers the loss and the trace follows the schedule") {
  const auto f = small_fixture();
  TrainConfig c;
  c.learning_rate = 5e-3;
  c.batch_size = 2;
  c.d_out = 16;
  c.epochs = 3;
  const auto r = train(f.pairs, f.data.embeddings, c);
  const auto init = AdapterParams::identity(16, 16);
  CHECK(mean_loss(f.pairs, f.data.embeddings, r.params, c.margin) <
        mean_loss(f.pairs, f.data.embeddings, init, c.margin));
  const auto total = r.trace.size();
  CHECK(total == 3 * ((f.pairs.size() + 1) / 2));
  CHECK(r.trace.front().learning_rate == 0.0);
  const auto w = warmup_steps(total, c.warmup_ratio);
  CHECK(r.trace[w].learning_rate == doctest::Approx(c.learning_rate));
}

TEST_CASE("training errors") {
  const auto f = small_fixture();
  CHECK_THROWS_AS(train({}, f.data.embeddings, {}), DomainError);
  auto pairs = f.pairs;
  pairs[0].occ_b = "nowhere";
  CHECK_THROWS_AS(train(pairs, f.data.embeddings, {}), MissingKeyError);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(f.pairs, f.data.embeddings, bad), Error);
}

TEST_CASE("CALEADP1 round-trip") {
  auto g = rng::substream(12, "adp");
  for (const bool bias : {false, true}) {
    auto p = random_params(g, 4, 3, bias);
    // Stored as float32; start from float-representable values for equality.
    for (auto& w : p.weight) w = static_cast<float>(w);
    if (bias)
      for (auto& b : *p.bias) b = static_cast<float>(b);
    std::stringstream ss;
    write_adapter(ss, p);
    CHECK(ss.str().size() == 8 + 4 + 4 + 1 + 4 * (12 + (bias ? 4 : 0)));
    CHECK(ss.str().substr(0, 8) == "CALEADP1");
    std::istringstream in(ss.str());
    CHECK(read_adapter(in) == p);
  }
  std::istringstream junk("CALEADP1\x01");
  CHECK_THROWS_AS(read_adapter(junk), FormatError);
  std::istringstream magic("CALEEMB1");
  CHECK_THROWS_AS(read_adapter(magic), FormatError);
}
