#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "cale/embedding.hpp"
#include "cale/error.hpp"
#include "cale/rng.hpp"

using namespace cale;

namespace {

std::string bytes_of(const EmbeddingMatrix& m) {
  std::ostringstream out(std::ios::binary);
  embedding::write_embeddings(out, m);
  return out.str();
}

EmbeddingMatrix two_by_three() {
  EmbeddingMatrix m(3);
  m.add("o1", std::vector<float>{1.0f, -2.5f, 3.25f});
  m.add("o2", std::vector<float>{0.0f, 1e-20f, -7.0f});
  return m;
}

}  // namespace

TEST_CASE("CALEEMB1 layout is little-endian with a trailing id block") {
  const auto s = bytes_of(two_by_three());
  REQUIRE(s.size() == 8 + 4 + 4 + 6 * 4 + 4 + 6);
  CHECK(s.substr(0, 8) == "CALEEMB1");
  CHECK(static_cast<unsigned char>(s[8]) == 2);
  CHECK(static_cast<unsigned char>(s[12]) == 3);
  // 1.0f = 0x3f800000 stored as 00 00 80 3f.
  CHECK(static_cast<unsigned char>(s[16]) == 0x00);
  CHECK(static_cast<unsigned char>(s[18]) == 0x80);
  CHECK(static_cast<unsigned char>(s[19]) == 0x3f);
  CHECK(static_cast<unsigned char>(s[40]) == 6);
  CHECK(s.substr(44) == "o1\no2\n");
}

TEST_CASE("round-trip is exact") {
  const auto m = two_by_three();
  std::istringstream in(bytes_of(m));
  const auto back = embedding::read_embeddings(in);
  CHECK(back == m);
  CHECK(back.index_of("o2") == 1);
  CHECK(bytes_of(back) == bytes_of(m));
}

TEST_CASE("reader rejects malformed files") {
  const auto good = bytes_of(two_by_three());
  SUBCASE("wrong magic") {
    auto s = good;
    s[7] = '2';
    std::istringstream in(s);
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
  SUBCASE("header claims more rows than the payload holds") {
    EmbeddingMatrix m(2);
    for (int i = 0; i < 4; ++i) m.add("r" + std::to_string(i), std::vector<float>{1.0f, float(i)});
    auto s = bytes_of(m);
    s[8] = 5;
    std::istringstream in(s);
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
  SUBCASE("truncated id block") {
    std::istringstream in(good.substr(0, good.size() - 2));
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
  SUBCASE("id count disagrees with n") {
    auto s = good.substr(0, 40);
    const std::string ids = "o1\n";
    s += std::string{3, 0, 0, 0} + ids;
    std::istringstream in(s);
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
  SUBCASE("trailing bytes") {
    std::istringstream in(good + "x");
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
  SUBCASE("zero row in the file") {
    auto s = good;
    std::memset(s.data() + 16, 0, 12);
    std::istringstream in(s);
    CHECK_THROWS_AS(embedding::read_embeddings(in), FormatError);
  }
}

TEST_CASE("matrix invariants") {
  EmbeddingMatrix m(2);
  CHECK_THROWS_AS(m.add("z", std::vector<float>{0.0f, 0.0f}), DomainError);
  CHECK_THROWS_AS(m.add("w", std::vector<float>{1.0f}), DomainError);
  CHECK_THROWS_AS(m.add("n", std::vector<float>{NAN, 1.0f}), DomainError);
  CHECK_THROWS_AS(m.add("a\nb", std::vector<float>{1.0f, 1.0f}), DomainError);
  m.add("ok", std::vector<float>{1.0f, 0.0f});
  CHECK_THROWS_AS(m.add("ok", std::vector<float>{0.0f, 1.0f}), DomainError);
  CHECK_THROWS_AS(m.index_of("missing"), MissingKeyError);
  CHECK(!m.find("missing"));
}

TEST_CASE("cosine kernel") {
  using V = std::vector<double>;
  CHECK(cosine_similarity(V{1, 0}, V{1, 0}) == 1.0);
  CHECK(cosine_similarity(V{1, 0}, V{0, 1}) == 0.0);
  CHECK(cosine_similarity(V{1, 2}, V{2, 1}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(cosine_distance(V{1, 0}, V{-1, 0}) == 2.0);
  CHECK_THROWS_AS(cosine_similarity(V{0, 0}, V{1, 0}), DomainError);
  CHECK_THROWS_AS(cosine_similarity(V{1, 0}, V{1, 0, 0}), DomainError);

  auto g = rng::substream(11, "cos");
  for (int t = 0; t < 200; ++t) {
    V u(7), v(7);
    for (auto& x : u) x = rng::normal(g);
    for (auto& x : v) x = rng::normal(g);
    // Self-distance is exactly zero.
    CHECK(cosine_distance(u, u) == 0.0);
    const double s = cosine_similarity(u, v);
    CHECK(s == cosine_similarity(v, u));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    V su = u, sv = v;
    const double alpha = 0.1 + 10 * rng::uniform_unit(g), beta = 0.1 + 10 * rng::uniform_unit(g);
    for (auto& x : su) x *= alpha;
    for (auto& x : sv) x *= beta;
    CHECK(std::abs(cosine_similarity(su, sv) - s) < 1e-14);
  }
}

TEST_CASE("mean_vector") {
  using V = std::vector<double>;
  CHECK(mean_vector(std::vector<V>{{1, 0}}) == V{1, 0});
  CHECK(mean_vector(std::vector<V>{{1, 0}, {0, 1}}) == V{0.5, 0.5});
  CHECK(mean_vector(std::vector<V>{{1, 2}, {3, 4}, {5, 0}}) == V{3, 2});
  CHECK_THROWS_AS(mean_vector(std::vector<V>{}), DomainError);

  EmbeddingMatrix m(2);
  m.add("a", std::vector<float>{1.0f, 2.0f});
  m.add("b", std::vector<float>{3.0f, 4.0f});
  m.add("c", std::vector<float>{5.0f, 0.0f});
  const std::vector<std::size_t> rows{0, 1, 2};
  CHECK(mean_vector(rows, m) == V{3, 2});
  CHECK_THROWS_AS(mean_vector(std::span<const std::size_t>{}, m), DomainError);
}
