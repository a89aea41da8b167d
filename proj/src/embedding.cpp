#include "cale/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "cale/error.hpp"

namespace cale {

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DomainError("embedding dimension must be positive");
}

void EmbeddingMatrix::add(const std::string& id, std::span<const float> row) {
  if (dim_ == 0) throw DomainError("embedding matrix has no dimension");
  if (row.size() != dim_)
    throw DomainError("row '" + id + "' has " + std::to_string(row.size()) + " values, expected " +
                      std::to_string(dim_));
  if (std::all_of(row.begin(), row.end(), [](float x) { return x == 0.0f; }))
    throw DomainError("row '" + id + "' is the zero vector");
  if (!std::all_of(row.begin(), row.end(), [](float x) { return std::isfinite(x); }))
    throw DomainError("row '" + id + "' has a non-finite value");
  if (id.empty() || id.find('\n') != std::string::npos) throw DomainError("invalid occurrence id");
  if (!index_.emplace(id, ids_.size()).second) throw DomainError("duplicate occurrence id '" + id + "'");
  ids_.push_back(id);
  data_.insert(data_.end(), row.begin(), row.end());
}

void EmbeddingMatrix::add(const std::string& id, std::span<const double> row) {
  std::vector<float> f(row.begin(), row.end());
  add(id, std::span<const float>(f));
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= size()) throw MissingKeyError("row " + std::to_string(i) + " out of range");
  return {data_.data() + i * dim_, dim_};
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingMatrix::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw MissingKeyError("no embedding for occurrence '" + id + "'");
  return it->second;
}

namespace embedding {
namespace {

using detail::get_u32;
using detail::put_u32;
using detail::remaining;

void read_exact(std::istream& in, void* dst, std::size_t bytes, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw FormatError(std::string("truncated CALEEMB1 file: ") + what);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, b, 4, what);
  return get_u32(b);
}

}  // namespace

void write_embeddings(std::ostream& out, const EmbeddingMatrix& m) {
  if (m.dim() == 0) throw DomainError("cannot write an embedding matrix without dimension");
  if (m.size() > std::numeric_limits<std::uint32_t>::max() || m.dim() > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("embedding matrix too large for CALEEMB1");
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto r = m.row(i);
    if (std::all_of(r.begin(), r.end(), [](float x) { return x == 0.0f; }))
      throw DomainError("row '" + m.id(i) + "' is the zero vector");
  }

  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(m.size()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float x : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(x));

  std::string block;
  for (const auto& id : m.ids()) {
    block += id;
    block += '\n';
  }
  if (block.size() > std::numeric_limits<std::uint32_t>::max()) throw DomainError("id block too large");
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embeddings file " + path.string());
  write_embeddings(out, m);
  if (!out) throw Error("write failed for " + path.string());
}

EmbeddingMatrix read_embeddings(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("not a CALEEMB1 file (bad magic)");
  const auto n = read_u32(in, "header");
  const auto d = read_u32(in, "header");
  if (d == 0) throw FormatError("CALEEMB1 header declares dimension 0");

  const std::size_t payload = static_cast<std::size_t>(n) * d * 4;
  if (payload > remaining(in))
    throw FormatError("truncated CALEEMB1 payload: header claims " + std::to_string(n) + " rows of " +
                      std::to_string(d));
  std::vector<unsigned char> raw(payload);
  read_exact(in, raw.data(), payload, "payload");

  const auto block_len = read_u32(in, "id block length");
  if (block_len > remaining(in)) throw FormatError("truncated CALEEMB1 id block");
  std::string block(block_len, '\0');
  read_exact(in, block.data(), block_len, "id block");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after CALEEMB1 id block");

  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start < block.size()) {
    const auto nl = block.find('\n', start);
    if (nl == std::string::npos) throw FormatError("CALEEMB1 id block is not newline-terminated");
    ids.push_back(block.substr(start, nl - start));
    start = nl + 1;
  }
  if (ids.size() != n)
    throw FormatError("CALEEMB1 index holds " + std::to_string(ids.size()) + " ids for " + std::to_string(n) +
                      " rows");

  EmbeddingMatrix m(d);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      row[j] = std::bit_cast<float>(get_u32(raw.data() + (i * d + j) * 4));
    try {
      m.add(ids[i], row);
    } catch (const DomainError& e) {
      throw FormatError(std::string("invalid CALEEMB1 content: ") + e.what());
    }
  }
  return m;
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings file " + path.string());
  try {
    return read_embeddings(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace embedding

namespace {

template <class T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size())
    throw DomainError("cosine of vectors with dimensions " + std::to_string(u.size()) + " and " +
                      std::to_string(v.size()));
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) throw DomainError("cosine of a zero vector");
  // sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv): for u == v this is
  // sqrt(uu^2) == uu exactly, so self-similarity is exactly 1.
  const double c = uv / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) { return cosine_impl(u, v); }
double cosine_similarity(std::span<const float> u, std::span<const float> v) { return cosine_impl(u, v); }
double cosine_distance(std::span<const double> u, std::span<const double> v) { return 1.0 - cosine_impl(u, v); }
double cosine_distance(std::span<const float> u, std::span<const float> v) { return 1.0 - cosine_impl(u, v); }

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

std::vector<double> mean_vector(std::span<const std::size_t> rows, const EmbeddingMatrix& m) {
  if (rows.empty()) throw DomainError("mean of an empty row set");
  std::vector<double> acc(m.dim(), 0.0);
  for (auto r : rows) {
    const auto row = m.row(r);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += row[j];
  }
  for (auto& x : acc) x /= static_cast<double>(rows.size());
  return acc;
}

std::vector<double> mean_vector(const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) throw DomainError("mean of an empty vector set");
  std::vector<double> acc(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != acc.size()) throw DomainError("mean of vectors with differing dimensions");
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
  }
  for (auto& x : acc) x /= static_cast<double>(vectors.size());
  return acc;
}

}  // namespace cale
