#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cale {

// n x d float32 matrix with one row per occurrence id.
//
// Invariants: ids are unique, every row has `dim()` entries, no row is all
// zeros. Construction through `add` or `read_embeddings` enforces them.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  // Appends a row; throws on duplicate id, wrong width or an all-zero row.
  void add(const std::string& id, std::span<const float> row);
  void add(const std::string& id, std::span<const double> row);

  std::span<const float> row(std::size_t i) const;
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<float>& data() const noexcept { return data_; }

  std::optional<std::size_t> find(const std::string& id) const;
  // Row index for `id`; MissingKeyError when absent.
  std::size_t index_of(const std::string& id) const;
  std::span<const float> at(const std::string& id) const { return row(index_of(id)); }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace embedding {

inline constexpr char kMagic[8] = {'C', 'A', 'L', 'E', 'E', 'M', 'B', '1'};

// CALEEMB1: magic, u32 n, u32 d, n*d f32 row-major, u32 byte length, then n
// newline-terminated ids. All integers and floats little-endian.
void write_embeddings(std::ostream& out, const EmbeddingMatrix& m);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embeddings(std::istream& in);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace embedding

// Cosine kernels accumulate in double. Zero vectors raise DomainError.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(std::span<const float> u, std::span<const float> v);
double cosine_distance(std::span<const double> u, std::span<const double> v);
double cosine_distance(std::span<const float> u, std::span<const float> v);

std::vector<double> to_double(std::span<const float> v);

// Coordinate-wise mean of the given rows; DomainError when `rows` is empty.
std::vector<double> mean_vector(std::span<const std::size_t> rows, const EmbeddingMatrix& m);

// Same over explicit vectors.
std::vector<double> mean_vector(const std::vector<std::vector<double>>& vectors);

}  // namespace cale
