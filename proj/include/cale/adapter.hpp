#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cale/embedding.hpp"
#include "cale/spcd.hpp"

namespace cale::adapter {

// Linear map z = W e (+ b) applied on top of frozen encoder vectors.
// Weights live in double during training; the on-disk format stores float32.
struct AdapterParams {
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::vector<double> weight;               // row-major d_out x d_in
  std::optional<std::vector<double>> bias;  // d_out entries when present

  // Identity on the leading min(d_in, d_out) diagonal, zeros elsewhere.
  static AdapterParams identity(std::size_t d_in, std::size_t d_out, bool with_bias = false);

  double& w(std::size_t r, std::size_t c) { return weight[r * d_in + c]; }
  double w(std::size_t r, std::size_t c) const { return weight[r * d_in + c]; }

  // Throws DomainError on non-finite entries or inconsistent shapes.
  void validate() const;

  friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

// Which quantity enters the contrastive loss. `distance` (the default) uses
// d = 1 - cos; `similarity` plugs cos itself into the same expression.
enum class LossReading { distance, similarity };

struct TrainConfig {
  double margin = 0.7;
  double learning_rate = 6.02e-6;
  double warmup_ratio = 0.24;
  double weight_decay = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 42;
  std::size_t d_out = 1024;
  bool bias = false;
  LossReading loss = LossReading::distance;

  void validate() const;

  // Flat `key=value` text; `#` starts a comment. Unknown keys are rejected.
  static TrainConfig parse(std::istream& in, const std::string& source = "<stream>");
  static TrainConfig read(const std::filesystem::path& path);
  // Applies one key=value setting (same key names as the file).
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
};

// One training example; the spans must outlive the call that uses them.
struct PairExample {
  std::span<const double> a;
  std::span<const double> b;
  int label = 0;
};

std::vector<double> adapt(std::span<const double> e, const AdapterParams& p);

// Routes every row of `m` through the adapter.
EmbeddingMatrix adapt_all(const EmbeddingMatrix& m, const AdapterParams& p);

// 1/2 [y q^2 + (1 - y) max(0, margin - q)^2] with q = cosine distance (or
// cosine similarity under LossReading::similarity).
double pair_loss(std::span<const double> a, std::span<const double> b, int label, double margin,
                 LossReading reading = LossReading::distance);

struct Gradient {
  std::vector<double> weight;  // same layout as AdapterParams::weight
  std::vector<double> bias;    // empty when the adapter has no bias
  double loss = 0.0;           // mean batch loss at the current parameters
};

// Gradient of the mean batch loss w.r.t. the adapter parameters. Weight decay
// is not included (it is applied by the optimizer). The hinge uses the zero
// subgradient at d == margin. Throws DomainError naming the example index on
// non-finite intermediates or a zero adapted vector.
Gradient batch_gradient(std::span<const PairExample> batch, const AdapterParams& p, double margin,
                        LossReading reading = LossReading::distance);

double batch_loss(std::span<const PairExample> batch, const AdapterParams& p, double margin,
                  LossReading reading = LossReading::distance);

enum class Difference { central, forward, backward };

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;  // flat index; bias entries follow the weights
  std::size_t entries = 0;
};

// Entry-wise analytic vs finite-difference comparison. Relative error is
// |a - n| / max(|a|, |n|), taken as 0 when both magnitudes are below `guard`.
GradCheckReport gradient_check(const AdapterParams& p, std::span<const PairExample> batch, double margin,
                               double step, LossReading reading = LossReading::distance,
                               Difference scheme = Difference::central, double guard = 1e-8);

struct StepLog {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  AdapterParams params;
  std::vector<StepLog> trace;
};

// Linear warmup then linear decay to zero, as a multiplier of the base rate
// for the zero-based optimizer step `step`.
double schedule_factor(std::size_t step, std::size_t total_steps, std::size_t warmup_steps) noexcept;
std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio) noexcept;

// AdamW over shuffled pairs. Every pair id must be present in `embeddings`.
TrainResult train(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                  const TrainConfig& config);

// Mean pair loss of `pairs` under `p`.
double mean_loss(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                 const AdapterParams& p, double margin, LossReading reading = LossReading::distance);

// CALEADP1: magic, u32 d_out, u32 d_in, u8 bias flag, f32 weights row-major,
// then d_out f32 bias values when the flag is set. Little-endian.
void write_adapter(std::ostream& out, const AdapterParams& p);
void write_adapter(const std::filesystem::path& path, const AdapterParams& p);
AdapterParams read_adapter(std::istream& in);
AdapterParams read_adapter(const std::filesystem::path& path);

}  // namespace cale::adapter
