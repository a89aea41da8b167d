#include "cale/adapter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "cale/error.hpp"
#include "cale/rng.hpp"

namespace cale::adapter {

AdapterParams AdapterParams::identity(std::size_t d_in, std::size_t d_out, bool with_bias) {
  if (d_in == 0 || d_out == 0) throw DomainError("adapter dimensions must be positive");
  AdapterParams p;
  p.d_in = d_in;
  p.d_out = d_out;
  p.weight.assign(d_out * d_in, 0.0);
  for (std::size_t i = 0; i < std::min(d_in, d_out); ++i) p.w(i, i) = 1.0;
  if (with_bias) p.bias = std::vector<double>(d_out, 0.0);
  return p;
}

void AdapterParams::validate() const {
  if (d_out == 0 || d_in == 0) throw DomainError("adapter dimensions must be positive");
  if (weight.size() != d_out * d_in) throw DomainError("adapter weight size does not match its shape");
  if (bias && bias->size() != d_out) throw DomainError("adapter bias size does not match d_out");
  const auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(weight.begin(), weight.end(), finite)) throw DomainError("non-finite adapter weight");
  if (bias && !std::all_of(bias->begin(), bias->end(), finite)) throw DomainError("non-finite adapter bias");
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (!(margin > 0.0 && margin <= 2.0)) throw Error("margin must be in (0, 2]");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning_rate must be >= 0");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw Error("warmup_ratio must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw Error("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw Error("adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw Error("adam_epsilon must be > 0");
  if (epochs == 0) throw Error("epochs must be >= 1");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  if (d_out == 0) throw Error("d_out must be >= 1");
}

namespace {

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size()) throw Error("config key '" + key + "' expects a number, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw Error("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' is out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string format_real(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "margin") margin = to_real(key, value);
  else if (key == "learning_rate") learning_rate = to_real(key, value);
  else if (key == "warmup_ratio") warmup_ratio = to_real(key, value);
  else if (key == "weight_decay") weight_decay = to_real(key, value);
  else if (key == "adam_beta1") adam_beta1 = to_real(key, value);
  else if (key == "adam_beta2") adam_beta2 = to_real(key, value);
  else if (key == "adam_epsilon") adam_epsilon = to_real(key, value);
  else if (key == "epochs") epochs = to_uint(key, value);
  else if (key == "batch_size") batch_size = to_uint(key, value);
  else if (key == "seed") seed = to_uint(key, value);
  else if (key == "d_out") d_out = to_uint(key, value);
  else if (key == "bias") bias = to_bool(key, value);
  else if (key == "loss") {
    if (value == "distance") loss = LossReading::distance;
    else if (value == "similarity") loss = LossReading::similarity;
    else throw Error("config key 'loss' expects distance or similarity, got '" + value + "'");
  } else {
    throw Error("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::parse(std::istream& in, const std::string& source) {
  TrainConfig cfg;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(source, line, "expected key=value");
    try {
      cfg.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, line, e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"margin", format_real(margin)},
      {"learning_rate", format_real(learning_rate)},
      {"warmup_ratio", format_real(warmup_ratio)},
      {"weight_decay", format_real(weight_decay)},
      {"adam_beta1", format_real(adam_beta1)},
      {"adam_beta2", format_real(adam_beta2)},
      {"adam_epsilon", format_real(adam_epsilon)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"d_out", std::to_string(d_out)},
      {"bias", bias ? "true" : "false"},
      {"loss", loss == LossReading::distance ? "distance" : "similarity"},
  };
}

// ---------------------------------------------------------------------------
// Forward / loss

std::vector<double> adapt(std::span<const double> e, const AdapterParams& p) {
  if (e.size() != p.d_in)
    throw DomainError("adapter expects " + std::to_string(p.d_in) + "-d input, got " + std::to_string(e.size()));
  std::vector<double> z(p.d_out, 0.0);
  for (std::size_t r = 0; r < p.d_out; ++r) {
    const double* w = p.weight.data() + r * p.d_in;
    double acc = 0.0;
    for (std::size_t c = 0; c < p.d_in; ++c) acc += w[c] * e[c];
    z[r] = acc + (p.bias ? (*p.bias)[r] : 0.0);
  }
  return z;
}

EmbeddingMatrix adapt_all(const EmbeddingMatrix& m, const AdapterParams& p) {
  EmbeddingMatrix out(p.d_out);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto z = adapt(to_double(m.row(i)), p);
    out.add(m.id(i), std::span<const double>(z));
  }
  return out;
}

namespace {

// Loss value and dL/dq for q = the quantity selected by `reading`.
struct LossTerm {
  double loss;
  double dq;
};

LossTerm loss_term(double q, int label, double margin) {
  if (label == 1) return {0.5 * q * q, q};
  const double h = margin - q;
  // Zero subgradient at (and beyond) the margin.
  if (h <= 0.0) return {0.0, 0.0};
  return {0.5 * h * h, -h};
}

void check_label(int label) {
  if (label != 0 && label != 1) throw DomainError("pair label must be 0 or 1");
}

}  // namespace

double pair_loss(std::span<const double> a, std::span<const double> b, int label, double margin,
                 LossReading reading) {
  check_label(label);
  const double s = cosine_similarity(a, b);
  const double q = reading == LossReading::distance ? 1.0 - s : s;
  return loss_term(q, label, margin).loss;
}

namespace {

// Reusable buffers for one pass over a batch.
struct Workspace {
  std::vector<double> za, zb;
};

// Adds the gradient of the summed (not averaged) batch loss into g and returns
// the summed loss. Only `rows` are visited; any row left out must map every
// input to exactly zero, so it contributes nothing to the norms or gradient.
double accumulate(std::span<const PairExample> batch, const AdapterParams& p, double margin,
                  LossReading reading, std::span<const std::size_t> rows, std::vector<double>& gw,
                  std::vector<double>* gb, Workspace& ws) {
  const auto d_out = p.d_out, d_in = p.d_in;
  ws.za.resize(d_out);
  ws.zb.resize(d_out);
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& ex = batch[k];
    check_label(ex.label);
    if (ex.a.size() != d_in || ex.b.size() != d_in)
      throw DomainError("example " + std::to_string(k) + " has the wrong input dimension");

    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (const auto r : rows) {
      const double* w = p.weight.data() + r * d_in;
      double x = 0.0, y = 0.0;
      for (std::size_t c = 0; c < d_in; ++c) {
        x += w[c] * ex.a[c];
        y += w[c] * ex.b[c];
      }
      if (p.bias) {
        x += (*p.bias)[r];
        y += (*p.bias)[r];
      }
      ws.za[r] = x;
      ws.zb[r] = y;
      aa += x * x;
      bb += y * y;
      ab += x * y;
    }
    if (aa == 0.0 || bb == 0.0)
      throw DomainError("example " + std::to_string(k) + " maps to the zero vector");

    const double s = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
    const double q = reading == LossReading::distance ? 1.0 - s : s;
    const auto term = loss_term(q, ex.label, margin);
    const double dl_ds = reading == LossReading::distance ? -term.dq : term.dq;
    if (!std::isfinite(term.loss) || !std::isfinite(dl_ds))
      throw DomainError("non-finite loss at example " + std::to_string(k));
    total += term.loss;
    if (dl_ds == 0.0) continue;

    // ds/dza = zb / (|za||zb|) - s za / |za|^2, symmetric for zb.
    const double inv_ab = 1.0 / std::sqrt(aa * bb);
    const double ca = s / aa, cb = s / bb;
    for (const auto r : rows) {
      const double ga = dl_ds * (ws.zb[r] * inv_ab - ca * ws.za[r]);
      const double gbv = dl_ds * (ws.za[r] * inv_ab - cb * ws.zb[r]);
      if (!std::isfinite(ga) || !std::isfinite(gbv))
        throw DomainError("non-finite gradient at example " + std::to_string(k));
      if (ga == 0.0 && gbv == 0.0) continue;
      double* g = gw.data() + r * d_in;
      for (std::size_t c = 0; c < d_in; ++c) g[c] += ga * ex.a[c] + gbv * ex.b[c];
      if (gb) (*gb)[r] += ga + gbv;
    }
  }
  return total;
}

}  // namespace

Gradient batch_gradient(std::span<const PairExample> batch, const AdapterParams& p, double margin,
                        LossReading reading) {
  if (batch.empty()) throw DomainError("gradient of an empty batch");
  Gradient g;
  g.weight.assign(p.weight.size(), 0.0);
  if (p.bias) g.bias.assign(p.d_out, 0.0);
  Workspace ws;
  std::vector<std::size_t> rows(p.d_out);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const double total = accumulate(batch, p, margin, reading, rows, g.weight, p.bias ? &g.bias : nullptr, ws);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& x : g.weight) x *= inv;
  for (auto& x : g.bias) x *= inv;
  g.loss = total * inv;
  return g;
}

double batch_loss(std::span<const PairExample> batch, const AdapterParams& p, double margin,
                  LossReading reading) {
  if (batch.empty()) throw DomainError("loss of an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += pair_loss(adapt(ex.a, p), adapt(ex.b, p), ex.label, margin, reading);
  return total / static_cast<double>(batch.size());
}

GradCheckReport gradient_check(const AdapterParams& p, std::span<const PairExample> batch, double margin,
                               double step, LossReading reading, Difference scheme, double guard) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
  const auto g = batch_gradient(batch, p, margin, reading);
  AdapterParams probe = p;
  const double base = scheme == Difference::central ? 0.0 : batch_loss(batch, p, margin, reading);

  GradCheckReport rep;
  const auto n_w = p.weight.size();
  const auto n_b = p.bias ? p.bias->size() : 0;
  rep.entries = n_w + n_b;
  for (std::size_t i = 0; i < rep.entries; ++i) {
    double& slot = i < n_w ? probe.weight[i] : (*probe.bias)[i - n_w];
    const double orig = slot;
    double numeric;
    switch (scheme) {
      case Difference::central: {
        slot = orig + step;
        const double up = batch_loss(batch, probe, margin, reading);
        slot = orig - step;
        const double down = batch_loss(batch, probe, margin, reading);
        numeric = (up - down) / (2.0 * step);
        break;
      }
      case Difference::forward:
        slot = orig + step;
        numeric = (batch_loss(batch, probe, margin, reading) - base) / step;
        break;
      case Difference::backward:
      default:
        slot = orig - step;
        numeric = (base - batch_loss(batch, probe, margin, reading)) / step;
        break;
    }
    slot = orig;

    const double analytic = i < n_w ? g.weight[i] : g.bias[i - n_w];
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double err = scale < guard ? 0.0 : std::abs(analytic - numeric) / scale;
    if (err > rep.max_relative_error) {
      rep.max_relative_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Training

std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio) noexcept {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(total_steps) * warmup_ratio));
}

double schedule_factor(std::size_t step, std::size_t total_steps, std::size_t warmup) noexcept {
  if (step < warmup) return static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, warmup));
  const double remaining = static_cast<double>(total_steps) - static_cast<double>(step);
  return std::max(0.0, remaining / static_cast<double>(std::max<std::size_t>(1, total_steps - warmup)));
}

namespace {

struct Dataset {
  std::vector<std::vector<double>> rows;
  std::vector<PairExample> examples;
};

Dataset materialize(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings) {
  Dataset ds;
  std::unordered_map<std::size_t, std::size_t> slot;  // embedding row -> ds.rows index
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  refs.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto ia = embeddings.index_of(p.occ_a);
    const auto ib = embeddings.index_of(p.occ_b);
    for (auto i : {ia, ib})
      if (slot.emplace(i, ds.rows.size()).second) ds.rows.push_back(to_double(embeddings.row(i)));
    refs.emplace_back(slot[ia], slot[ib]);
  }
  ds.examples.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k)
    ds.examples.push_back({ds.rows[refs[k].first], ds.rows[refs[k].second], pairs[k].label});
  return ds;
}

}  // namespace

double mean_loss(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                 const AdapterParams& p, double margin, LossReading reading) {
  if (pairs.empty()) throw DomainError("mean loss of an empty pair set");
  const auto ds = materialize(pairs, embeddings);
  return batch_loss(ds.examples, p, margin, reading);
}

TrainResult train(const std::vector<spcd::PairRecord>& pairs, const EmbeddingMatrix& embeddings,
                  const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw DomainError("cannot train on an empty pair set");
  const auto ds = materialize(pairs, embeddings);

  TrainResult result;
  auto& p = result.params;
  p = AdapterParams::identity(embeddings.dim(), config.d_out, config.bias);

  const auto n = ds.examples.size();
  const auto steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const auto total_steps = steps_per_epoch * config.epochs;
  const auto warmup = warmup_steps(total_steps, config.warmup_ratio);

  std::vector<double> m_w(p.weight.size(), 0.0), v_w(p.weight.size(), 0.0);
  std::vector<double> m_b(p.bias ? p.d_out : 0, 0.0), v_b(m_b.size(), 0.0);
  std::vector<double> g_w(p.weight.size()), g_b(m_b.size());
  Workspace ws;

  // A row that starts all zero (weights and bias) outputs zero for every
  // input, so its gradient, both Adam moments and its decayed value remain
  // exactly zero for the whole run. Skipping such rows is bit-identical to
  // visiting them.
  std::vector<std::size_t> live;
  for (std::size_t r = 0; r < p.d_out; ++r) {
    const auto row = std::span<const double>(p.weight).subspan(r * p.d_in, p.d_in);
    const bool zero = std::all_of(row.begin(), row.end(), [](double x) { return x == 0.0; }) &&
                      (!p.bias || (*p.bias)[r] == 0.0);
    if (!zero) live.push_back(r);
  }

  std::vector<std::size_t> order(n);
  std::vector<PairExample> batch;
  batch.reserve(config.batch_size);
  auto gen = rng::substream(config.seed, "train.shuffle");
  result.trace.reserve(total_steps);

  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  double b1_pow = 1.0, b2_pow = 1.0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::shuffle(order.begin(), order.end(), gen);

    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      batch.clear();
      for (std::size_t k = start; k < std::min(n, start + config.batch_size); ++k)
        batch.push_back(ds.examples[order[k]]);

      for (const auto r : live) {
        std::fill_n(g_w.begin() + static_cast<std::ptrdiff_t>(r * p.d_in), p.d_in, 0.0);
        if (p.bias) g_b[r] = 0.0;
      }
      double loss;
      try {
        loss = accumulate(batch, p, config.margin, config.loss, live, g_w, p.bias ? &g_b : nullptr, ws);
      } catch (const DomainError& e) {
        throw DomainError("step " + std::to_string(step) + ": " + e.what());
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      loss *= inv;

      const double lr = config.learning_rate * schedule_factor(step, total_steps, warmup);
      result.trace.push_back({step, lr, loss});

      b1_pow *= b1;
      b2_pow *= b2;
      const double step_size = lr / (1.0 - b1_pow);
      const double bc2_sqrt = std::sqrt(1.0 - b2_pow);
      const double decay = 1.0 - lr * config.weight_decay;

      const auto adam = [&](double& param, double& m, double& v, double g, bool decayed) {
        const double gj = g * inv;
        m = b1 * m + (1.0 - b1) * gj;
        v = b2 * v + (1.0 - b2) * gj * gj;
        if (decayed) param *= decay;
        param -= step_size * m / (std::sqrt(v) / bc2_sqrt + config.adam_epsilon);
      };
      for (const auto r : live) {
        for (std::size_t j = r * p.d_in; j < (r + 1) * p.d_in; ++j) adam(p.weight[j], m_w[j], v_w[j], g_w[j], true);
        if (p.bias) adam((*p.bias)[r], m_b[r], v_b[r], g_b[r], false);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CALEADP1

namespace {

constexpr char kAdapterMagic[8] = {'C', 'A', 'L', 'E', 'A', 'D', 'P', '1'};

using detail::put_u32;

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError("truncated CALEADP1 file");
  return detail::get_u32(b);
}

double read_f32(std::istream& in) { return static_cast<double>(std::bit_cast<float>(read_u32(in))); }

}  // namespace

void write_adapter(std::ostream& out, const AdapterParams& p) {
  p.validate();
  if (p.d_out > std::numeric_limits<std::uint32_t>::max() || p.d_in > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("adapter too large for CALEADP1");
  out.write(kAdapterMagic, sizeof kAdapterMagic);
  put_u32(out, static_cast<std::uint32_t>(p.d_out));
  put_u32(out, static_cast<std::uint32_t>(p.d_in));
  out.put(p.bias ? 1 : 0);
  for (double x : p.weight) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  if (p.bias)
    for (double x : *p.bias) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
}

void write_adapter(const std::filesystem::path& path, const AdapterParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write adapter file " + path.string());
  write_adapter(out, p);
  if (!out) throw Error("write failed for " + path.string());
}

AdapterParams read_adapter(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kAdapterMagic, 8) != 0)
    throw FormatError("not a CALEADP1 file (bad magic)");
  AdapterParams p;
  p.d_out = read_u32(in);
  p.d_in = read_u32(in);
  if (p.d_out == 0 || p.d_in == 0) throw FormatError("CALEADP1 header declares a zero dimension");
  const int flag = in.get();
  if (flag != 0 && flag != 1) throw FormatError("CALEADP1 bias flag must be 0 or 1");
  const std::size_t values = p.d_out * p.d_in + (flag == 1 ? p.d_out : 0);
  if (values * 4 > detail::remaining(in)) throw FormatError("truncated CALEADP1 payload");
  p.weight.resize(p.d_out * p.d_in);
  for (auto& x : p.weight) x = read_f32(in);
  if (flag == 1) {
    p.bias = std::vector<double>(p.d_out);
    for (auto& x : *p.bias) x = read_f32(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after CALEADP1 payload");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid CALEADP1 content: ") + e.what());
  }
  return p;
}

AdapterParams read_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open adapter file " + path.string());
  try {
    return read_adapter(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cale::adapter
