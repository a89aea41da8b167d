#include "cale/lscd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cale/error.hpp"
#include "cale/parallel.hpp"

namespace cale::lscd {
namespace {

std::vector<std::vector<double>> gather(const std::vector<std::string>& ids, const EmbeddingMatrix& m,
                                        const std::string& word) {
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto row = m.find(id);
    if (!row) throw MissingKeyError("target '" + word + "': no embedding for usage '" + id + "'");
    out.push_back(to_double(m.row(*row)));
  }
  return out;
}

void check_sides(std::size_t n1, std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw DomainError("both usage periods must be non-empty");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    f.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return f;
}

double parse_real(const std::string& s, const std::string& source, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(source, line, "not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError(source, line, "not a number: '" + s + "'");
  return v;
}

}  // namespace

double apd(const std::vector<std::vector<double>>& t1, const std::vector<std::vector<double>>& t2) {
  check_sides(t1.size(), t2.size());
  double sum = 0.0;
  for (const auto& x : t1)
    for (const auto& y : t2) sum += cosine_distance(x, y);
  return sum / (static_cast<double>(t1.size()) * static_cast<double>(t2.size()));
}

double prt(const std::vector<std::vector<double>>& t1, const std::vector<std::vector<double>>& t2) {
  check_sides(t1.size(), t2.size());
  const auto m1 = mean_vector(t1), m2 = mean_vector(t2);
  const auto zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  if (zero(m1) || zero(m2)) throw DomainError("prototype of a usage period is the zero vector");
  return cosine_distance(m1, m2);
}

double apd(const DiachronicTarget& t, const EmbeddingMatrix& m) {
  check_sides(t.usages_t1.size(), t.usages_t2.size());
  return apd(gather(t.usages_t1, m, t.word), gather(t.usages_t2, m, t.word));
}

double prt(const DiachronicTarget& t, const EmbeddingMatrix& m) {
  check_sides(t.usages_t1.size(), t.usages_t2.size());
  try {
    return prt(gather(t.usages_t1, m, t.word), gather(t.usages_t2, m, t.word));
  } catch (const DomainError& e) {
    throw DomainError("target '" + t.word + "': " + e.what());
  }
}

stats::CorrelationResult rank_against_gold(const std::vector<DiachronicTarget>& targets, const ScoreFn& score_fn) {
  if (targets.size() < 3) throw DomainError("rank correlation needs at least 3 targets");
  std::vector<double> pred, gold;
  for (const auto& t : targets) {
    pred.push_back(score_fn(t));
    gold.push_back(t.gold_change);
  }
  return stats::spearman(pred, gold);
}

std::vector<DiachronicTarget> read_targets(std::istream& gold, const std::string& gold_source, std::istream& usages,
                                           const std::string& usages_source) {
  std::map<std::string, DiachronicTarget> by_word;
  std::string text;
  std::size_t line = 0;
  while (std::getline(gold, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto f = split_tabs(text);
    if (f.size() != 2 || f[0].empty()) throw ParseError(gold_source, line, "expected word<TAB>gold_change");
    DiachronicTarget t;
    t.word = f[0];
    t.gold_change = parse_real(f[1], gold_source, line);
    if (!by_word.emplace(t.word, t).second) throw ParseError(gold_source, line, "duplicate word '" + f[0] + "'");
  }

  std::set<std::pair<std::string, std::string>> seen;
  line = 0;
  while (std::getline(usages, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto f = split_tabs(text);
    if (f.size() != 3 || f[2].empty()) throw ParseError(usages_source, line, "expected word<TAB>period<TAB>occ_id");
    const auto it = by_word.find(f[0]);
    if (it == by_word.end()) throw ParseError(usages_source, line, "word '" + f[0] + "' has no gold score");
    if (f[1] != "1" && f[1] != "2") throw ParseError(usages_source, line, "period must be 1 or 2");
    if (!seen.emplace(f[0], f[2]).second)
      throw ParseError(usages_source, line, "usage '" + f[2] + "' listed twice for '" + f[0] + "'");
    (f[1] == "1" ? it->second.usages_t1 : it->second.usages_t2).push_back(f[2]);
  }

  std::vector<DiachronicTarget> out;
  for (auto& [w, t] : by_word) {
    if (t.usages_t1.empty() || t.usages_t2.empty())
      throw ParseError(usages_source, 0, "target '" + w + "' lacks usages in one period");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<DiachronicTarget> read_targets(const std::filesystem::path& gold, const std::filesystem::path& usages) {
  std::ifstream g(gold), u(usages);
  if (!g) throw Error("cannot open gold file " + gold.string());
  if (!u) throw Error("cannot open usages file " + usages.string());
  return read_targets(g, gold.string(), u, usages.string());
}

LscdReport evaluate(const std::vector<DiachronicTarget>& targets, const EmbeddingMatrix& m, std::size_t threads) {
  LscdReport r;
  r.scores.resize(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t i) {
    const auto& t = targets[i];
    r.scores[i] = {t.word, t.gold_change, apd(t, m), prt(t, m)};
  });

  if (targets.size() < 3) {
    r.notes.push_back("correlation refused: " + std::to_string(targets.size()) + " targets, need at least 3");
    return r;
  }
  std::vector<double> gold, a, p;
  for (const auto& s : r.scores) {
    gold.push_back(s.gold);
    a.push_back(s.apd);
    p.push_back(s.prt);
  }
  const auto attempt = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      r.notes.push_back(std::string(what) + ": " + e.what());
    }
  };
  attempt("rho_apd", [&] { r.rho_apd = stats::spearman(a, gold); });
  attempt("rho_prt", [&] { r.rho_prt = stats::spearman(p, gold); });
  if (r.rho_apd && r.rho_prt && targets.size() >= 4) {
    attempt("steiger", [&] {
      r.apd_vs_prt = stats::steiger_z(r.rho_apd->coefficient, r.rho_prt->coefficient, stats::spearman(a, p).coefficient,
                               targets.size());
    });
  }
  return r;
}

}  // namespace cale::lscd
