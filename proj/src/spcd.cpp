#include "cale/spcd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "cale/error.hpp"
#include "cale/rng.hpp"

namespace cale::spcd {

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(LemmaRel r) noexcept { return r == LemmaRel::SL ? "SL" : "DL"; }
std::string_view to_string(ConceptRel r) noexcept { return r == ConceptRel::SC ? "SC" : "DC"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::SC_SL: return "SC&SL";
    case Category::SC_DL: return "SC&DL";
    case Category::DC_SL: return "DC&SL";
    case Category::DC_DL: return "DC&DL";
  }
  return "?";
}

Category category_of(ConceptRel c, LemmaRel l) noexcept {
  if (c == ConceptRel::SC) return l == LemmaRel::SL ? Category::SC_SL : Category::SC_DL;
  return l == LemmaRel::SL ? Category::DC_SL : Category::DC_DL;
}

ConceptRel concept_rel(Category c) noexcept {
  return (c == Category::SC_SL || c == Category::SC_DL) ? ConceptRel::SC : ConceptRel::DC;
}

LemmaRel lemma_rel(Category c) noexcept {
  return (c == Category::SC_SL || c == Category::DC_SL) ? LemmaRel::SL : LemmaRel::DL;
}

void SplitSpec::validate() const {
  if (!(val_fraction > 0.0) || !(test_fraction > 0.0))
    throw Error("held-out fractions must be positive");
  if (!(val_fraction + test_fraction < 1.0))
    throw Error("val_fraction + test_fraction must be < 1 (got " +
                std::to_string(val_fraction + test_fraction) + ")");
}

std::size_t held_out_size(std::size_t population, double fraction) noexcept {
  return static_cast<std::size_t>(std::floor(static_cast<double>(population) * fraction + 0.5));
}

namespace {

template <class Key>
std::map<Key, Split> split_keys(const std::set<Key>& keys, const SplitSpec& spec, std::string_view stream,
                                std::string_view what, std::vector<std::string>& warnings) {
  std::vector<Key> order(keys.begin(), keys.end());
  auto gen = rng::substream(spec.seed, stream);
  rng::shuffle(order.begin(), order.end(), gen);

  const auto n = order.size();
  const auto n_test = std::min(held_out_size(n, spec.test_fraction), n);
  const auto n_val = std::min(held_out_size(n, spec.val_fraction), n - n_test);
  if (n_test == 0) warnings.push_back("no " + std::string(what) + " held out for test");
  if (n_val == 0) warnings.push_back("no " + std::string(what) + " held out for val");
  if (n_test + n_val == n) warnings.push_back("no " + std::string(what) + " left for train");

  std::map<Key, Split> out;
  for (std::size_t i = 0; i < n; ++i)
    out.emplace(order[i], i < n_test ? Split::test : (i < n_test + n_val ? Split::val : Split::train));
  return out;
}

}  // namespace

SplitAssignment partition(const std::set<ConceptId>& concepts, const std::set<std::string>& lemmas,
                          const SplitSpec& spec) {
  spec.validate();
  if (concepts.empty() || lemmas.empty()) throw Error("partition needs non-empty concept and lemma sets");
  SplitAssignment a;
  a.concept_split = split_keys(concepts, spec, "partition.concepts", "concepts", a.warnings);
  a.lemma_split = split_keys(lemmas, spec, "partition.lemmas", "lemmas", a.warnings);
  return a;
}

std::map<Split, std::vector<Occurrence>> assign_occurrences(const std::vector<Occurrence>& occs,
                                                            const SplitAssignment& assignment) {
  std::map<Split, std::vector<Occurrence>> out;
  for (auto s : kSplits) out[s];
  for (const auto& occ : occs) {
    const auto c = assignment.concept_split.find(occ.concept_id);
    if (c == assignment.concept_split.end())
      throw MissingKeyError("concept '" + occ.concept_id.value + "' of occurrence '" + occ.id +
                            "' has no split");
    const auto l = assignment.lemma_split.find(occ.lemma);
    if (l == assignment.lemma_split.end())
      throw MissingKeyError("lemma '" + occ.lemma + "' of occurrence '" + occ.id + "' has no split");
    // Split enumerators are ordered train < val < test, so max() applies the
    // test > val > train priority.
    out[std::max(c->second, l->second)].push_back(occ);
  }
  return out;
}

PairRecord make_pair(const Occurrence& a, const Occurrence& b, Split split) {
  PairRecord p;
  p.occ_a = a.id;
  p.occ_b = b.id;
  p.lemma_rel = a.lemma == b.lemma ? LemmaRel::SL : LemmaRel::DL;
  p.concept_rel = a.concept_id == b.concept_id ? ConceptRel::SC : ConceptRel::DC;
  p.label = p.concept_rel == ConceptRel::SC ? 1 : 0;
  p.split = split;
  return p;
}

std::vector<PairRecord> generate_pairs(const std::vector<Occurrence>& occs, Split split, std::uint64_t seed) {
  const auto n = occs.size();
  std::unordered_map<std::string, std::vector<std::size_t>> by_concept;
  std::unordered_map<std::string, std::vector<std::size_t>> by_lemma;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_both;
  // Pools are filled in id order so a draw depends on ids, not input positions.
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t x, std::size_t y) { return occs[x].id < occs[y].id; });
  for (const auto i : by_id) {
    by_concept[occs[i].concept_id.value].push_back(i);
    by_lemma[occs[i].lemma].push_back(i);
    by_both[{occs[i].concept_id.value, occs[i].lemma}].push_back(i);
  }

  std::vector<PairRecord> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = occs[i];
    const auto& same_c = by_concept[o.concept_id.value];
    const auto& same_l = by_lemma[o.lemma];
    const auto& same_cl = by_both[{o.concept_id.value, o.lemma}];
    auto gen = rng::substream(seed, "pairs:" + o.id);

    const auto is_sc = [&](std::size_t j) { return occs[j].concept_id == o.concept_id; };
    const auto is_sl = [&](std::size_t j) { return occs[j].lemma == o.lemma; };

    for (const auto cat : kCategories) {
      // Eligible-set size and the superset we rejection-sample from.
      std::size_t eligible = 0;
      const std::vector<std::size_t>* pool = nullptr;
      switch (cat) {
        case Category::SC_SL: eligible = same_cl.size() - 1; pool = &same_cl; break;
        case Category::SC_DL: eligible = same_c.size() - same_cl.size(); pool = &same_c; break;
        case Category::DC_SL: eligible = same_l.size() - same_cl.size(); pool = &same_l; break;
        case Category::DC_DL: eligible = n - same_c.size() - same_l.size() + same_cl.size(); break;
      }
      if (eligible == 0) continue;

      const bool want_sc = concept_rel(cat) == ConceptRel::SC;
      const bool want_sl = lemma_rel(cat) == LemmaRel::SL;
      std::size_t j;
      do {
        const auto k = rng::uniform_index(gen, pool ? pool->size() : n);
        j = pool ? (*pool)[k] : by_id[k];
      } while (j == i || is_sc(j) != want_sc || is_sl(j) != want_sl);

      if (!seen.emplace(std::min(i, j), std::max(i, j)).second) continue;
      out.push_back(make_pair(o, occs[j], split));
    }
  }
  return out;
}

void sort_pairs(std::vector<PairRecord>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairRecord& x, const PairRecord& y) {
    return std::tie(x.split, x.occ_a, x.occ_b) < std::tie(y.split, y.occ_a, y.occ_b);
  });
}

PairStats pair_stats(const std::vector<PairRecord>& pairs) {
  PairStats st;
  std::map<Split, std::set<std::string>> occ_ids;
  std::set<std::string> all_ids;
  for (auto s : kSplits) st.per_split[s];
  const auto add = [](CategoryCounts& c, const PairRecord& p) {
    ++c.by_category[static_cast<std::size_t>(p.category())];
    ++c.total;
    c.label1 += p.label == 1;
    c.same_lemma += p.lemma_rel == LemmaRel::SL;
  };
  for (const auto& p : pairs) {
    add(st.per_split[p.split], p);
    add(st.overall, p);
    occ_ids[p.split].insert(p.occ_a);
    occ_ids[p.split].insert(p.occ_b);
    all_ids.insert(p.occ_a);
    all_ids.insert(p.occ_b);
  }
  for (auto& [s, c] : st.per_split) c.unique_occurrences = occ_ids[s].size();
  st.overall.unique_occurrences = all_ids.size();
  return st;
}

void write_pairs(std::ostream& out, const std::vector<PairRecord>& pairs) {
  for (const auto& p : pairs) {
    out << p.occ_a << '\t' << p.occ_b << '\t' << to_string(p.lemma_rel) << '\t' << to_string(p.concept_rel)
        << '\t' << p.label << '\t' << to_string(p.split) << '\n';
  }
}

void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pairs file " + path.string());
  write_pairs(out, pairs);
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<PairRecord> read_pairs(std::istream& in, const std::string& source) {
  std::vector<PairRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto tab = text.find('\t', start);
      f.push_back(text.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) throw ParseError(source, line, "expected 6 tab-separated fields");
    PairRecord p;
    p.occ_a = f[0];
    p.occ_b = f[1];
    if (p.occ_a.empty() || p.occ_b.empty() || p.occ_a == p.occ_b)
      throw ParseError(source, line, "invalid occurrence ids");
    if (f[2] == "SL") p.lemma_rel = LemmaRel::SL;
    else if (f[2] == "DL") p.lemma_rel = LemmaRel::DL;
    else throw ParseError(source, line, "lemma_rel must be SL or DL");
    if (f[3] == "SC") p.concept_rel = ConceptRel::SC;
    else if (f[3] == "DC") p.concept_rel = ConceptRel::DC;
    else throw ParseError(source, line, "concept_rel must be SC or DC");
    if (f[4] == "1") p.label = 1;
    else if (f[4] == "0") p.label = 0;
    else throw ParseError(source, line, "label must be 0 or 1");
    if ((p.label == 1) != (p.concept_rel == ConceptRel::SC))
      throw ParseError(source, line, "label disagrees with concept_rel");
    try {
      p.split = parse_split(f[5]);
    } catch (const Error& e) {
      throw ParseError(source, line, e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pairs file " + path.string());
  return read_pairs(in, path.string());
}

}  // namespace cale::spcd
