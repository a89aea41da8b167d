#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cale/adapter.hpp"
#include "cale/conceptdiff.hpp"
#include "cale/corpus.hpp"
#include "cale/cosimlex.hpp"
#include "cale/embedding.hpp"
#include "cale/error.hpp"
#include "cale/geometry.hpp"
#include "cale/lscd.hpp"
#include "cale/rng.hpp"
#include "cale/spcd.hpp"
#include "cale/stats.hpp"
#include "manifest.hpp"

namespace cale::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  bool force = false;
};

// Output paths are claimed before any work so a refused overwrite costs nothing.
class Outputs {
 public:
  explicit Outputs(bool force) : force_(force) {}

  void claim(const fs::path& p) {
    if (p.empty()) return;
    if (!claimed_.insert(fs::absolute(p).lexically_normal()).second)
      throw Error("output " + p.string() + " named twice");
    if (fs::exists(p) && !force_) throw Error("refusing to overwrite " + p.string() + " (pass --force)");
  }

 private:
  bool force_;
  std::set<fs::path> claimed_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const stats::CorrelationResult& r) {
  return {{"coefficient", r.coefficient}, {"n", r.n}, {"p_value", r.p_value}, {"significant", r.significant()}};
}

json to_json(const cdiff::SubsetMetrics& m) {
  return {{"n", m.n},
          {"positives", m.positives},
          {"balanced_accuracy", opt(m.balanced_accuracy)},
          {"accuracy", m.accuracy},
          {"f1", m.f1},
          {"recall_pos", opt(m.recall_pos)},
          {"recall_neg", opt(m.recall_neg)}};
}

json to_json(const cdiff::CdReport& r) {
  json cats = json::object();
  for (std::size_t c = 0; c < 4; ++c)
    cats[std::string(spcd::to_string(spcd::kCategories[c]))] = opt(r.category_accuracy[c]);
  return {{"all", to_json(r.all)},
          {"same_lemma", to_json(r.same_lemma)},
          {"diff_lemma", to_json(r.diff_lemma)},
          {"category_accuracy", cats}};
}

json to_json(const spcd::CategoryCounts& c) {
  json cats = json::object();
  for (std::size_t k = 0; k < 4; ++k) cats[std::string(spcd::to_string(spcd::kCategories[k]))] = c.by_category[k];
  return {{"total", c.total},
          {"label1", c.label1},
          {"label1_share", c.label1_share()},
          {"same_lemma", c.same_lemma},
          {"unique_occurrences", c.unique_occurrences},
          {"categories", cats}};
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

// Reads embeddings and, when an adapter path is given, routes every row through it.
EmbeddingMatrix load_space(const fs::path& embeddings, const std::string& adapter_path, RunManifest& manifest) {
  manifest.add_input("embeddings", embeddings);
  auto m = embedding::read_embeddings(embeddings);
  if (adapter_path.empty()) return m;
  manifest.add_input("adapter", adapter_path);
  const auto p = adapter::read_adapter(fs::path(adapter_path));
  return adapter::adapt_all(m, p);
}

std::vector<spcd::PairRecord> of_split(const std::vector<spcd::PairRecord>& pairs, spcd::Split s) {
  std::vector<spcd::PairRecord> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [&](const spcd::PairRecord& p) { return p.split == s; });
  return out;
}

std::vector<cdiff::ScoredPair> of_split(const std::vector<cdiff::ScoredPair>& pairs, spcd::Split s) {
  std::vector<cdiff::ScoredPair> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [&](const cdiff::ScoredPair& p) { return p.pair.split == s; });
  return out;
}

const std::map<std::string, spcd::Split> kSplitNames{
    {"train", spcd::Split::train}, {"val", spcd::Split::val}, {"test", spcd::Split::test}};

// ---------------------------------------------------------------------------

struct BuildPairsArgs {
  std::string corpus, out, stats;
  double val_frac = 0.05, test_frac = 0.10;
  std::uint64_t seed = 42;
};

void build_pairs(const BuildPairsArgs& a, const Globals& g, std::ostream& log) {
  spcd::SplitSpec spec{a.val_frac, a.test_frac, a.seed};
  spec.validate();
  const auto stats_path = a.stats.empty() ? a.out + ".stats.json" : a.stats;
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(stats_path);

  RunManifest manifest;
  manifest.command = "build-pairs";
  manifest.seed = a.seed;
  manifest.config = {{"val_frac", fmt(a.val_frac)}, {"test_frac", fmt(a.test_frac)}, {"seed", std::to_string(a.seed)}};
  manifest.add_input("corpus", a.corpus);

  const auto occs = corpus::parse_corpus(fs::path(a.corpus));
  const auto kept = corpus::filter_corpus(occs);
  if (kept.empty()) throw Error("no occurrences survive filtering");

  std::set<ConceptId> concepts;
  std::set<std::string> lemmas;
  for (const auto& o : kept) {
    concepts.insert(o.concept_id);
    lemmas.insert(o.lemma);
  }
  const auto assignment = spcd::partition(concepts, lemmas, spec);
  const auto routed = spcd::assign_occurrences(kept, assignment);

  std::vector<spcd::PairRecord> pairs;
  for (auto s : spcd::kSplits) {
    auto part = spcd::generate_pairs(routed.at(s), s, a.seed);
    pairs.insert(pairs.end(), part.begin(), part.end());
  }
  spcd::sort_pairs(pairs);
  spcd::write_pairs(fs::path(a.out), pairs);

  const auto st = spcd::pair_stats(pairs);
  json report;
  report["manifest"] = manifest.to_json();
  json occ_counts = {{"input", occs.size()}, {"kept", kept.size()}};
  json concept_counts = json::object(), lemma_counts = json::object(), pair_counts = json::object();
  for (auto s : spcd::kSplits) {
    const std::string name(spcd::to_string(s));
    occ_counts[name] = routed.at(s).size();
    concept_counts[name] = std::count_if(assignment.concept_split.begin(), assignment.concept_split.end(),
                                         [&](const auto& kv) { return kv.second == s; });
    lemma_counts[name] = std::count_if(assignment.lemma_split.begin(), assignment.lemma_split.end(),
                                       [&](const auto& kv) { return kv.second == s; });
    pair_counts[name] = to_json(st.per_split.at(s));
  }
  pair_counts["overall"] = to_json(st.overall);
  report["occurrences"] = occ_counts;
  report["concepts"] = concept_counts;
  report["lemmas"] = lemma_counts;
  report["pairs"] = pair_counts;
  report["warnings"] = assignment.warnings;
  write_json(stats_path, report);

  for (const auto& w : assignment.warnings) log << "warning: " << w << '\n';
  log << "wrote " << pairs.size() << " pairs from " << kept.size() << " occurrences to " << a.out << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string pairs, embeddings, config, out, trace, report;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
};

void train_adapter(const TrainArgs& a, const Globals& g, std::ostream& log) {
  auto cfg = a.config.empty() ? adapter::TrainConfig{} : adapter::TrainConfig::read(a.config);
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const auto report_path = a.report.empty() ? a.out + ".json" : a.report;
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(a.trace);
  outs.claim(report_path);

  RunManifest manifest;
  manifest.command = "train-adapter";
  manifest.seed = cfg.seed;
  manifest.config = cfg.to_map();
  manifest.add_input("pairs", a.pairs);
  if (!a.config.empty()) manifest.add_input("config", a.config);
  manifest.add_input("embeddings", a.embeddings);

  const auto train_pairs = of_split(spcd::read_pairs(fs::path(a.pairs)), spcd::Split::train);
  if (train_pairs.empty()) throw Error("no train pairs in " + a.pairs);
  const auto emb = embedding::read_embeddings(fs::path(a.embeddings));

  const auto init = adapter::AdapterParams::identity(emb.dim(), cfg.d_out, cfg.bias);
  const double loss_before = adapter::mean_loss(train_pairs, emb, init, cfg.margin, cfg.loss);
  const auto result = adapter::train(train_pairs, emb, cfg);
  const double loss_after = adapter::mean_loss(train_pairs, emb, result.params, cfg.margin, cfg.loss);

  adapter::write_adapter(fs::path(a.out), result.params);
  if (!a.trace.empty()) {
    std::ostringstream csv;
    csv << std::setprecision(17) << "step,learning_rate,loss\n";
    for (const auto& s : result.trace) csv << s.step << ',' << s.learning_rate << ',' << s.loss << '\n';
    write_text(a.trace, csv.str());
  }
  json report;
  report["manifest"] = manifest.to_json();
  report["train_pairs"] = train_pairs.size();
  report["steps"] = result.trace.size();
  report["warmup_steps"] = adapter::warmup_steps(result.trace.size(), cfg.warmup_ratio);
  report["mean_loss_before"] = loss_before;
  report["mean_loss_after"] = loss_after;
  report["d_in"] = result.params.d_in;
  report["d_out"] = result.params.d_out;
  write_json(report_path, report);
  log << "trained on " << train_pairs.size() << " pairs, mean loss " << loss_before << " -> " << loss_after
      << '\n';
}

// ---------------------------------------------------------------------------

struct CdiffArgs {
  std::string pairs, embeddings, adapter, out, scores;
  std::string tune_split = "val", eval_split = "test";
  std::optional<double> threshold;
};

void eval_cdiff(const CdiffArgs& a, const Globals& g, std::ostream& log) {
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(a.scores);
  RunManifest manifest;
  manifest.command = "eval cdiff";
  manifest.config = {{"tune_split", a.tune_split}, {"eval_split", a.eval_split}};
  if (a.threshold) manifest.config["threshold"] = fmt(*a.threshold);
  manifest.add_input("pairs", a.pairs);

  const auto pairs = spcd::read_pairs(fs::path(a.pairs));
  const auto space = load_space(a.embeddings, a.adapter, manifest);
  const auto scored = cdiff::score_pairs(pairs, space, g.threads);
  const auto eval = of_split(scored, kSplitNames.at(a.eval_split));
  if (eval.empty()) throw Error("no " + a.eval_split + " pairs to evaluate");

  json report;
  cdiff::Threshold th;
  if (a.threshold) {
    th.value = *a.threshold;
    report["threshold_source"] = "fixed";
  } else {
    const auto tune = of_split(scored, kSplitNames.at(a.tune_split));
    if (tune.empty()) throw Error("no " + a.tune_split + " pairs to tune the threshold on (or pass --threshold)");
    th = cdiff::tune_threshold(tune);
    report["threshold_source"] = a.tune_split;
    report["tune_accuracy"] = th.accuracy;
  }
  const auto model = cdiff::metrics(cdiff::classify(eval, th.value), eval);
  const auto baseline = cdiff::metrics(cdiff::baseline_1l1c(eval), eval);

  report["manifest"] = manifest.to_json();
  report["threshold"] = th.value;
  report["eval_split"] = a.eval_split;
  report["model"] = to_json(model);
  report["baseline_1l1c"] = to_json(baseline);
  write_json(a.out, report);

  if (!a.scores.empty()) {
    std::ostringstream tsv;
    tsv << std::setprecision(17);
    for (const auto& s : scored)
      tsv << s.pair.occ_a << '\t' << s.pair.occ_b << '\t' << spcd::to_string(s.pair.category()) << '\t'
          << s.pair.label << '\t' << spcd::to_string(s.pair.split) << '\t' << s.distance << '\n';
    write_text(a.scores, tsv.str());
  }
  log << "BA " << (model.all.balanced_accuracy ? fmt(*model.all.balanced_accuracy) : "n/a") << " at threshold "
      << th.value << '\n';
}

// ---------------------------------------------------------------------------

struct LscdArgs {
  std::string gold, usages, embeddings, adapter, out, scores;
};

void eval_lscd(const LscdArgs& a, const Globals& g, std::ostream& log) {
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(a.scores);
  RunManifest manifest;
  manifest.command = "eval lscd";
  manifest.add_input("gold", a.gold);
  manifest.add_input("usages", a.usages);

  const auto targets = lscd::read_targets(fs::path(a.gold), fs::path(a.usages));
  const auto space = load_space(a.embeddings, a.adapter, manifest);
  const auto r = lscd::evaluate(targets, space, g.threads);

  if (!a.scores.empty()) {
    std::ostringstream tsv;
    tsv << std::setprecision(17);
    for (const auto& s : r.scores) tsv << s.word << '\t' << s.apd << '\t' << s.prt << '\n';
    write_text(a.scores, tsv.str());
  }
  json report;
  report["manifest"] = manifest.to_json();
  report["targets"] = targets.size();
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back({{"word", s.word}, {"gold", s.gold}, {"apd", s.apd}, {"prt", s.prt}});
  report["scores"] = scores;
  report["spearman"] = {{"apd", r.rho_apd ? to_json(*r.rho_apd) : json(nullptr)},
                        {"prt", r.rho_prt ? to_json(*r.rho_prt) : json(nullptr)}};
  report["steiger_z1star_apd_vs_prt"] =
      r.apd_vs_prt ? json{{"z", r.apd_vs_prt->z}, {"p_value", r.apd_vs_prt->p_value}} : json(nullptr);
  report["notes"] = r.notes;
  write_json(a.out, report);
  for (const auto& n : r.notes) log << "note: " << n << '\n';
  log << "scored " << targets.size() << " targets\n";
}

// ---------------------------------------------------------------------------

struct CosimArgs {
  std::string entries, embeddings, adapter, out, predictions, from_predictions;
};

void eval_cosimlex(const CosimArgs& a, const Globals& g, std::ostream& log) {
  if (a.embeddings.empty() == a.from_predictions.empty())
    throw Error("pass exactly one of --embeddings and --from-predictions");
  if (!a.adapter.empty() && a.embeddings.empty()) throw Error("--adapter needs --embeddings");
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(a.predictions);
  RunManifest manifest;
  manifest.command = "eval cosimlex";
  manifest.add_input("entries", a.entries);

  const auto entries = cosimlex::read_entries(fs::path(a.entries));
  std::vector<cosimlex::Prediction> preds;
  if (!a.from_predictions.empty()) {
    manifest.add_input("predictions", a.from_predictions);
    std::ifstream in(a.from_predictions);
    if (!in) throw Error("cannot open " + a.from_predictions);
    preds = cosimlex::read_predictions(in, entries, a.from_predictions);
  } else {
    const auto space = load_space(a.embeddings, a.adapter, manifest);
    preds.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      // Rows are keyed <entry_id>:c<context>:<token index of the marked target>.
      const auto encoder_for = [&](int ctx) {
        return [&, ctx](const MarkedSentence& s) {
          return to_double(space.at(e.id + ":c" + std::to_string(ctx) + ":" + std::to_string(s.target_index())));
        };
      };
      preds[i] = {cosimlex::predict_sim(e.context1, encoder_for(1)), cosimlex::predict_sim(e.context2, encoder_for(2))};
    }
  }
  if (!a.predictions.empty()) {
    std::ostringstream tsv;
    cosimlex::write_predictions(tsv, entries, preds);
    write_text(a.predictions, tsv.str());
  }

  json report;
  report["manifest"] = manifest.to_json();
  report["entries"] = entries.size();
  std::vector<std::string> notes;
  const auto attempt = [&](const char* name, auto&& fn) -> json {
    try {
      return to_json(fn());
    } catch (const DomainError& e) {
      notes.push_back(std::string(name) + ": " + e.what());
      return nullptr;
    }
  };
  report["subtask1_pearson"] = attempt("subtask1", [&] { return cosimlex::subtask1(entries, preds); });
  report["subtask2_spearman"] = attempt("subtask2", [&] { return cosimlex::subtask2(entries, preds); });
  report["notes"] = notes;
  write_json(a.out, report);
  for (const auto& n : notes) log << "note: " << n << '\n';
  log << "evaluated " << entries.size() << " entries\n";
}

// ---------------------------------------------------------------------------

struct GeometryArgs {
  std::string pairs, embeddings, adapter, corpus, taxonomy, out, csv, svg;
  std::string split = "test", tune_split = "val";
  std::optional<double> threshold;
  std::size_t bins = geometry::kDefaultBins;
};

void eval_geometry(const GeometryArgs& a, const Globals& g, std::ostream& log) {
  Outputs outs(g.force);
  outs.claim(a.out);
  outs.claim(a.csv);
  outs.claim(a.svg);
  RunManifest manifest;
  manifest.command = "eval geometry";
  manifest.config = {{"split", a.split}, {"bins", std::to_string(a.bins)}};
  manifest.add_input("pairs", a.pairs);
  manifest.add_input("corpus", a.corpus);
  if (!a.taxonomy.empty()) manifest.add_input("taxonomy", a.taxonomy);

  const auto pairs = spcd::read_pairs(fs::path(a.pairs));
  const auto space = load_space(a.embeddings, a.adapter, manifest);
  const auto occs = corpus::parse_corpus(fs::path(a.corpus));
  std::map<std::string, const Occurrence*> by_id;
  for (const auto& o : occs) by_id.emplace(o.id, &o);
  const auto occ = [&](const std::string& id) -> const Occurrence& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw MissingKeyError("occurrence '" + id + "' not in corpus");
    return *it->second;
  };

  const auto split = kSplitNames.at(a.split);
  const auto scored = cdiff::score_pairs(pairs, space, g.threads);
  const auto eval = of_split(scored, split);
  if (eval.empty()) throw Error("no " + a.split + " pairs");

  std::optional<double> threshold = a.threshold;
  json report;
  std::vector<std::string> notes;
  if (!threshold) {
    const auto tune = of_split(scored, kSplitNames.at(a.tune_split));
    try {
      if (!tune.empty()) threshold = cdiff::tune_threshold(tune).value;
    } catch (const DomainError& e) {
      notes.push_back(std::string("threshold: ") + e.what());
    }
  }
  const auto dist = geometry::category_distributions(eval, a.bins, threshold);
  std::ostringstream csv;
  geometry::write_csv(csv, dist);
  write_text(a.csv, csv.str());
  if (!a.svg.empty()) {
    std::ostringstream svg;
    geometry::write_svg(svg, dist);
    write_text(a.svg, svg.str());
  }

  // Silhouette population: every occurrence that appears in a pair of the split.
  std::set<std::string> ids;
  for (const auto& p : eval) {
    ids.insert(p.pair.occ_a);
    ids.insert(p.pair.occ_b);
  }
  std::vector<std::vector<double>> points;
  std::vector<std::string> synsets;
  for (const auto& id : ids) {
    points.push_back(to_double(space.at(id)));
    synsets.push_back(occ(id).concept_id.value);
  }
  const auto safe = [&](const char* name, auto&& fn) -> json {
    try {
      return fn();
    } catch (const DomainError& e) {
      notes.push_back(std::string(name) + ": " + e.what());
      return nullptr;
    }
  };
  report["silhouette_synset"] = safe("silhouette_synset", [&] { return json(geometry::silhouette(points, synsets, g.threads)); });
  report["silhouette_population"] = points.size();

  if (!a.taxonomy.empty()) {
    const auto tax = Taxonomy::read(fs::path(a.taxonomy));
    std::vector<std::pair<ConceptId, Pos>> concepts;
    for (const auto& id : ids) concepts.emplace_back(occ(id).concept_id, occ(id).pos);
    const auto ub = geometry::unique_beginner_labels(tax, concepts);
    std::vector<std::vector<double>> ub_points;
    std::vector<std::string> ub_labels;
    std::size_t k = 0;
    for (const auto& id : ids) {
      const auto it = ub.labels.find(occ(id).concept_id);
      if (it != ub.labels.end()) {
        ub_points.push_back(points[k]);
        ub_labels.push_back(it->second.value);
      }
      ++k;
    }
    report["silhouette_ub"] = safe("silhouette_ub", [&] { return json(geometry::silhouette(ub_points, ub_labels, g.threads)); });
    report["silhouette_ub_population"] = ub_points.size();
    report["ub_skipped"] = ub.skipped.size();

    // Pairs whose concepts are outside the taxonomy or share no root carry no
    // Wu-Palmer score and are left out; the count is reported.
    std::vector<geometry::ConceptPair> cps;
    std::size_t excluded = 0;
    for (const auto& p : eval) {
      const auto& ca = occ(p.pair.occ_a).concept_id;
      const auto& cb = occ(p.pair.occ_b).concept_id;
      bool ok = tax.contains(ca) && tax.contains(cb);
      if (ok) {
        try {
          geometry::wup(tax, ca, cb);
        } catch (const DomainError&) {
          ok = false;
        }
      }
      if (!ok) {
        ++excluded;
        continue;
      }
      cps.push_back({to_double(space.at(p.pair.occ_a)), to_double(space.at(p.pair.occ_b)), ca, cb});
    }
    report["wup_spearman"] = safe("wup_spearman", [&] { return to_json(geometry::wup_correlation(cps, tax)); });
    report["wup_pairs"] = cps.size();
    report["wup_pairs_excluded"] = excluded;
  }

  json cats = json::object();
  for (const auto& d : dist.by_category)
    cats[std::string(spcd::to_string(d.category))] = {{"count", d.total}, {"mean_distance", opt(d.mean)}};
  report["manifest"] = manifest.to_json();
  report["split"] = a.split;
  report["threshold"] = opt(threshold);
  report["categories"] = cats;
  report["notes"] = notes;
  write_json(a.out, report);
  for (const auto& n : notes) log << "note: " << n << '\n';
  log << "geometry over " << eval.size() << " pairs and " << points.size() << " occurrences\n";
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::size_t draws = 100, d_in = 6, d_out = 8, batch = 4;
  double step = 1e-4, tolerance = 1e-4, margin = 0.7;
  std::uint64_t seed = 42;
  std::string loss = "distance", out;
};

bool gradcheck(const GradcheckArgs& a, const Globals& g, std::ostream& log) {
  if (a.draws == 0 || a.d_in == 0 || a.d_out == 0 || a.batch == 0) throw Error("sizes must be positive");
  Outputs outs(g.force);
  outs.claim(a.out);
  const auto reading = a.loss == "similarity" ? adapter::LossReading::similarity : adapter::LossReading::distance;
  auto gen = rng::substream(a.seed, "gradcheck");

  double worst = 0.0;
  std::size_t rejected = 0;
  for (std::size_t draw = 0; draw < a.draws; ++draw) {
    auto p = adapter::AdapterParams::identity(a.d_in, a.d_out);
    for (auto& w : p.weight) w += 0.5 * rng::normal(gen);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<adapter::PairExample> batch;
    while (labels.size() < a.batch) {
      std::vector<double> x(a.d_in), y(a.d_in);
      for (auto& v : x) v = rng::normal(gen);
      for (auto& v : y) v = rng::normal(gen);
      const int label = static_cast<int>(rng::uniform_index(gen, 2));
      const auto zx = adapter::adapt(x, p), zy = adapter::adapt(y, p);
      const double s = cosine_similarity(zx, zy);
      const double q = reading == adapter::LossReading::distance ? 1.0 - s : s;
      // Keep clear of the hinge kink for negatives.
      if (label == 0 && std::abs(q - a.margin) < 1e-2) {
        ++rejected;
        continue;
      }
      rows.push_back(std::move(x));
      rows.push_back(std::move(y));
      labels.push_back(label);
    }
    for (std::size_t k = 0; k < labels.size(); ++k) batch.push_back({rows[2 * k], rows[2 * k + 1], labels[k]});
    const auto r = adapter::gradient_check(p, batch, a.margin, a.step, reading);
    worst = std::max(worst, r.max_relative_error);
  }
  const bool ok = worst < a.tolerance;
  if (!a.out.empty()) {
    RunManifest manifest;
    manifest.command = "gradcheck";
    manifest.seed = a.seed;
    manifest.config = {{"draws", std::to_string(a.draws)}, {"d_in", std::to_string(a.d_in)},
                       {"d_out", std::to_string(a.d_out)}, {"batch", std::to_string(a.batch)},
                       {"step", fmt(a.step)},          {"margin", fmt(a.margin)},
                       {"loss", a.loss},               {"tolerance", fmt(a.tolerance)}};
    write_json(a.out, {{"manifest", manifest.to_json()},
                       {"max_relative_error", worst},
                       {"rejected_near_kink", rejected},
                       {"passed", ok}});
  }
  log << "max relative error " << worst << (ok ? " (ok)" : " (FAILED)") << '\n';
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept differentiation toolkit: pair building, adapter training, evaluation", "cale"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--threads", g.threads, "Worker threads for parallel scoring")
      ->envname("CALE_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  const auto split_check = CLI::IsMember({"train", "val", "test"});

  BuildPairsArgs bp;
  auto* c_bp = app.add_subcommand("build-pairs", "Build the SPCD pair dataset from an occurrence corpus");
  c_bp->add_option("--corpus", bp.corpus, "Occurrence JSONL")->required()->check(CLI::ExistingFile);
  c_bp->add_option("--out", bp.out, "Pairs TSV to write")->required();
  c_bp->add_option("--stats", bp.stats, "Stats JSON (default <out>.stats.json)");
  c_bp->add_option("--val-frac", bp.val_frac, "Held-out fraction for val")->capture_default_str();
  c_bp->add_option("--test-frac", bp.test_frac, "Held-out fraction for test")->capture_default_str();
  c_bp->add_option("--seed", bp.seed, "Seed")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-adapter", "Train the linear adapter on the train split");
  c_tr->add_option("--pairs", tr.pairs, "Pairs TSV")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--embeddings", tr.embeddings, "CALEEMB1 file")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--config", tr.config, "key=value config file")->check(CLI::ExistingFile);
  c_tr->add_option("--set", tr.settings, "Override one config key (key=value), repeatable");
  c_tr->add_option("--seed", tr.seed, "Seed (overrides the config)");
  c_tr->add_option("--out", tr.out, "CALEADP1 file to write")->required();
  c_tr->add_option("--trace", tr.trace, "Per-step loss trace CSV");
  c_tr->add_option("--report", tr.report, "Report JSON (default <out>.json)");

  auto* c_eval = app.add_subcommand("eval", "Evaluate an embedding space");
  c_eval->require_subcommand(1);

  CdiffArgs cd;
  auto* c_cd = c_eval->add_subcommand("cdiff", "Concept differentiation: threshold on cosine distance");
  c_cd->add_option("--pairs", cd.pairs, "Pairs TSV")->required()->check(CLI::ExistingFile);
  c_cd->add_option("--embeddings", cd.embeddings, "CALEEMB1 file")->required()->check(CLI::ExistingFile);
  c_cd->add_option("--adapter", cd.adapter, "CALEADP1 applied before scoring")->check(CLI::ExistingFile);
  c_cd->add_option("--tune-split", cd.tune_split, "Split used to tune the threshold")->check(split_check)->capture_default_str();
  c_cd->add_option("--eval-split", cd.eval_split, "Split to evaluate")->check(split_check)->capture_default_str();
  c_cd->add_option("--threshold", cd.threshold, "Fixed threshold instead of tuning");
  c_cd->add_option("--out", cd.out, "Report JSON")->required();
  c_cd->add_option("--scores", cd.scores, "Per-pair distance TSV");

  LscdArgs ls;
  auto* c_ls = c_eval->add_subcommand("lscd", "Lexical semantic change: APD and PRT against gold");
  c_ls->add_option("--gold", ls.gold, "word<TAB>gold_change TSV")->required()->check(CLI::ExistingFile);
  c_ls->add_option("--usages", ls.usages, "word<TAB>period<TAB>occ_id TSV")->required()->check(CLI::ExistingFile);
  c_ls->add_option("--embeddings", ls.embeddings, "CALEEMB1 file")->required()->check(CLI::ExistingFile);
  c_ls->add_option("--adapter", ls.adapter, "CALEADP1 applied first")->check(CLI::ExistingFile);
  c_ls->add_option("--out", ls.out, "Report JSON")->required();
  c_ls->add_option("--scores", ls.scores, "word<TAB>apd<TAB>prt TSV");

  CosimArgs cs;
  auto* c_cs = c_eval->add_subcommand("cosimlex", "In-context similarity, subtasks 1 and 2");
  c_cs->add_option("--entries", cs.entries, "Entry JSONL")->required()->check(CLI::ExistingFile);
  c_cs->add_option("--embeddings", cs.embeddings, "CALEEMB1 keyed <entry>:c<ctx>:<token>")->check(CLI::ExistingFile);
  c_cs->add_option("--adapter", cs.adapter, "CALEADP1 applied first")->check(CLI::ExistingFile);
  c_cs->add_option("--from-predictions", cs.from_predictions, "Reuse a predictions TSV")->check(CLI::ExistingFile);
  c_cs->add_option("--predictions", cs.predictions, "Predictions TSV to write");
  c_cs->add_option("--out", cs.out, "Report JSON")->required();

  GeometryArgs ge;
  auto* c_ge = c_eval->add_subcommand("geometry", "Distance distributions, silhouette and Wu-Palmer correlation");
  c_ge->add_option("--pairs", ge.pairs, "Pairs TSV")->required()->check(CLI::ExistingFile);
  c_ge->add_option("--embeddings", ge.embeddings, "CALEEMB1 file")->required()->check(CLI::ExistingFile);
  c_ge->add_option("--adapter", ge.adapter, "CALEADP1 applied first")->check(CLI::ExistingFile);
  c_ge->add_option("--corpus", ge.corpus, "Occurrence JSONL (concepts and POS)")->required()->check(CLI::ExistingFile);
  c_ge->add_option("--taxonomy", ge.taxonomy, "child<TAB>parent TSV")->check(CLI::ExistingFile);
  c_ge->add_option("--split", ge.split, "Split to analyse")->check(split_check)->capture_default_str();
  c_ge->add_option("--tune-split", ge.tune_split, "Split for the plotted threshold")->check(split_check)->capture_default_str();
  c_ge->add_option("--threshold", ge.threshold, "Fixed threshold to plot");
  c_ge->add_option("--bins", ge.bins, "Histogram bins over [0, 2]")->check(CLI::PositiveNumber)->capture_default_str();
  c_ge->add_option("--csv", ge.csv, "Histogram CSV")->required();
  c_ge->add_option("--svg", ge.svg, "Histogram SVG");
  c_ge->add_option("--out", ge.out, "Report JSON")->required();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference loss gradients");
  c_gc->add_option("--draws", gc.draws, "Random (W, batch) draws")->capture_default_str();
  c_gc->add_option("--d-in", gc.d_in, "Input dimension")->capture_default_str();
  c_gc->add_option("--d-out", gc.d_out, "Output dimension")->capture_default_str();
  c_gc->add_option("--batch", gc.batch, "Pairs per batch")->capture_default_str();
  c_gc->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
  c_gc->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
  c_gc->add_option("--margin", gc.margin, "Loss margin")->capture_default_str();
  c_gc->add_option("--loss", gc.loss, "distance or similarity")
      ->check(CLI::IsMember({"distance", "similarity"}))
      ->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Seed")->capture_default_str();
  c_gc->add_option("--out", gc.out, "Report JSON");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (c_bp->parsed()) build_pairs(bp, g, err);
    else if (c_tr->parsed()) train_adapter(tr, g, err);
    else if (c_cd->parsed()) eval_cdiff(cd, g, err);
    else if (c_ls->parsed()) eval_lscd(ls, g, err);
    else if (c_cs->parsed()) eval_cosimlex(cs, g, err);
    else if (c_ge->parsed()) eval_geometry(ge, g, err);
    else if (c_gc->parsed()) return gradcheck(gc, g, err) ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cale::cli
