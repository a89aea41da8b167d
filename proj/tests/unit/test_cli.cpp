#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "cale/adapter.hpp"
#include "cale/corpus.hpp"
#include "cale/embedding.hpp"
#include "cale/rng.hpp"

using namespace cale;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = CALE_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    auto g = rng::substream(static_cast<std::uint64_t>(std::time(nullptr)), "tmp");
    path = fs::temp_directory_path() / ("cale_cli_" + std::to_string(g()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cale::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const std::string& p) { return json::parse(slurp(p)); }

// One-hot vector per concept, so same-concept pairs sit at distance 0.
void write_concept_embeddings(const std::string& path) {
  const auto occs = corpus::parse_corpus(kData / "corpus_small.jsonl");
  std::map<ConceptId, std::size_t> axis;
  for (const auto& o : occs) axis.emplace(o.concept_id, axis.size());
  EmbeddingMatrix m(axis.size());
  for (const auto& o : occs) {
    std::vector<double> v(axis.size(), 0.0);
    v[axis.at(o.concept_id)] = 1.0;
    m.add(o.id, std::span<const double>(v));
  }
  embedding::write_embeddings(fs::path(path), m);
}

std::vector<std::string> build_args(const TempDir& t) {
  return {"build-pairs", "--corpus", (kData / "corpus_small.jsonl").string(), "--out", t / "pairs.tsv",
          "--val-frac", "0.34", "--test-frac", "0.34", "--seed", "42"};
}

}  // namespace

TEST_CASE("build-pairs matches the golden file and reruns byte-identically") {
  TempDir t;
  const auto r = invoke(build_args(t));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto first = slurp(t / "pairs.tsv");
  CHECK(first == slurp(kData / "pairs_small.golden.tsv"));

  const auto stats = read_json(t / "pairs.tsv.stats.json");
  CHECK(stats["manifest"]["command"] == "build-pairs");
  CHECK(stats["manifest"]["inputs"]["corpus"]["sha256"].get<std::string>().size() == 64);
  CHECK(stats["occurrences"]["kept"] == 30);

  // refuses to overwrite, then overwrites with --force
  CHECK(invoke(build_args(t)).code == 1);
  auto forced = build_args(t);
  forced.insert(forced.begin(), "--force");
  REQUIRE(invoke(forced).code == 0);
  CHECK(slurp(t / "pairs.tsv") == first);
}

TEST_CASE("build-pairs rejects bad fractions and bad usage") {
  TempDir t;
  auto args = build_args(t);
  args[6] = "0.5";
  args[8] = "0.6";
  CHECK(invoke(args).code == 1);
  CHECK(!fs::exists(t / "pairs.tsv"));
  CHECK(invoke({"build-pairs", "--out", t / "x.tsv"}).code == 2);
  CHECK(invoke({"no-such-command"}).code == 2);
}

TEST_CASE("train-adapter with zero learning rate writes the identity") {
  TempDir t;
  REQUIRE(invoke(build_args(t)).code == 0);
  write_concept_embeddings(t / "emb.bin");
  const auto r = invoke({"train-adapter", "--pairs", t / "pairs.tsv", "--embeddings", t / "emb.bin", "--set",
                      "learning_rate=0", "--set", "d_out=6", "--out", t / "adp.bin", "--trace", t / "trace.csv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto p = adapter::read_adapter(fs::path(t / "adp.bin"));
  CHECK(p == adapter::AdapterParams::identity(4, 6));
  const auto rep = read_json(t / "adp.bin.json");
  CHECK(rep["manifest"]["config"]["learning_rate"] == "0");
  CHECK(rep["d_out"] == 6);
  CHECK(rep["mean_loss_before"] == rep["mean_loss_after"]);

  CHECK(invoke({"train-adapter", "--pairs", t / "pairs.tsv", "--embeddings", t / "emb.bin", "--set", "bogus=1",
             "--out", t / "adp2.bin"})
            .code == 1);
}

TEST_CASE("corrupt embeddings fail cleanly") {
  TempDir t;
  REQUIRE(invoke(build_args(t)).code == 0);
  write_concept_embeddings(t / "emb.bin");
  auto bytes = slurp(t / "emb.bin");
  bytes.resize(bytes.size() / 2);
  std::ofstream(t / "bad.bin", std::ios::binary) << bytes;
  const auto r = invoke({"eval", "cdiff", "--pairs", t / "pairs.tsv", "--embeddings", t / "bad.bin", "--threshold",
                      "0.5", "--out", t / "cd.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(!fs::exists(t / "cd.json"));
}

TEST_CASE("eval cdiff on concept-perfect embeddings") {
  TempDir t;
  REQUIRE(invoke(build_args(t)).code == 0);
  write_concept_embeddings(t / "emb.bin");
  const auto r = invoke({"eval", "cdiff", "--pairs", t / "pairs.tsv", "--embeddings", t / "emb.bin", "--eval-split",
                      "val", "--threshold", "0.5", "--out", t / "cd.json", "--scores", t / "scores.tsv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rep = read_json(t / "cd.json");
  CHECK(rep["model"]["all"]["accuracy"] == 1.0);
  CHECK(rep["model"]["all"]["balanced_accuracy"] == 1.0);
  CHECK(rep["baseline_1l1c"]["same_lemma"]["balanced_accuracy"] == 0.5);
  CHECK(rep["manifest"]["command"] == "eval cdiff");
  CHECK(fs::file_size(t / "scores.tsv") > 0);
}

TEST_CASE("eval lscd refuses a correlation over two targets") {
  TempDir t;
  write_concept_embeddings(t / "emb.bin");
  const auto r = invoke({"eval", "lscd", "--gold", (kData / "lscd_gold.tsv").string(), "--usages",
                      (kData / "lscd_usages.tsv").string(), "--embeddings", t / "emb.bin", "--out", t / "l.json",
                      "--scores", t / "l.tsv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rep = read_json(t / "l.json");
  CHECK(rep["targets"] == 2);
  CHECK(rep["spearman"]["apd"].is_null());
  CHECK(!rep["notes"].empty());
  // bank moves fully between senses, shore does not move
  CHECK(slurp(t / "l.tsv") == "bank\t1\t1\nshore\t0\t0\n");
}

TEST_CASE("eval geometry writes four histograms") {
  TempDir t;
  REQUIRE(invoke(build_args(t)).code == 0);
  write_concept_embeddings(t / "emb.bin");
  const auto r = invoke({"eval", "geometry", "--pairs", t / "pairs.tsv", "--embeddings", t / "emb.bin", "--corpus",
                      (kData / "corpus_small.jsonl").string(), "--taxonomy", (kData / "taxonomy_small.tsv").string(),
                      "--split", "test", "--threshold", "0.5", "--csv", t / "h.csv", "--svg", t / "h.svg", "--out",
                      t / "g.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream csv(slurp(t / "h.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1 + 4 * 50);
  const auto rep = read_json(t / "g.json");
  CHECK(rep["manifest"]["command"] == "eval geometry");
  CHECK(rep["silhouette_synset"].is_number());
  CHECK(rep["silhouette_synset"] == 1.0);
  // lender.n.02 and shore.n.03 share no root
  CHECK(rep["wup_pairs_excluded"].get<int>() > 0);
}

TEST_CASE("eval cosimlex from embeddings and from saved predictions") {
  TempDir t;
  // Context vectors are chosen so the predicted similarity is gold / 10.
  const std::vector<std::pair<double, double>> gold{{2.0, 5.0}, {6.0, 1.0}, {3.0, 3.5}, {8.0, 4.0}};
  std::ofstream entries(t / "entries.jsonl");
  EmbeddingMatrix m(2);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto id = "e" + std::to_string(i);
    json e = {{"id", id},
              {"word1", "cat"},
              {"word2", "dog"},
              {"context1", {{"tokens", {"the", "cat", "saw", "a", "dog"}}, {"pos1", 1}, {"pos2", 4}}},
              {"context2", {{"tokens", {"a", "dog", "and", "a", "cat"}}, {"pos1", 4}, {"pos2", 1}}},
              {"gold_sim_c1", gold[i].first},
              {"gold_sim_c2", gold[i].second}};
    entries << e.dump() << '\n';
    const auto add = [&](int ctx, int p1, int p2, double sim) {
      const auto key = [&](int pos) { return id + ":c" + std::to_string(ctx) + ":" + std::to_string(pos); };
      m.add(key(p1), std::vector<double>{1.0, 0.0});
      m.add(key(p2), std::vector<double>{sim, std::sqrt(1 - sim * sim)});
    };
    add(1, 1, 4, gold[i].first / 10);
    add(2, 4, 1, gold[i].second / 10);
  }
  entries.close();
  embedding::write_embeddings(fs::path(t / "emb.bin"), m);

  auto r = invoke({"eval", "cosimlex", "--entries", t / "entries.jsonl", "--embeddings", t / "emb.bin",
                   "--predictions", t / "pred.tsv", "--out", t / "c.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rep = read_json(t / "c.json");
  CHECK(rep["subtask1_pearson"]["coefficient"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep["subtask2_spearman"]["coefficient"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep["subtask2_spearman"]["n"] == 8);

  r = invoke({"eval", "cosimlex", "--entries", t / "entries.jsonl", "--from-predictions", t / "pred.tsv", "--out",
              t / "c2.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rep2 = read_json(t / "c2.json");
  CHECK(rep2["subtask1_pearson"] == rep["subtask1_pearson"]);
  CHECK(rep2["subtask2_spearman"] == rep["subtask2_spearman"]);

  CHECK(invoke({"eval", "cosimlex", "--entries", t / "entries.jsonl", "--out", t / "c3.json"}).code == 1);
}

TEST_CASE("gradcheck passes") {
  TempDir t;
  const auto r = invoke({"gradcheck", "--draws", "10", "--out", t / "gc.json"});
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(t / "gc.json")["passed"] == true);
}
