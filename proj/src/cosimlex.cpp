#include "cale/cosimlex.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>

#include <json.hpp>

#include "cale/embedding.hpp"
#include "cale/error.hpp"

namespace cale::cosimlex {

double predict_sim(const Context& ctx, const Encoder& encoder) {
  if (ctx.pos1 >= ctx.tokens.size() || ctx.pos2 >= ctx.tokens.size())
    throw DomainError("target position outside the context");
  const auto v1 = encoder(mark_target(ctx.tokens, ctx.pos1));
  const auto v2 = encoder(mark_target(ctx.tokens, ctx.pos2));
  return cosine_similarity(v1, v2);
}

namespace {

void check_sizes(const std::vector<Entry>& entries, const std::vector<Prediction>& predictions) {
  if (entries.size() != predictions.size())
    throw DomainError(std::to_string(predictions.size()) + " predictions for " + std::to_string(entries.size()) +
                      " entries");
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Context parse_context(const nlohmann::json& j, const Entry& e, const std::string& source, std::size_t line,
                      const char* name) {
  if (!j.is_object()) throw ParseError(source, line, std::string(name) + " must be an object");
  Context c;
  try {
    c.tokens = j.at("tokens").get<std::vector<std::string>>();
    c.pos1 = j.at("pos1").get<std::size_t>();
    c.pos2 = j.at("pos2").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(source, line, std::string(name) + ": " + ex.what());
  }
  if (c.pos1 >= c.tokens.size() || c.pos2 >= c.tokens.size())
    throw ParseError(source, line, std::string(name) + ": target position out of range");
  if (c.pos1 == c.pos2) throw ParseError(source, line, std::string(name) + ": both targets at one position");
  if (lower(c.tokens[c.pos1]) != lower(e.word1) || lower(c.tokens[c.pos2]) != lower(e.word2))
    throw ParseError(source, line, std::string(name) + ": words not found at their positions");
  return c;
}

}  // namespace

stats::CorrelationResult subtask1(const std::vector<Entry>& entries, const std::vector<Prediction>& predictions) {
  check_sizes(entries, predictions);
  std::vector<double> gold, pred;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    gold.push_back(entries[i].gold_sim_c2 - entries[i].gold_sim_c1);
    pred.push_back(predictions[i].c2 - predictions[i].c1);
  }
  return stats::pearson(pred, gold);
}

stats::CorrelationResult subtask2(const std::vector<Entry>& entries, const std::vector<Prediction>& predictions) {
  check_sizes(entries, predictions);
  std::vector<double> gold, pred;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    gold.push_back(entries[i].gold_sim_c1);
    gold.push_back(entries[i].gold_sim_c2);
    pred.push_back(predictions[i].c1);
    pred.push_back(predictions[i].c2);
  }
  return stats::spearman(pred, gold);
}

std::vector<Entry> read_entries(std::istream& in, const std::string& source) {
  std::vector<Entry> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw ParseError(source, line, ex.what());
    }
    if (!j.is_object()) throw ParseError(source, line, "expected a JSON object");
    Entry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.word1 = j.at("word1").get<std::string>();
      e.word2 = j.at("word2").get<std::string>();
      e.gold_sim_c1 = j.at("gold_sim_c1").get<double>();
      e.gold_sim_c2 = j.at("gold_sim_c2").get<double>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(source, line, ex.what());
    }
    if (e.id.empty()) throw ParseError(source, line, "empty entry id");
    if (!std::isfinite(e.gold_sim_c1) || !std::isfinite(e.gold_sim_c2))
      throw ParseError(source, line, "non-finite gold similarity");
    if (!j.contains("context1") || !j.contains("context2")) throw ParseError(source, line, "missing context");
    e.context1 = parse_context(j["context1"], e, source, line, "context1");
    e.context2 = parse_context(j["context2"], e, source, line, "context2");
    if (!ids.insert(e.id).second) throw ParseError(source, line, "duplicate entry id '" + e.id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Entry> read_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CoSimLex file " + path.string());
  return read_entries(in, path.string());
}

void write_predictions(std::ostream& out, const std::vector<Entry>& entries,
                       const std::vector<Prediction>& predictions) {
  check_sizes(entries, predictions);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << entries[i].id << "\t1\t" << predictions[i].c1 << '\n';
    out << entries[i].id << "\t2\t" << predictions[i].c2 << '\n';
  }
}

std::vector<Prediction> read_predictions(std::istream& in, const std::vector<Entry>& entries,
                                         const std::string& source) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < entries.size(); ++i) index.emplace(entries[i].id, i);
  std::vector<std::optional<double>> c1(entries.size()), c2(entries.size());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto t1 = text.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : text.find('\t', t1 + 1);
    if (t2 == std::string::npos || text.find('\t', t2 + 1) != std::string::npos)
      throw ParseError(source, line, "expected entry_id<TAB>context<TAB>pred_sim");
    const auto id = text.substr(0, t1), ctx = text.substr(t1 + 1, t2 - t1 - 1), val = text.substr(t2 + 1);
    const auto it = index.find(id);
    if (it == index.end()) throw ParseError(source, line, "unknown entry '" + id + "'");
    if (ctx != "1" && ctx != "2") throw ParseError(source, line, "context must be 1 or 2");
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size() || !std::isfinite(v)) throw ParseError(source, line, "bad similarity");
    auto& slot = (ctx == "1" ? c1 : c2)[it->second];
    if (slot) throw ParseError(source, line, "duplicate prediction for '" + id + "'");
    slot = v;
  }
  std::vector<Prediction> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!c1[i] || !c2[i]) throw Error(source + ": missing prediction for entry '" + entries[i].id + "'");
    out[i] = {*c1[i], *c2[i]};
  }
  return out;
}

}  // namespace cale::cosimlex
