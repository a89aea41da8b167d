#include <deque>
#include <fstream>
#include <sstream>

#include "cale/corpus.hpp"
#include "cale/error.hpp"

namespace cale {

Taxonomy Taxonomy::from_edges(const std::vector<std::pair<ConceptId, ConceptId>>& edges) {
  Taxonomy t;
  std::map<ConceptId, std::set<ConceptId>> children;
  for (const auto& [child, parent] : edges) {
    if (child.value.empty() || parent.value.empty()) throw Error("taxonomy edge with empty concept id");
    if (child == parent) throw Error("taxonomy self-loop on '" + child.value + "'");
    t.nodes_.insert(child);
    t.nodes_.insert(parent);
    t.parents_[child].insert(parent);
    children[parent].insert(child);
  }
  for (const auto& n : t.nodes_)
    if (!t.parents_.count(n)) t.roots_.insert(n);

  // Kahn's algorithm from the roots downward doubles as the cycle check and
  // the shortest-depth computation: a node is dequeued only after all of its
  // parents, so its depth is final by then.
  std::map<ConceptId, std::size_t> pending;
  for (const auto& [child, ps] : t.parents_) pending[child] = ps.size();
  std::deque<ConceptId> queue(t.roots_.begin(), t.roots_.end());
  for (const auto& r : t.roots_) t.depth_[r] = 1;
  std::size_t visited = 0;
  while (!queue.empty()) {
    const ConceptId node = queue.front();
    queue.pop_front();
    ++visited;
    const auto it = children.find(node);
    if (it == children.end()) continue;
    for (const auto& ch : it->second) {
      const auto d = t.depth_[node] + 1;
      auto [pos, inserted] = t.depth_.try_emplace(ch, d);
      if (!inserted && d < pos->second) pos->second = d;
      if (--pending[ch] == 0) queue.push_back(ch);
    }
  }
  if (visited != t.nodes_.size()) throw Error("taxonomy contains a cycle");

  return t;
}

Taxonomy Taxonomy::read(std::istream& in, const std::string& source) {
  std::vector<std::pair<ConceptId, ConceptId>> edges;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    if (tab == std::string::npos || text.find('\t', tab + 1) != std::string::npos)
      throw ParseError(source, line, "expected child<TAB>parent");
    edges.emplace_back(ConceptId(text.substr(0, tab)), ConceptId(text.substr(tab + 1)));
  }
  return from_edges(edges);
}

Taxonomy Taxonomy::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open taxonomy file " + path.string());
  return read(in, path.string());
}

const std::set<ConceptId>& Taxonomy::parents(const ConceptId& c) const {
  static const std::set<ConceptId> none;
  if (!contains(c)) throw MissingKeyError("concept '" + c.value + "' not in taxonomy");
  const auto it = parents_.find(c);
  return it == parents_.end() ? none : it->second;
}

std::size_t Taxonomy::depth(const ConceptId& c) const {
  const auto it = depth_.find(c);
  if (it == depth_.end()) throw MissingKeyError("concept '" + c.value + "' not in taxonomy");
  return it->second;
}

std::map<ConceptId, std::size_t> Taxonomy::ancestors(const ConceptId& c) const {
  if (!contains(c)) throw MissingKeyError("concept '" + c.value + "' not in taxonomy");
  std::map<ConceptId, std::size_t> dist{{c, 0}};
  std::deque<ConceptId> queue{c};
  while (!queue.empty()) {
    const ConceptId node = queue.front();
    queue.pop_front();
    const auto it = parents_.find(node);
    if (it == parents_.end()) continue;
    for (const auto& p : it->second) {
      if (dist.try_emplace(p, dist[node] + 1).second) queue.push_back(p);
    }
  }
  return dist;
}

}  // namespace cale
