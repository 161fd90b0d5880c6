#include "qbnet/lower.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace qbnet {

namespace {

// A Steiner cut of 26k edges guarantees k edge-disjoint Steiner trees in
// ordinary graphs; the ratio does not apply to genuine hypergraphs.
constexpr int kCutToTreeRatio = 26;

}  // namespace

GhzHypergraph::GhzHypergraph(std::vector<std::string> vertex_names)
    : vertex_names_(std::move(vertex_names)) {
  for (int i = 0; i < static_cast<int>(vertex_names_.size()); ++i)
    if (!index_.emplace(vertex_names_[static_cast<std::size_t>(i)], i).second)
      throw std::invalid_argument("duplicate vertex name in GHZ hypergraph");
}

int GhzHypergraph::vertex_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown vertex: " + name);
  return it->second;
}

int GhzHypergraph::add_edge(std::vector<int> members, std::string source_id) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (members.size() < 2)
    throw std::invalid_argument("GHZ hyperedge needs at least two members");
  for (int m : members)
    if (m < 0 || m >= num_vertices())
      throw std::invalid_argument("GHZ hyperedge member out of range");
  GhzEdge e;
  e.instance = next_instance_++;
  e.source_id = std::move(source_id);
  e.members = std::move(members);
  int id = e.instance;
  edges_.emplace(id, std::move(e));
  return id;
}

void GhzHypergraph::remove_edge(int instance) {
  if (edges_.erase(instance) == 0)
    throw std::invalid_argument("no such hyperedge instance");
}

const GhzEdge& GhzHypergraph::edge(int instance) const {
  auto it = edges_.find(instance);
  if (it == edges_.end()) throw std::invalid_argument("no such hyperedge instance");
  return it->second;
}

std::vector<int> GhzHypergraph::live_edges() const {
  std::vector<int> out;
  out.reserve(edges_.size());
  for (const auto& [id, e] : edges_) out.push_back(id);
  return out;
}

GhzHypergraph build_ghz_network(const BroadcastNetwork& net,
                                const std::map<std::string, int>& copies) {
  GhzHypergraph g(net.vertex_names());
  for (const auto& e : net.edges()) {
    auto it = copies.find(e.id);
    if (it == copies.end())
      throw std::invalid_argument("copies missing for edge " + e.id);
    if (it->second < 0)
      throw std::invalid_argument("copies must be >= 0 for edge " + e.id);
    for (int c = 0; c < it->second; ++c) g.add_edge(e.endpoints(), e.id);
  }
  return g;
}

std::map<std::string, int> default_copies(const BroadcastNetwork& net) {
  std::map<std::string, int> out;
  for (const auto& e : net.edges()) {
    if (!e.channel.is_isometric())
      throw std::invalid_argument(
          "edge " + e.id +
          " carries a noisy channel; per-use GHZ copies must be given explicitly");
    out[e.id] = static_cast<int>(std::floor(e.avg_uses));
  }
  return out;
}

MergeOutcome merge_rule(GhzHypergraph& g, int e1, int e2, int at) {
  if (e1 == e2) throw std::invalid_argument("merge needs two distinct edges");
  const GhzEdge& a = g.edge(e1);
  const GhzEdge& b = g.edge(e2);
  auto contains = [](const std::vector<int>& v, int x) {
    return std::binary_search(v.begin(), v.end(), x);
  };
  if (!contains(a.members, at) || !contains(b.members, at))
    throw std::invalid_argument("merge vertex is not shared by both edges");
  std::vector<int> merged;
  std::set_union(a.members.begin(), a.members.end(), b.members.begin(),
                 b.members.end(), std::back_inserter(merged));
  MergeOutcome out;
  out.overlap = static_cast<int>(a.members.size() + b.members.size() - merged.size());
  std::string src = a.source_id + "+" + b.source_id;
  g.remove_edge(e1);
  g.remove_edge(e2);
  out.instance = g.add_edge(std::move(merged), std::move(src));
  return out;
}

void reduce_rule(GhzHypergraph& g, int e, int v) {
  const GhzEdge& ed = g.edge(e);
  if (!std::binary_search(ed.members.begin(), ed.members.end(), v))
    throw std::invalid_argument("vertex is not a member of this edge");
  if (ed.members.size() < 3)
    throw std::invalid_argument("reducing below two members is not allowed");
  std::vector<int> members;
  for (int m : ed.members)
    if (m != v) members.push_back(m);
  std::string src = ed.source_id;
  g.remove_edge(e);
  g.add_edge(std::move(members), std::move(src));
}

namespace {

/// Connectivity of `terminals` inside the sub-hypergraph given by
/// `edge_subset` (instance ids).
bool connected_via(const GhzHypergraph& g, const std::vector<int>& terminals,
                   const std::vector<int>& edge_subset) {
  if (terminals.empty()) return true;
  std::set<int> frontier{terminals.front()};
  std::set<int> visited{terminals.front()};
  std::vector<bool> edge_used(edge_subset.size(), false);
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t k = 0; k < edge_subset.size(); ++k) {
      if (edge_used[k]) continue;
      const GhzEdge& e = g.edge(edge_subset[k]);
      bool touches = false;
      for (int m : e.members)
        if (visited.count(m)) {
          touches = true;
          break;
        }
      if (!touches) continue;
      edge_used[k] = true;
      for (int m : e.members)
        if (visited.insert(m).second) grew = true;
      grew = true;
    }
  }
  for (int t : terminals)
    if (!visited.count(t)) return false;
  return true;
}

}  // namespace

bool terminals_connected(const GhzHypergraph& g, const std::vector<int>& terminals) {
  return connected_via(g, terminals, g.live_edges());
}

namespace {

/// Unit-capacity max-flow network with hyperedge node splitting.
struct FlowNetwork {
  struct Arc {
    int to;
    int rev;
    int cap;
  };
  std::vector<std::vector<Arc>> adj;

  explicit FlowNetwork(int n) : adj(static_cast<std::size_t>(n)) {}

  void add_arc(int from, int to, int cap) {
    adj[static_cast<std::size_t>(from)].push_back(
        {to, static_cast<int>(adj[static_cast<std::size_t>(to)].size()), cap});
    adj[static_cast<std::size_t>(to)].push_back(
        {from, static_cast<int>(adj[static_cast<std::size_t>(from)].size()) - 1, 0});
  }

  /// One BFS round of the shortest augmenting path method; returns false
  /// when the sink is unreachable.
  bool augment(int s, int t) {
    std::vector<std::pair<int, int>> parent(adj.size(), {-1, -1});
    std::deque<int> q{s};
    parent[static_cast<std::size_t>(s)] = {s, -1};
    while (!q.empty() && parent[static_cast<std::size_t>(t)].first == -1) {
      int u = q.front();
      q.pop_front();
      for (int k = 0; k < static_cast<int>(adj[static_cast<std::size_t>(u)].size()); ++k) {
        const Arc& a = adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)];
        if (a.cap <= 0 || parent[static_cast<std::size_t>(a.to)].first != -1) continue;
        parent[static_cast<std::size_t>(a.to)] = {u, k};
        q.push_back(a.to);
      }
    }
    if (parent[static_cast<std::size_t>(t)].first == -1) return false;
    int v = t;
    while (v != s) {
      auto [u, k] = parent[static_cast<std::size_t>(v)];
      Arc& a = adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)];
      a.cap -= 1;
      adj[static_cast<std::size_t>(a.to)][static_cast<std::size_t>(a.rev)].cap += 1;
      v = u;
    }
    return true;
  }

  std::vector<bool> residual_reachable(int s) const {
    std::vector<bool> seen(adj.size(), false);
    std::deque<int> q{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (const Arc& a : adj[static_cast<std::size_t>(u)])
        if (a.cap > 0 && !seen[static_cast<std::size_t>(a.to)]) {
          seen[static_cast<std::size_t>(a.to)] = true;
          q.push_back(a.to);
        }
    }
    return seen;
  }
};

}  // namespace

int max_edge_disjoint_paths(const GhzHypergraph& g, int source, int sink,
                            std::vector<int>* min_cut_witness) {
  if (source == sink) throw std::invalid_argument("source equals sink");
  const std::vector<int> live = g.live_edges();
  const int nv = g.num_vertices();
  const int nodes = nv + 2 * static_cast<int>(live.size());
  const int inf = static_cast<int>(live.size()) + 1;
  FlowNetwork fn(nodes);
  // Vertices are uncapacitated; each hyperedge instance becomes an
  // in->out pair with capacity 1, attached to all of its members both ways.
  for (int k = 0; k < static_cast<int>(live.size()); ++k) {
    const GhzEdge& e = g.edge(live[static_cast<std::size_t>(k)]);
    const int in = nv + 2 * k;
    const int out = in + 1;
    fn.add_arc(in, out, 1);
    for (int m : e.members) {
      fn.add_arc(m, in, inf);
      fn.add_arc(out, m, inf);
    }
  }
  int flow = 0;
  while (fn.augment(source, sink)) ++flow;
  if (min_cut_witness) {
    min_cut_witness->clear();
    std::vector<bool> reach = fn.residual_reachable(source);
    for (int k = 0; k < static_cast<int>(live.size()); ++k) {
      const int in = nv + 2 * k;
      if (reach[static_cast<std::size_t>(in)] && !reach[static_cast<std::size_t>(in + 1)])
        min_cut_witness->push_back(live[static_cast<std::size_t>(k)]);
    }
  }
  return flow;
}

CutResult min_steiner_cut(const GhzHypergraph& g, const std::vector<int>& terminals) {
  if (terminals.size() < 2)
    throw std::invalid_argument("a Steiner cut needs at least two terminals");
  for (int t : terminals)
    if (t < 0 || t >= g.num_vertices())
      throw std::invalid_argument("terminal missing from the hypergraph");
  CutResult best;
  best.value = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < terminals.size(); ++i)
    for (std::size_t j = i + 1; j < terminals.size(); ++j) {
      std::vector<int> witness;
      int value = max_edge_disjoint_paths(g, terminals[i], terminals[j], &witness);
      if (value < best.value) {
        best.value = value;
        best.witness = std::move(witness);
        best.separated = {terminals[i], terminals[j]};
      }
    }
  return best;
}

PackMethod pack_method_from_string(const std::string& s) {
  if (s == "exact") return PackMethod::exact;
  if (s == "greedy") return PackMethod::greedy;
  throw std::invalid_argument("unknown packing method: " + s);
}

namespace {

SteinerTree make_tree(const GhzHypergraph& g, std::vector<int> edge_ids) {
  std::sort(edge_ids.begin(), edge_ids.end());
  SteinerTree t;
  std::set<int> verts;
  for (int id : edge_ids)
    for (int m : g.edge(id).members) verts.insert(m);
  t.edges = std::move(edge_ids);
  t.vertices.assign(verts.begin(), verts.end());
  return t;
}

/// Breadth-first growth from the first terminal over the allowed edges,
/// then a minimality prune in ascending instance order.
std::optional<std::vector<int>> extract_tree(const GhzHypergraph& g,
                                             const std::vector<int>& terminals,
                                             const std::vector<int>& allowed) {
  if (!connected_via(g, terminals, allowed)) return std::nullopt;
  std::set<int> reached{terminals.front()};
  std::set<int> missing(terminals.begin() + 1, terminals.end());
  std::vector<int> taken;
  std::vector<bool> used(allowed.size(), false);
  while (!missing.empty()) {
    bool grew = false;
    for (std::size_t k = 0; k < allowed.size() && !missing.empty(); ++k) {
      if (used[k]) continue;
      const GhzEdge& e = g.edge(allowed[k]);
      bool touches = false;
      for (int m : e.members)
        if (reached.count(m)) {
          touches = true;
          break;
        }
      if (!touches) continue;
      used[k] = true;
      taken.push_back(allowed[k]);
      grew = true;
      for (int m : e.members) {
        reached.insert(m);
        missing.erase(m);
      }
    }
    if (!grew) return std::nullopt;  // unreachable despite connectivity check
  }
  // Prune: drop any edge whose removal keeps the terminals connected.
  std::vector<int> tree = taken;
  for (int id : taken) {
    std::vector<int> without;
    for (int other : tree)
      if (other != id) without.push_back(other);
    if (connected_via(g, terminals, without)) tree = std::move(without);
  }
  return tree;
}

/// All minimal Steiner trees as bitmasks over `live` positions.
std::vector<unsigned> enumerate_minimal_trees(const GhzHypergraph& g,
                                              const std::vector<int>& terminals,
                                              const std::vector<int>& live) {
  const int m = static_cast<int>(live.size());
  auto subset_edges = [&](unsigned mask) {
    std::vector<int> out;
    for (int k = 0; k < m; ++k)
      if (mask & (1u << k)) out.push_back(live[static_cast<std::size_t>(k)]);
    return out;
  };
  std::vector<unsigned> trees;
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    auto edges = subset_edges(mask);
    if (!connected_via(g, terminals, edges)) continue;
    bool minimal = true;
    for (int k = 0; k < m && minimal; ++k) {
      if (!(mask & (1u << k))) continue;
      if (connected_via(g, terminals, subset_edges(mask & ~(1u << k))))
        minimal = false;
    }
    if (minimal) trees.push_back(mask);
  }
  return trees;
}

}  // namespace

PackingResult pack_steiner_trees(const GhzHypergraph& g,
                                 const std::vector<int>& terminals,
                                 PackMethod method) {
  if (terminals.size() < 2)
    throw std::invalid_argument("packing needs at least two terminals");
  PackingResult result;
  result.method = method == PackMethod::exact ? "exact" : "greedy";

  const std::vector<int> live = g.live_edges();
  bool ordinary_graph = !live.empty();
  for (int id : live)
    if (g.edge(id).members.size() != 2) ordinary_graph = false;

  if (terminals_connected(g, terminals)) {
    result.cut_upper_bound = min_steiner_cut(g, terminals).value;
  } else {
    result.cut_upper_bound = 0;
  }
  if (ordinary_graph)
    result.graph_certified_floor = result.cut_upper_bound / kCutToTreeRatio;

  if (method == PackMethod::greedy) {
    std::vector<int> remaining = live;
    while (connected_via(g, terminals, remaining)) {
      auto tree = extract_tree(g, terminals, remaining);
      if (!tree) break;
      result.trees.push_back(make_tree(g, *tree));
      std::vector<int> next;
      for (int id : remaining)
        if (!std::binary_search(result.trees.back().edges.begin(),
                                result.trees.back().edges.end(), id))
          next.push_back(id);
      remaining = std::move(next);
    }
    result.count = static_cast<int>(result.trees.size());
    return result;
  }

  const int m = static_cast<int>(live.size());
  if (m > 12)
    throw std::invalid_argument(
        "exact packing is limited to 12 hyperedge instances; use greedy");
  std::vector<unsigned> trees = enumerate_minimal_trees(g, terminals, live);

  // Memoized best packing over the available-edge mask, with the chosen
  // tree recorded for reconstruction.
  std::unordered_map<unsigned, std::pair<int, int>> memo;  // mask -> (count, tree idx or -1)
  std::function<int(unsigned)> best = [&](unsigned avail) -> int {
    auto it = memo.find(avail);
    if (it != memo.end()) return it->second.first;
    int best_count = 0;
    int best_tree = -1;
    for (int ti = 0; ti < static_cast<int>(trees.size()); ++ti) {
      unsigned t = trees[static_cast<std::size_t>(ti)];
      if ((t & avail) != t) continue;
      int count = 1 + best(avail & ~t);
      if (count > best_count) {
        best_count = count;
        best_tree = ti;
      }
    }
    memo.emplace(avail, std::make_pair(best_count, best_tree));
    return best_count;
  };
  const unsigned full = (1u << m) - 1u;
  result.count = best(full);
  unsigned avail = full;
  while (true) {
    auto [count, tree_idx] = memo.at(avail);
    if (tree_idx < 0) break;
    unsigned t = trees[static_cast<std::size_t>(tree_idx)];
    std::vector<int> ids;
    for (int k = 0; k < m; ++k)
      if (t & (1u << k)) ids.push_back(live[static_cast<std::size_t>(k)]);
    result.trees.push_back(make_tree(g, ids));
    avail &= ~t;
  }
  return result;
}

int brute_force_packing(const GhzHypergraph& g, const std::vector<int>& terminals,
                        int limit) {
  const std::vector<int> live = g.live_edges();
  const int m = static_cast<int>(live.size());
  if (m > limit)
    throw std::invalid_argument("instance too large for the brute-force oracle");
  if (terminals.size() < 2)
    throw std::invalid_argument("packing needs at least two terminals");

  // Own connectivity check over bitmasks, memoized.
  std::unordered_map<unsigned, bool> conn_memo;
  std::function<bool(unsigned)> connected = [&](unsigned mask) -> bool {
    auto it = conn_memo.find(mask);
    if (it != conn_memo.end()) return it->second;
    std::set<int> visited{terminals.front()};
    bool grew = true;
    unsigned unused = mask;
    while (grew) {
      grew = false;
      for (int k = 0; k < m; ++k) {
        if (!(unused & (1u << k))) continue;
        const GhzEdge& e = g.edge(live[static_cast<std::size_t>(k)]);
        bool touches = false;
        for (int v : e.members)
          if (visited.count(v)) {
            touches = true;
            break;
          }
        if (!touches) continue;
        unused &= ~(1u << k);
        for (int v : e.members) visited.insert(v);
        grew = true;
      }
    }
    bool ok = true;
    for (int t : terminals)
      if (!visited.count(t)) ok = false;
    conn_memo.emplace(mask, ok);
    return ok;
  };

  std::unordered_map<unsigned, int> memo;
  // Branch on the lowest remaining edge: either no tree uses it, or some
  // minimal connected subset containing it forms the next tree.
  std::function<int(unsigned)> rec = [&](unsigned remaining) -> int {
    if (!connected(remaining)) return 0;
    auto it = memo.find(remaining);
    if (it != memo.end()) return it->second;
    int lowest = -1;
    for (int k = 0; k < m; ++k)
      if (remaining & (1u << k)) {
        lowest = k;
        break;
      }
    int best = rec(remaining & ~(1u << lowest));
    // Enumerate submasks of `remaining` containing the lowest edge.
    unsigned rest = remaining & ~(1u << lowest);
    for (unsigned sub = rest;; sub = (sub - 1) & rest) {
      unsigned candidate = sub | (1u << lowest);
      if (connected(candidate)) {
        bool minimal = true;
        for (int k = 0; k < m && minimal; ++k)
          if (candidate & (1u << k))
            if (connected(candidate & ~(1u << k))) minimal = false;
        if (minimal) best = std::max(best, 1 + rec(remaining & ~candidate));
      }
      if (sub == 0) break;
    }
    memo.emplace(remaining, best);
    return best;
  };
  unsigned full = m == 0 ? 0u : ((1u << m) - 1u);
  if (m == 0) return 0;
  return rec(full);
}

AggregatedRate aggregated_rate(const BroadcastNetwork& net, const ClientFamily& family,
                               const std::map<std::string, int>& copies,
                               std::optional<PackMethod> method) {
  AggregatedRate out;
  out.ghz = build_ghz_network(net, copies);
  PackMethod chosen = method.value_or(
      out.ghz.num_live_edges() <= 12 ? PackMethod::exact : PackMethod::greedy);
  out.packing = pack_steiner_trees(out.ghz, family.members, chosen);
  out.achievable_ghz = out.packing.count;
  return out;
}

}  // namespace qbnet
