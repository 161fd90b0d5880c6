#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbnet/netmodel.hpp"

namespace qbnet {

struct GhzEdge {
  int instance = -1;        // unique within the hypergraph
  std::string source_id;    // originating channel edge, if any
  std::vector<int> members; // sorted vertex indices, size >= 2
};

/// Undirected multi-hypergraph of distributed GHZ states. Parallel copies
/// are distinct instances; merge/reduce mutate the live edge set.
class GhzHypergraph {
 public:
  GhzHypergraph() = default;
  explicit GhzHypergraph(std::vector<std::string> vertex_names);

  int num_vertices() const { return static_cast<int>(vertex_names_.size()); }
  const std::string& vertex_name(int v) const { return vertex_names_.at(static_cast<std::size_t>(v)); }
  int vertex_index(const std::string& name) const;

  /// Adds one hyperedge instance; members need not be presorted.
  int add_edge(std::vector<int> members, std::string source_id = "");
  void remove_edge(int instance);
  bool has_edge(int instance) const { return edges_.count(instance) > 0; }
  const GhzEdge& edge(int instance) const;
  std::vector<int> live_edges() const;
  int num_live_edges() const { return static_cast<int>(edges_.size()); }

 private:
  std::vector<std::string> vertex_names_;
  std::map<std::string, int> index_;
  std::map<int, GhzEdge> edges_;
  int next_instance_ = 0;
};

/// One undirected hyperedge over {tail} + heads per copy of each channel.
GhzHypergraph build_ghz_network(const BroadcastNetwork& net,
                                const std::map<std::string, int>& copies);

/// floor(avg_uses) per edge; refuses noisy channels, whose per-use GHZ
/// yield is not a graph-level quantity.
std::map<std::string, int> default_copies(const BroadcastNetwork& net);

struct MergeOutcome {
  int instance = -1;  // the merged hyperedge
  int overlap = 0;    // shared vertices; > 1 is legal but wasteful
};

/// Connects two GHZ edges at a shared vertex into one over the member
/// union (parties counted once).
MergeOutcome merge_rule(GhzHypergraph& g, int e1, int e2, int at);

/// Drops vertex v from edge e; throws when fewer than two members would
/// remain.
void reduce_rule(GhzHypergraph& g, int e, int v);

bool terminals_connected(const GhzHypergraph& g, const std::vector<int>& terminals);

struct CutResult {
  int value = 0;
  std::vector<int> witness;            // hyperedge instances
  std::pair<int, int> separated{-1, -1};  // terminal pair realizing the cut
};

/// Smallest set of hyperedge instances whose removal disconnects some
/// terminal pair. Per pair this is a unit-capacity max-flow on the
/// node-split hypergraph (each instance becomes in->out with capacity 1).
CutResult min_steiner_cut(const GhzHypergraph& g, const std::vector<int>& terminals);

/// Max-flow between two vertices = number of edge-disjoint hyperpaths.
int max_edge_disjoint_paths(const GhzHypergraph& g, int source, int sink,
                            std::vector<int>* min_cut_witness = nullptr);

struct SteinerTree {
  std::vector<int> edges;     // instance ids, ascending
  std::vector<int> vertices;  // touched vertices, sorted
};

enum class PackMethod { exact, greedy };
PackMethod pack_method_from_string(const std::string& s);

struct PackingResult {
  std::vector<SteinerTree> trees;  // pairwise instance-disjoint
  int count = 0;
  int cut_upper_bound = 0;
  /// Certified floor from the minimum Steiner cut, ordinary graphs only:
  /// a cut of 26k edges guarantees k disjoint Steiner trees.
  std::optional<int> graph_certified_floor;
  std::string method;
};

/// Edge-disjoint Steiner trees spanning the terminals. `exact` is an
/// exhaustive optimum limited to 12 hyperedge instances; `greedy`
/// repeatedly extracts a minimal tree by breadth-first growth.
PackingResult pack_steiner_trees(const GhzHypergraph& g,
                                 const std::vector<int>& terminals,
                                 PackMethod method);

/// Independent exhaustive oracle for the packing number (test reference).
int brute_force_packing(const GhzHypergraph& g, const std::vector<int>& terminals,
                        int limit = 12);

struct AggregatedRate {
  GhzHypergraph ghz;
  PackingResult packing;
  int achievable_ghz = 0;  // qubit GHZ states among the family per round
};

/// The aggregated repeater pipeline: distribute `copies` GHZ states per
/// channel, then pack Steiner trees over the resulting hypergraph.
AggregatedRate aggregated_rate(const BroadcastNetwork& net, const ClientFamily& family,
                               const std::map<std::string, int>& copies,
                               std::optional<PackMethod> method = std::nullopt);

}  // namespace qbnet
