#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbnet/channel.hpp"

namespace qbnet {

/// One directed broadcast hyperedge: a single sender vertex (tail) and a
/// non-empty set of receiver vertices (heads). A head colocated with the
/// sender is modeled as a separate vertex in the sender's partition class,
/// never as tail == head.
struct Hyperedge {
  std::string id;
  int tail = -1;
  std::vector<int> heads;  // sorted vertex indices, tail excluded
  ChannelSpec channel;
  double avg_uses = 1.0;

  /// Endpoint list in canonical order: tail first, then sorted heads.
  std::vector<int> endpoints() const;
};

struct ClientFamily {
  std::string id;
  std::vector<int> members;  // sorted vertex indices, non-empty
};

/// Division of all vertices into non-empty classes. Stored as a restricted
/// growth string over the network's vertex order, so equal partitions have
/// equal representations.
class Partition {
 public:
  Partition() = default;
  /// Accepts any labeling (classes need not be canonical); relabels to
  /// first-occurrence order.
  explicit Partition(std::vector<int> labels);

  static Partition single_class(int n);
  static Partition discrete(int n);

  int size() const { return static_cast<int>(class_of_.size()); }
  int num_classes() const { return num_classes_; }
  int class_of(int v) const { return class_of_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& labels() const { return class_of_; }

  /// Every class of `this` is contained in a class of `coarser`.
  bool refines(const Partition& coarser) const;

  bool operator==(const Partition& o) const { return class_of_ == o.class_of_; }
  bool operator<(const Partition& o) const { return class_of_ < o.class_of_; }

 private:
  std::vector<int> class_of_;
  int num_classes_ = 0;
};

/// The broadcast network: vertices, directed hyperedges with channel
/// descriptors and average use counts, and the client families that name
/// the multipartite targets. Immutable after construction.
class BroadcastNetwork {
 public:
  BroadcastNetwork(std::vector<std::string> vertices,
                   std::vector<Hyperedge> edges,
                   std::vector<ClientFamily> families);

  static BroadcastNetwork from_json(const nlohmann::json& doc);
  static BroadcastNetwork load_file(const std::string& path);
  nlohmann::json to_json() const;

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  const std::vector<std::string>& vertex_names() const { return vertices_; }
  const std::string& vertex_name(int v) const { return vertices_.at(static_cast<std::size_t>(v)); }
  int vertex_index(const std::string& name) const;  // throws on unknown name

  const std::vector<Hyperedge>& edges() const { return edges_; }
  const Hyperedge& edge(int e) const { return edges_.at(static_cast<std::size_t>(e)); }
  int edge_index(const std::string& id) const;

  const std::vector<ClientFamily>& families() const { return families_; }
  const ClientFamily& family(const std::string& id) const;

  /// Non-fatal validation notes (e.g. single-member families).
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Parse "A,B|C|D" into a partition of this network's vertices.
  Partition parse_partition(const std::string& spec) const;
  /// Render a partition as sorted vertex-name classes.
  std::vector<std::vector<std::string>> partition_classes(const Partition& p) const;

 private:
  std::vector<std::string> vertices_;
  std::map<std::string, int> index_;
  std::vector<Hyperedge> edges_;
  std::vector<ClientFamily> families_;
  std::vector<std::string> warnings_;
};

/// Edges not local to a class of `p`: at least two distinct classes among
/// {tail} + heads. Returned as edge indices in network order.
std::vector<int> crossing_edges(const BroadcastNetwork& net, const Partition& p);

/// Number of classes of `p` that intersect the family; 0 when fewer than
/// two classes do. This is the coefficient the family's rate picks up in a
/// partition bound.
int n_parts(const ClientFamily& family, const Partition& p);

/// Streaming enumeration of all set partitions of {0..n-1} in restricted
/// growth string order, optionally limited to at most `max_classes`
/// classes. Throws when n exceeds `exhaustive_limit`.
class PartitionEnumerator {
 public:
  static constexpr int kDefaultExhaustiveLimit = 12;

  explicit PartitionEnumerator(int n,
                               std::optional<int> max_classes = std::nullopt,
                               int exhaustive_limit = kDefaultExhaustiveLimit);

  /// Next partition, or nullopt when exhausted.
  std::optional<Partition> next();

 private:
  int n_;
  int max_label_;  // largest class label allowed (k-1)
  std::vector<int> rgs_;
  bool first_ = true;
  bool done_ = false;
};

/// Bell number (number of set partitions); used by enumeration tests.
unsigned long long bell_number(int n);

/// GraphViz rendering; hyperedges become star nodes named "he_<id>". With a
/// partition, classes are emitted as clusters; without one, disjoint
/// families are.
std::string export_dot(const BroadcastNetwork& net, const Partition* p = nullptr);

}  // namespace qbnet
