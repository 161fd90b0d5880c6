#include "qbnet/netmodel.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qbnet {

std::vector<int> Hyperedge::endpoints() const {
  std::vector<int> eps;
  eps.reserve(heads.size() + 1);
  eps.push_back(tail);
  eps.insert(eps.end(), heads.begin(), heads.end());
  return eps;
}

Partition::Partition(std::vector<int> labels) : class_of_(std::move(labels)) {
  std::map<int, int> relabel;
  for (int& c : class_of_) {
    auto [it, inserted] = relabel.try_emplace(c, static_cast<int>(relabel.size()));
    c = it->second;
  }
  num_classes_ = static_cast<int>(relabel.size());
}

Partition Partition::single_class(int n) {
  return Partition(std::vector<int>(static_cast<std::size_t>(n), 0));
}

Partition Partition::discrete(int n) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i;
  return Partition(std::move(labels));
}

bool Partition::refines(const Partition& coarser) const {
  if (size() != coarser.size()) return false;
  // Each of our classes must map into exactly one coarser class.
  std::map<int, int> image;
  for (int v = 0; v < size(); ++v) {
    auto [it, inserted] = image.try_emplace(class_of(v), coarser.class_of(v));
    if (!inserted && it->second != coarser.class_of(v)) return false;
  }
  return true;
}

BroadcastNetwork::BroadcastNetwork(std::vector<std::string> vertices,
                                   std::vector<Hyperedge> edges,
                                   std::vector<ClientFamily> families)
    : vertices_(std::move(vertices)),
      edges_(std::move(edges)),
      families_(std::move(families)) {
  for (int i = 0; i < static_cast<int>(vertices_.size()); ++i) {
    if (!index_.emplace(vertices_[static_cast<std::size_t>(i)], i).second)
      throw std::invalid_argument("duplicate vertex id: " + vertices_[static_cast<std::size_t>(i)]);
  }
  std::set<std::string> edge_ids;
  const int n = num_vertices();
  for (auto& e : edges_) {
    if (!edge_ids.insert(e.id).second)
      throw std::invalid_argument("duplicate edge id: " + e.id);
    if (e.tail < 0 || e.tail >= n)
      throw std::invalid_argument("edge " + e.id + ": tail out of range");
    if (e.heads.empty())
      throw std::invalid_argument("edge " + e.id + ": heads must be non-empty");
    std::sort(e.heads.begin(), e.heads.end());
    if (std::adjacent_find(e.heads.begin(), e.heads.end()) != e.heads.end())
      throw std::invalid_argument("edge " + e.id + ": repeated head vertex");
    for (int h : e.heads) {
      if (h < 0 || h >= n)
        throw std::invalid_argument("edge " + e.id + ": head out of range");
      if (h == e.tail)
        throw std::invalid_argument(
            "edge " + e.id +
            ": tail may not appear among heads; model a colocated output as "
            "a separate vertex in the sender's class");
    }
    if (e.avg_uses < 0.0)
      throw std::invalid_argument("edge " + e.id + ": avg_uses must be >= 0");
    if (e.channel.num_heads != static_cast<int>(e.heads.size()))
      throw std::invalid_argument("edge " + e.id + ": channel head count mismatch");
    e.channel.validate();
  }
  std::set<std::string> family_ids;
  for (auto& f : families_) {
    if (!family_ids.insert(f.id).second)
      throw std::invalid_argument("duplicate family id: " + f.id);
    if (f.members.empty())
      throw std::invalid_argument("family " + f.id + ": members must be non-empty");
    std::sort(f.members.begin(), f.members.end());
    f.members.erase(std::unique(f.members.begin(), f.members.end()), f.members.end());
    for (int m : f.members)
      if (m < 0 || m >= n)
        throw std::invalid_argument("family " + f.id + ": member out of range");
    if (f.members.size() == 1)
      warnings_.push_back("family " + f.id +
                          " has a single member; it cannot constrain any rate");
  }
}

int BroadcastNetwork::vertex_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown vertex: " + name);
  return it->second;
}

int BroadcastNetwork::edge_index(const std::string& id) const {
  for (int i = 0; i < static_cast<int>(edges_.size()); ++i)
    if (edges_[static_cast<std::size_t>(i)].id == id) return i;
  throw std::invalid_argument("unknown edge: " + id);
}

const ClientFamily& BroadcastNetwork::family(const std::string& id) const {
  for (const auto& f : families_)
    if (f.id == id) return f;
  throw std::invalid_argument("unknown family: " + id);
}

BroadcastNetwork BroadcastNetwork::from_json(const nlohmann::json& doc) {
  std::vector<std::string> vertices = doc.at("vertices").get<std::vector<std::string>>();
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(vertices.size()); ++i)
    index.emplace(vertices[static_cast<std::size_t>(i)], i);
  auto lookup = [&](const std::string& name, const std::string& where) {
    auto it = index.find(name);
    if (it == index.end())
      throw std::invalid_argument(where + " references undeclared vertex " + name);
    return it->second;
  };

  std::vector<Hyperedge> edges;
  for (const auto& je : doc.value("edges", nlohmann::json::array())) {
    Hyperedge e;
    e.id = je.at("id").get<std::string>();
    e.tail = lookup(je.at("tail").get<std::string>(), "edge " + e.id);
    for (const auto& h : je.at("heads"))
      e.heads.push_back(lookup(h.get<std::string>(), "edge " + e.id));
    e.avg_uses = je.value("avg_uses", 1.0);
    e.channel = ChannelSpec::from_json(je.at("channel"), static_cast<int>(e.heads.size()));
    edges.push_back(std::move(e));
  }

  std::vector<ClientFamily> families;
  for (const auto& jf : doc.value("families", nlohmann::json::array())) {
    ClientFamily f;
    f.id = jf.at("id").get<std::string>();
    for (const auto& m : jf.at("members"))
      f.members.push_back(lookup(m.get<std::string>(), "family " + f.id));
    families.push_back(std::move(f));
  }
  return BroadcastNetwork(std::move(vertices), std::move(edges), std::move(families));
}

BroadcastNetwork BroadcastNetwork::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("parse error in " + path + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json BroadcastNetwork::to_json() const {
  nlohmann::json doc;
  doc["vertices"] = vertices_;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : edges_) {
    nlohmann::json je;
    je["id"] = e.id;
    je["tail"] = vertex_name(e.tail);
    std::vector<std::string> heads;
    for (int h : e.heads) heads.push_back(vertex_name(h));
    je["heads"] = heads;
    je["channel"] = e.channel.to_json();
    je["avg_uses"] = e.avg_uses;
    edges.push_back(je);
  }
  doc["edges"] = edges;
  nlohmann::json families = nlohmann::json::array();
  for (const auto& f : families_) {
    nlohmann::json jf;
    jf["id"] = f.id;
    std::vector<std::string> members;
    for (int m : f.members) members.push_back(vertex_name(m));
    jf["members"] = members;
    families.push_back(jf);
  }
  doc["families"] = families;
  return doc;
}

Partition BroadcastNetwork::parse_partition(const std::string& spec) const {
  std::vector<int> labels(static_cast<std::size_t>(num_vertices()), -1);
  int cls = 0;
  std::stringstream classes(spec);
  std::string cls_spec;
  while (std::getline(classes, cls_spec, '|')) {
    std::stringstream members(cls_spec);
    std::string name;
    bool any = false;
    while (std::getline(members, name, ',')) {
      if (name.empty()) continue;
      int v = vertex_index(name);
      if (labels[static_cast<std::size_t>(v)] != -1)
        throw std::invalid_argument("partition assigns " + name + " twice");
      labels[static_cast<std::size_t>(v)] = cls;
      any = true;
    }
    if (any) ++cls;
  }
  for (int v = 0; v < num_vertices(); ++v)
    if (labels[static_cast<std::size_t>(v)] == -1)
      throw std::invalid_argument("partition misses vertex " + vertex_name(v));
  return Partition(std::move(labels));
}

std::vector<std::vector<std::string>> BroadcastNetwork::partition_classes(
    const Partition& p) const {
  std::vector<std::vector<std::string>> classes(static_cast<std::size_t>(p.num_classes()));
  for (int v = 0; v < num_vertices(); ++v)
    classes[static_cast<std::size_t>(p.class_of(v))].push_back(vertex_name(v));
  return classes;
}

std::vector<int> crossing_edges(const BroadcastNetwork& net, const Partition& p) {
  if (p.size() != net.num_vertices())
    throw std::invalid_argument("partition does not cover this network's vertices");
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(net.edges().size()); ++i) {
    const Hyperedge& e = net.edge(i);
    const int tail_class = p.class_of(e.tail);
    bool crosses = false;
    for (int h : e.heads)
      if (p.class_of(h) != tail_class) {
        crosses = true;
        break;
      }
    if (crosses) out.push_back(i);
  }
  return out;
}

int n_parts(const ClientFamily& family, const Partition& p) {
  std::set<int> classes;
  for (int m : family.members) {
    if (m < 0 || m >= p.size())
      throw std::invalid_argument("family member outside partition domain");
    classes.insert(p.class_of(m));
  }
  const int count = static_cast<int>(classes.size());
  return count >= 2 ? count : 0;
}

PartitionEnumerator::PartitionEnumerator(int n, std::optional<int> max_classes,
                                         int exhaustive_limit)
    : n_(n) {
  if (n < 1) throw std::invalid_argument("cannot enumerate partitions of an empty set");
  if (n > exhaustive_limit)
    throw std::invalid_argument(
        "vertex count " + std::to_string(n) + " exceeds the exhaustive limit " +
        std::to_string(exhaustive_limit) + "; use the heuristic search strategy");
  max_label_ = max_classes ? std::min(*max_classes, n) - 1 : n - 1;
  if (max_label_ < 0) throw std::invalid_argument("max_classes must be >= 1");
  rgs_.assign(static_cast<std::size_t>(n), 0);
}

std::optional<Partition> PartitionEnumerator::next() {
  if (done_) return std::nullopt;
  if (first_) {
    first_ = false;
    return Partition(rgs_);
  }
  // Advance the restricted growth string: rightmost position that can be
  // incremented while staying <= 1 + max of prefix, suffix reset to zero.
  for (int i = n_ - 1; i >= 1; --i) {
    int prefix_max = 0;
    for (int j = 0; j < i; ++j) prefix_max = std::max(prefix_max, rgs_[static_cast<std::size_t>(j)]);
    if (rgs_[static_cast<std::size_t>(i)] < std::min(prefix_max + 1, max_label_)) {
      ++rgs_[static_cast<std::size_t>(i)];
      std::fill(rgs_.begin() + i + 1, rgs_.end(), 0);
      return Partition(rgs_);
    }
  }
  done_ = true;
  return std::nullopt;
}

unsigned long long bell_number(int n) {
  // Bell triangle.
  std::vector<std::vector<unsigned long long>> tri;
  tri.push_back({1});
  for (int i = 1; i <= n; ++i) {
    std::vector<unsigned long long> row;
    row.push_back(tri.back().back());
    for (std::size_t j = 0; j + 1 <= tri.back().size(); ++j)
      row.push_back(row.back() + tri.back()[j]);
    tri.push_back(std::move(row));
  }
  return tri[static_cast<std::size_t>(n)][0];
}

std::string export_dot(const BroadcastNetwork& net, const Partition* p) {
  std::ostringstream os;
  os << "digraph qbnet {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=circle];\n";

  // Family membership per vertex, for labels.
  std::map<int, std::vector<std::string>> in_families;
  for (const auto& f : net.families())
    for (int m : f.members) in_families[m].push_back(f.id);

  auto emit_vertex = [&](int v, const std::string& indent) {
    os << indent << '"' << net.vertex_name(v) << '"';
    auto it = in_families.find(v);
    if (it != in_families.end()) {
      os << " [label=\"" << net.vertex_name(v) << "\\n(";
      for (std::size_t i = 0; i < it->second.size(); ++i)
        os << (i ? "," : "") << it->second[i];
      os << ")\"]";
    }
    os << ";\n";
  };

  if (p != nullptr) {
    for (int c = 0; c < p->num_classes(); ++c) {
      os << "  subgraph cluster_class_" << c << " {\n";
      os << "    label=\"class " << c + 1 << "\";\n";
      os << "    style=dashed;\n";
      for (int v = 0; v < net.num_vertices(); ++v)
        if (p->class_of(v) == c) emit_vertex(v, "    ");
      os << "  }\n";
    }
  } else {
    // Families as clusters when they are pairwise disjoint, labels otherwise.
    bool disjoint = true;
    for (const auto& [v, fams] : in_families)
      if (fams.size() > 1) disjoint = false;
    if (disjoint && !net.families().empty()) {
      std::set<int> grouped;
      for (const auto& f : net.families()) {
        os << "  subgraph cluster_family_" << f.id << " {\n";
        os << "    label=\"" << f.id << "\";\n";
        for (int m : f.members) {
          emit_vertex(m, "    ");
          grouped.insert(m);
        }
        os << "  }\n";
      }
      for (int v = 0; v < net.num_vertices(); ++v)
        if (!grouped.count(v)) emit_vertex(v, "  ");
    } else {
      for (int v = 0; v < net.num_vertices(); ++v) emit_vertex(v, "  ");
    }
  }

  for (const auto& e : net.edges()) {
    os << "  \"he_" << e.id << "\" [shape=point,label=\"\"];\n";
    os << "  \"" << net.vertex_name(e.tail) << "\" -> \"he_" << e.id
       << "\" [arrowhead=none,label=\"" << e.id << "\"];\n";
    for (int h : e.heads)
      os << "  \"he_" << e.id << "\" -> \"" << net.vertex_name(h) << "\";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace qbnet
