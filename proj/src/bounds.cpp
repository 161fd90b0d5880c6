#include "qbnet/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qbnet {

std::vector<int> endpoint_signature(const Hyperedge& e, const Partition& p) {
  std::vector<int> sig;
  sig.reserve(e.heads.size() + 1);
  std::map<int, int> relabel;
  for (int v : e.endpoints()) {
    auto [it, inserted] = relabel.try_emplace(p.class_of(v), static_cast<int>(relabel.size()));
    sig.push_back(it->second);
  }
  return sig;
}

std::string signature_key(const std::vector<int>& signature) {
  std::ostringstream os;
  for (std::size_t i = 0; i < signature.size(); ++i)
    os << (i ? "." : "") << signature[i];
  return os.str();
}

ChannelWeightTable::ChannelWeightTable(const BroadcastNetwork& net, EsqSearchConfig cfg)
    : net_(&net), cfg_(cfg), per_edge_(net.edges().size()) {}

void ChannelWeightTable::precompute_all(int threads) {
  struct Task {
    int edge;
    std::vector<int> signature;
  };
  std::vector<Task> tasks;
  for (int ei = 0; ei < static_cast<int>(net_->edges().size()); ++ei) {
    const int endpoints = static_cast<int>(net_->edge(ei).heads.size()) + 1;
    PartitionEnumerator en(endpoints, std::nullopt, endpoints);
    while (auto p = en.next()) {
      Task t;
      t.edge = ei;
      t.signature = p->labels();
      if (!per_edge_[static_cast<std::size_t>(ei)].count(t.signature))
        tasks.push_back(std::move(t));
    }
  }

  std::vector<ChannelEsqResult> results(tasks.size());
  auto run = [&](std::size_t i) {
    const Task& t = tasks[i];
    EsqSearchConfig cfg = cfg_;
    // Per-entry seed: the result must not depend on scheduling.
    RngStream root(cfg_.seed);
    cfg.seed = root.substream("weights/" + net_->edge(t.edge).id + "/" +
                              signature_key(t.signature))
                   .next_u64();
    results[i] = channel_esq(net_->edge(t.edge).channel, t.signature, cfg);
  };

  if (threads <= 1 || tasks.size() < 2) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
        run(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(threads, static_cast<int>(tasks.size()));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < tasks.size(); ++i)
    per_edge_[static_cast<std::size_t>(tasks[i].edge)].emplace(tasks[i].signature,
                                                               results[i]);
}

double ChannelWeightTable::weight(int edge_index, const std::vector<int>& signature) const {
  return entry(edge_index, signature).bits;
}

const ChannelEsqResult& ChannelWeightTable::entry(
    int edge_index, const std::vector<int>& signature) const {
  const auto& m = per_edge_.at(static_cast<std::size_t>(edge_index));
  auto it = m.find(signature);
  if (it == m.end())
    throw std::logic_error("missing weight entry for edge " +
                           net_->edge(edge_index).id + " signature " +
                           signature_key(signature));
  return it->second;
}

bool ChannelWeightTable::all_exact() const {
  for (const auto& m : per_edge_)
    for (const auto& [sig, res] : m)
      if (!res.exact) return false;
  return true;
}

bool RateConstraint::vacuous() const {
  return std::all_of(coefficients.begin(), coefficients.end(),
                     [](int c) { return c == 0; });
}

bool RateConstraint::dominated_by(const RateConstraint& other) const {
  if (other.coefficients.size() != coefficients.size()) return false;
  for (std::size_t j = 0; j < coefficients.size(); ++j)
    if (other.coefficients[j] < coefficients[j]) return false;
  return other.rhs <= rhs;
}

double entanglement_budget(const BroadcastNetwork& net, const Partition& p,
                           const ChannelWeightTable& weights,
                           double initial_entanglement) {
  double total = initial_entanglement;
  for (int ei : crossing_edges(net, p)) {
    const Hyperedge& e = net.edge(ei);
    total += e.avg_uses * weights.weight(ei, endpoint_signature(e, p));
  }
  return total;
}

BoundReport partition_bound(const BroadcastNetwork& net, const Partition& p,
                            const ChannelWeightTable& weights,
                            double initial_entanglement,
                            const std::optional<EpsilonTerms>& eps) {
  BoundReport report;
  report.partition = p;
  report.initial_entanglement = initial_entanglement;
  report.weight_sum =
      entanglement_budget(net, p, weights, 0.0);
  report.epsilon_terms = eps;

  double rhs = initial_entanglement + report.weight_sum;
  if (eps) {
    const double scale = 1.0 - eps->b * eps->epsilon;
    if (scale <= 0.0)
      throw std::invalid_argument(
          "epsilon terms give a nonpositive prefactor: constraint is unbounded");
    rhs = (rhs + eps->g) / scale;
  }

  report.constraint.rhs = rhs;
  for (const auto& f : net.families()) {
    const int n = n_parts(f, p);
    report.family_parts.push_back(n);
    report.constraint.family_ids.push_back(f.id);
    report.constraint.coefficients.push_back(n);
  }
  report.inert = report.constraint.vacuous();
  return report;
}

SearchStrategy strategy_from_string(const std::string& s) {
  if (s == "exhaustive") return SearchStrategy::exhaustive;
  if (s == "local" || s == "local-search" || s == "local_search")
    return SearchStrategy::local_search;
  throw std::invalid_argument("unknown search strategy: " + s);
}

namespace {

/// Generic seeded local search over partitions. The objective returns
/// nullopt for infeasible partitions; lower is better. Restart 0 starts
/// from the discrete partition, later restarts from random ones.
std::pair<double, Partition> local_search_minimize(
    int n,
    const std::function<std::optional<double>(const Partition&)>& objective,
    const SearchOptions& opts) {
  double best_value = std::numeric_limits<double>::infinity();
  Partition best;
  bool found = false;
  RngStream root(opts.seed);
  const int move_budget = 10 * n * n;

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    RngStream rng = root.substream("local/restart/" + std::to_string(restart));
    std::vector<int> labels(static_cast<std::size_t>(n));
    if (restart == 0) {
      for (int v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = v;
    } else {
      for (int v = 0; v < n; ++v)
        labels[static_cast<std::size_t>(v)] = rng.uniform_int(0, n - 1);
    }
    Partition current(labels);
    std::optional<double> current_value = objective(current);

    for (int move = 0; move < move_budget; ++move) {
      Partition candidate = current;
      std::vector<int> cand_labels = current.labels();
      if (current.num_classes() >= 2 && rng.uniform() < 0.3) {
        // Merge two classes.
        int a = rng.uniform_int(0, current.num_classes() - 1);
        int b = rng.uniform_int(0, current.num_classes() - 2);
        if (b >= a) ++b;
        for (int v = 0; v < n; ++v)
          if (cand_labels[static_cast<std::size_t>(v)] == b)
            cand_labels[static_cast<std::size_t>(v)] = a;
      } else {
        // Move one vertex to an existing class or a fresh one.
        int v = rng.uniform_int(0, n - 1);
        int target = rng.uniform_int(0, current.num_classes());
        cand_labels[static_cast<std::size_t>(v)] = target;
      }
      candidate = Partition(std::move(cand_labels));
      if (candidate == current) continue;
      std::optional<double> value = objective(candidate);
      if (!value) continue;
      if (!current_value || *value < *current_value - 1e-12) {
        current = std::move(candidate);
        current_value = value;
      }
    }
    if (current_value && (!found || *current_value < best_value - 1e-12)) {
      best_value = *current_value;
      best = current;
      found = true;
    }
  }
  if (!found)
    throw std::invalid_argument("no feasible partition found by local search");
  return {best_value, best};
}

struct ExhaustiveResult {
  double value = std::numeric_limits<double>::infinity();
  Partition argmin;
  std::vector<Partition> ties;
  bool found = false;
};

ExhaustiveResult exhaustive_minimize(
    int n,
    const std::function<std::optional<double>(const Partition&)>& objective,
    int exhaustive_limit) {
  ExhaustiveResult res;
  PartitionEnumerator en(n, std::nullopt, exhaustive_limit);
  while (auto p = en.next()) {
    std::optional<double> value = objective(*p);
    if (!value) continue;
    if (!res.found || *value < res.value - 1e-12) {
      res.value = *value;
      res.argmin = *p;
      res.ties.clear();
      res.found = true;
    } else if (std::abs(*value - res.value) <= 1e-12) {
      res.ties.push_back(*p);
    }
  }
  return res;
}

}  // namespace

FamilyBoundResult best_family_bound(const BroadcastNetwork& net,
                                    const ClientFamily& family,
                                    const ChannelWeightTable& weights,
                                    SearchStrategy strategy,
                                    double initial_entanglement,
                                    const std::optional<EpsilonTerms>& eps,
                                    const SearchOptions& opts) {
  if (family.members.size() < 2)
    throw std::invalid_argument("family " + family.id +
                                " has fewer than two members: no partition splits it");

  auto objective = [&](const Partition& p) -> std::optional<double> {
    const int n = n_parts(family, p);
    if (n == 0) return std::nullopt;
    double rhs = entanglement_budget(net, p, weights, initial_entanglement);
    if (eps) rhs = (rhs + eps->g) / (1.0 - eps->b * eps->epsilon);
    return rhs / n;
  };
  if (eps && eps->b * eps->epsilon >= 1.0)
    throw std::invalid_argument(
        "epsilon terms give a nonpositive prefactor: constraint is unbounded");

  FamilyBoundResult out;
  if (strategy == SearchStrategy::exhaustive) {
    ExhaustiveResult res =
        exhaustive_minimize(net.num_vertices(), objective, opts.exhaustive_limit);
    out.value = res.value;
    out.report = partition_bound(net, res.argmin, weights, initial_entanglement, eps);
    out.report.ties = std::move(res.ties);
    out.strategy = "exhaustive";
  } else {
    auto [value, argmin] = local_search_minimize(net.num_vertices(), objective, opts);
    out.value = value;
    out.report = partition_bound(net, argmin, weights, initial_entanglement, eps);
    out.strategy = "local-search";
  }
  return out;
}

BoundReport optimize_partition(const BroadcastNetwork& net,
                               const std::vector<int>& min_parts,
                               const ChannelWeightTable& weights,
                               SearchStrategy strategy,
                               double initial_entanglement,
                               const std::optional<EpsilonTerms>& eps,
                               const SearchOptions& opts) {
  if (min_parts.size() != net.families().size())
    throw std::invalid_argument("need one lower bound per family");
  for (std::size_t j = 0; j < min_parts.size(); ++j)
    if (min_parts[j] > static_cast<int>(net.families()[j].members.size()))
      throw std::invalid_argument("family " + net.families()[j].id +
                                  " cannot be split into " +
                                  std::to_string(min_parts[j]) + " classes");

  auto objective = [&](const Partition& p) -> std::optional<double> {
    for (std::size_t j = 0; j < min_parts.size(); ++j)
      if (n_parts(net.families()[j], p) < min_parts[j]) return std::nullopt;
    return entanglement_budget(net, p, weights, initial_entanglement);
  };

  Partition argmin;
  std::vector<Partition> ties;
  if (strategy == SearchStrategy::exhaustive) {
    ExhaustiveResult res =
        exhaustive_minimize(net.num_vertices(), objective, opts.exhaustive_limit);
    if (!res.found) throw std::invalid_argument("family split constraints are infeasible");
    argmin = res.argmin;
    ties = std::move(res.ties);
  } else {
    argmin = local_search_minimize(net.num_vertices(), objective, opts).second;
  }
  BoundReport report = partition_bound(net, argmin, weights, initial_entanglement, eps);
  report.ties = std::move(ties);
  return report;
}

std::vector<RateConstraint> rate_region(const BroadcastNetwork& net,
                                        const ChannelWeightTable& weights,
                                        const std::vector<Partition>& partitions,
                                        double initial_entanglement,
                                        const std::optional<EpsilonTerms>& eps) {
  std::vector<RateConstraint> all;
  for (const auto& p : partitions) {
    BoundReport r = partition_bound(net, p, weights, initial_entanglement, eps);
    if (r.inert) continue;
    all.push_back(std::move(r.constraint));
  }
  std::vector<RateConstraint> kept;
  for (std::size_t i = 0; i < all.size(); ++i) {
    bool drop = false;
    for (std::size_t j = 0; j < all.size() && !drop; ++j) {
      if (i == j) continue;
      if (!all[i].dominated_by(all[j])) continue;
      // Mutual domination means duplicates: keep the first occurrence.
      if (all[j].dominated_by(all[i]) && i < j) continue;
      drop = true;
    }
    if (!drop) kept.push_back(all[i]);
  }
  return kept;
}

nlohmann::json BoundReport::to_json(const BroadcastNetwork& net) const {
  nlohmann::json j;
  j["partition"] = net.partition_classes(partition);
  j["weight_sum_bits"] = weight_sum;
  j["initial_entanglement_bits"] = initial_entanglement;
  if (epsilon_terms) {
    j["epsilon"] = epsilon_terms->epsilon;
    j["b"] = epsilon_terms->b;
    j["g"] = epsilon_terms->g;
  }
  nlohmann::json families = nlohmann::json::array();
  for (std::size_t k = 0; k < constraint.family_ids.size(); ++k) {
    families.push_back({{"family", constraint.family_ids[k]},
                        {"parts", constraint.coefficients[k]}});
  }
  j["families"] = families;
  j["rhs_bits"] = constraint.rhs;
  j["inert"] = inert;
  if (!ties.empty()) {
    nlohmann::json tie_list = nlohmann::json::array();
    for (const auto& t : ties) tie_list.push_back(net.partition_classes(t));
    j["tied_partitions"] = tie_list;
  }
  return j;
}

}  // namespace qbnet
