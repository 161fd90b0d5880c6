#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbnet/entropy.hpp"
#include "qbnet/netmodel.hpp"

namespace qbnet {

/// Canonical form of a partition restricted to an edge's endpoints:
/// restricted growth labels over [tail, sorted heads].
std::vector<int> endpoint_signature(const Hyperedge& e, const Partition& p);

std::string signature_key(const std::vector<int>& signature);

/// Per-edge, per-endpoint-signature channel weights in bits. Populated
/// once up front (optionally in parallel); afterwards lookups are pure
/// reads, so partition scans can share the table freely.
class ChannelWeightTable {
 public:
  ChannelWeightTable(const BroadcastNetwork& net, EsqSearchConfig cfg);

  /// Computes every signature of every edge. Safe to call once before a
  /// scan; weight() throws on a signature this did not cover.
  void precompute_all(int threads = 1);

  double weight(int edge_index, const std::vector<int>& signature) const;
  const ChannelEsqResult& entry(int edge_index,
                                const std::vector<int>& signature) const;
  bool all_exact() const;
  const BroadcastNetwork& network() const { return *net_; }

 private:
  const BroadcastNetwork* net_;
  EsqSearchConfig cfg_;
  std::vector<std::map<std::vector<int>, ChannelEsqResult>> per_edge_;
};

struct EpsilonTerms {
  double epsilon = 0.0;
  double b = 0.0;
  double g = 0.0;
};

/// One linear inequality sum_j coeff_j * r_j <= rhs over the per-family
/// log-dimension rates r_j.
struct RateConstraint {
  std::vector<std::string> family_ids;
  std::vector<int> coefficients;
  double rhs = 0.0;

  bool vacuous() const;
  /// `other` implies this constraint (componentwise >= coefficients and
  /// <= rhs).
  bool dominated_by(const RateConstraint& other) const;
};

struct BoundReport {
  Partition partition;
  std::vector<int> family_parts;       // one per family, network order
  double weight_sum = 0.0;             // sum over crossing edges
  double initial_entanglement = 0.0;
  std::optional<EpsilonTerms> epsilon_terms;
  RateConstraint constraint;
  bool inert = false;                  // no family is split: vacuous bound
  std::vector<Partition> ties;         // other argmin partitions, search paths only

  nlohmann::json to_json(const BroadcastNetwork& net) const;
};

/// Total entanglement budget a protocol can spend across `p`:
/// initial + sum over crossing edges of avg_uses * weight.
double entanglement_budget(const BroadcastNetwork& net, const Partition& p,
                           const ChannelWeightTable& weights,
                           double initial_entanglement = 0.0);

/// The rate inequality induced by one partition. Throws when epsilon
/// terms make the prefactor nonpositive (b*eps >= 1).
BoundReport partition_bound(const BroadcastNetwork& net, const Partition& p,
                            const ChannelWeightTable& weights,
                            double initial_entanglement = 0.0,
                            const std::optional<EpsilonTerms>& eps = std::nullopt);

enum class SearchStrategy { exhaustive, local_search };
SearchStrategy strategy_from_string(const std::string& s);

struct SearchOptions {
  std::uint64_t seed = 1;
  int restarts = 50;
  int exhaustive_limit = PartitionEnumerator::kDefaultExhaustiveLimit;
};

struct FamilyBoundResult {
  double value = 0.0;        // best rhs / n over admissible partitions
  BoundReport report;        // the bound at the argmin partition
  std::string strategy;
};

/// Minimum over partitions that split the family of rhs / n. Exhaustive
/// strategy is exact; local search returns a valid (possibly non-minimal)
/// bound. Throws when |family| < 2: no partition is admissible.
FamilyBoundResult best_family_bound(const BroadcastNetwork& net,
                                    const ClientFamily& family,
                                    const ChannelWeightTable& weights,
                                    SearchStrategy strategy,
                                    double initial_entanglement = 0.0,
                                    const std::optional<EpsilonTerms>& eps = std::nullopt,
                                    const SearchOptions& opts = {});

/// Minimize the budget subject to lower bounds on how many classes each
/// family must be split into (values <= 1 do not constrain; note a family
/// is split into 0 or >= 2 classes by definition).
BoundReport optimize_partition(const BroadcastNetwork& net,
                               const std::vector<int>& min_parts,
                               const ChannelWeightTable& weights,
                               SearchStrategy strategy,
                               double initial_entanglement = 0.0,
                               const std::optional<EpsilonTerms>& eps = std::nullopt,
                               const SearchOptions& opts = {});

/// One constraint per partition, with vacuous and dominated ones removed.
std::vector<RateConstraint> rate_region(const BroadcastNetwork& net,
                                        const ChannelWeightTable& weights,
                                        const std::vector<Partition>& partitions,
                                        double initial_entanglement = 0.0,
                                        const std::optional<EpsilonTerms>& eps = std::nullopt);

}  // namespace qbnet
