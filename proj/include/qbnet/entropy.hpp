#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qbnet/channel.hpp"
#include "qbnet/rng.hpp"

namespace qbnet {

/// Ordered list of labeled finite-dimensional subsystems plus named party
/// groups. Amplitude indexing is row-major: subsystem 0 is the most
/// significant digit.
class SystemLabeling {
 public:
  SystemLabeling() = default;
  explicit SystemLabeling(std::vector<std::pair<std::string, int>> subsystems);

  int num_subsystems() const { return static_cast<int>(dims_.size()); }
  long total_dim() const { return total_dim_; }
  const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& dims() const { return dims_; }
  bool has(const std::string& label) const { return index_.count(label) > 0; }
  int index_of(const std::string& label) const;  // throws on unknown label

  void set_group(const std::string& party, std::vector<std::string> member_labels);
  bool has_group(const std::string& party) const { return groups_.count(party) > 0; }
  const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }

  /// Subsystem indices behind a name: the group of that name if defined,
  /// otherwise the single subsystem with that label. Sorted ascending.
  std::vector<int> resolve(const std::string& name) const;
  /// Union of resolve() over several names; throws if any two overlap.
  std::vector<int> resolve_union(std::span<const std::string> names) const;

  SystemLabeling with_appended(const std::string& label, int dim) const;
  SystemLabeling without(int subsystem_index) const;

 private:
  std::vector<std::string> labels_;
  std::vector<int> dims_;
  std::map<std::string, int> index_;
  std::map<std::string, std::vector<std::string>> groups_;
  long total_dim_ = 1;
};

class PureState {
 public:
  PureState(SystemLabeling labeling, Eigen::VectorXcd amplitudes);

  const SystemLabeling& labeling() const { return labeling_; }
  SystemLabeling& labeling() { return labeling_; }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }

 private:
  SystemLabeling labeling_;
  Eigen::VectorXcd amplitudes_;
};

class DensityMatrix {
 public:
  /// Validates hermiticity and unit trace (1e-10), positive semidefiniteness
  /// (eigenvalues >= -1e-10) and stores the symmetrized matrix.
  DensityMatrix(SystemLabeling labeling, Eigen::MatrixXcd matrix);

  const SystemLabeling& labeling() const { return labeling_; }
  SystemLabeling& labeling() { return labeling_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

 private:
  SystemLabeling labeling_;
  Eigen::MatrixXcd matrix_;
};

DensityMatrix to_density(const PureState& psi);

/// Shannon entropy in bits of a nonnegative spectrum; values below 1e-12
/// are treated as exact zeros.
double entropy_bits(const Eigen::VectorXd& spectrum);

/// Entropy of the reduced state on the given subsystem indices.
double subset_entropy(const PureState& psi, std::vector<int> subsystems);
double subset_entropy(const DensityMatrix& rho, std::vector<int> subsystems);

DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<int> keep);
DensityMatrix reduced_state(const PureState& psi, std::vector<int> keep);

/// H of the union of the named parties/subsystems, in bits.
double von_neumann_entropy(const DensityMatrix& rho, std::span<const std::string> names);
double von_neumann_entropy(const PureState& psi, std::span<const std::string> names);
double von_neumann_entropy(const DensityMatrix& rho, const std::string& name);
double von_neumann_entropy(const PureState& psi, const std::string& name);

/// I(parts_1 : ... : parts_m | cond) = sum_i H(parts_i|cond) - H(all|cond),
/// with an empty cond meaning plain multipartite mutual information. The
/// part groups and cond must be pairwise disjoint.
double multipartite_cmi(const DensityMatrix& rho,
                        std::span<const std::string> parts,
                        std::span<const std::string> cond = {});
double multipartite_cmi(const PureState& psi,
                        std::span<const std::string> parts,
                        std::span<const std::string> cond = {});

// --- states -----------------------------------------------------------

inline constexpr long kDefaultDimCap = 1L << 16;

/// (1/sqrt d) sum_i |i...i> over m subsystems labeled A1..Am of dimension d.
PureState ghz_state(int m, int d, long dim_cap = kDefaultDimCap);

/// Controlled unitaries on the shield, one block per key-basis string of
/// the m key parts (index = big-endian key string).
struct TwistingSpec {
  std::vector<Eigen::MatrixXcd> unitaries;  // d^m blocks, or empty for identity
};

/// Key parts K1..Km (dimension d each) twisted with a shield state. Party
/// groups A1..Am pair key part i with shield subsystem i.
DensityMatrix private_state(int m, int d, const DensityMatrix& shield,
                            const TwistingSpec& twisting);

/// Joint computational-basis distribution of the named key subsystems.
std::map<std::vector<int>, double> measure_key(const DensityMatrix& rho,
                                               std::span<const std::string> key_names);
std::map<std::vector<int>, double> measure_key(const PureState& psi,
                                               std::span<const std::string> key_names);

// --- channel application ----------------------------------------------

/// Replaces subsystem `input_label` by head outputs named per
/// `output_labels`; environment traced out.
DensityMatrix apply_channel(const ChannelSpec& spec, const DensityMatrix& rho,
                            const std::string& input_label,
                            const std::vector<std::string>& output_labels);
DensityMatrix apply_channel(const ChannelSpec& spec, const PureState& psi,
                            const std::string& input_label,
                            const std::vector<std::string>& output_labels);

/// Stinespring variant: keeps the output pure, appending the environment
/// subsystem under `env_label` (omitted when the channel is isometric).
PureState apply_channel_purified(const ChannelSpec& spec, const PureState& psi,
                                 const std::string& input_label,
                                 const std::vector<std::string>& output_labels,
                                 const std::string& env_label = "E");

// --- squashed entanglement --------------------------------------------

/// A squashing channel acting on the purifying system: the isometry maps
/// the purifier into kept x discarded, the first `kept_dim` factor is the
/// extension system E' that conditioning sees.
struct SquashingChannel {
  Eigen::MatrixXcd isometry;
  int kept_dim = 1;
};

/// Upper bound on the multipartite squashed entanglement from one explicit
/// extension. The default (no channel) is the trivial extension, i.e. the
/// plain multipartite mutual information of `rho`.
double squashed_ent_upper(const DensityMatrix& rho,
                          std::span<const std::string> parts,
                          const std::optional<SquashingChannel>& squash = std::nullopt);

struct EsqSearchConfig {
  int restarts = 8;
  int refine_iters = 60;
  int input_samples = 32;     // channel_esq only
  int max_extension_dim = 0;  // 0: purifier dimension
  std::uint64_t seed = 1;
  long dim_cap = 1L << 10;
};

/// Best upper bound found by searching over squashing channels applied to
/// the purification; always <= squashed_ent_upper(rho, parts) and equal to
/// it for pure states.
double squashed_ent_estimate(const DensityMatrix& rho,
                             std::span<const std::string> parts,
                             const EsqSearchConfig& cfg);

struct ChannelEsqResult {
  double bits = 0.0;
  bool exact = false;   // pure-output maximization vs heuristic estimate
  std::string method;
};

/// Partition-relative squashed entanglement of a broadcast channel:
/// maximum over locally-prepared pure inputs (reference retained in the
/// tail's class) of the output's squashed entanglement across the classes
/// of `endpoint_classes` = class of [tail, head_1, .., head_r].
ChannelEsqResult channel_esq(const ChannelSpec& spec,
                             const std::vector<int>& endpoint_classes,
                             const EsqSearchConfig& cfg);

// --- randomized helpers -------------------------------------------------

Eigen::MatrixXcd random_unitary(int n, RngStream& rng);
Eigen::MatrixXcd random_isometry(int rows, int cols, RngStream& rng);
PureState random_pure_state(const SystemLabeling& labeling, RngStream& rng);
DensityMatrix random_density_matrix(const SystemLabeling& labeling, int rank,
                                    RngStream& rng);

double fidelity(const PureState& a, const PureState& b);
double fidelity(const DensityMatrix& rho, const PureState& psi);

PureState tensor_product(const PureState& a, const PureState& b);
DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

// --- in-place style state-vector editing (returns new states) ----------

PureState apply_unitary(const PureState& psi, const std::string& label,
                        const Eigen::MatrixXcd& u);
PureState apply_unitary2(const PureState& psi, const std::string& label_a,
                         const std::string& label_b, const Eigen::MatrixXcd& u);

std::vector<double> outcome_probabilities(const PureState& psi, const std::string& label);
PureState collapse(const PureState& psi, const std::string& label, int outcome);
/// Removes a subsystem that is exactly in basis state `value` (as after
/// collapse); throws if any amplitude lives elsewhere.
PureState drop_subsystem(const PureState& psi, const std::string& label, int value);

}  // namespace qbnet
