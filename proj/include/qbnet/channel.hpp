#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace qbnet {

enum class ChannelKind {
  ideal_broadcast,      // copy isometry |i> -> |i...i|
  dephasing_broadcast,  // ideal, then each head dephased with probability p
  erasure_broadcast,    // ideal embedded in (d+1)-level heads, whole output
                        // replaced by the flag level with probability p
  custom_isometry,      // explicit isometry, input -> product of heads
};

std::string to_string(ChannelKind kind);
ChannelKind channel_kind_from_string(const std::string& s);

/// Description of one broadcast channel: a single input of dimension
/// `input_dim` fanned out to `num_heads` receivers.
struct ChannelSpec {
  ChannelKind kind = ChannelKind::ideal_broadcast;
  int input_dim = 2;
  int num_heads = 1;
  double noise = 0.0;  // dephasing / erasure probability
  std::optional<Eigen::MatrixXcd> isometry;  // custom_isometry only
  std::vector<int> custom_head_dims;         // custom_isometry only

  /// Output dimension of each head, in head order.
  std::vector<int> head_dims() const;

  /// True when the channel maps pure inputs to pure outputs (no
  /// environment is needed). Zero-noise dephasing/erasure qualify.
  bool is_isometric() const;

  /// Stinespring isometry input -> (heads x environment). For isometric
  /// channels the environment dimension is 1.
  Eigen::MatrixXcd stinespring(int& env_dim) const;

  /// Stable fingerprint; channels with equal fingerprints act identically.
  std::string fingerprint() const;

  void validate() const;  // throws std::invalid_argument on bad specs

  static ChannelSpec from_json(const nlohmann::json& j, int num_heads);
  nlohmann::json to_json() const;
};

}  // namespace qbnet
