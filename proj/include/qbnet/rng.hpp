#pragma once

#include <cstdint>
#include <string_view>

namespace qbnet {

/// Deterministic splittable RNG. Every consumer derives a named substream
/// from a root seed, so adding a new consumer never shifts the sequence
/// seen by another one. All distributions are hand-rolled on top of the
/// raw 64-bit stream; nothing here depends on libstdc++ distribution
/// internals, which keeps outputs byte-stable across toolchains.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Child stream whose sequence depends only on this stream's seed and
  /// `name`, never on how many values the parent has produced.
  RngStream substream(std::string_view name) const;

  std::uint64_t next_u64();
  double uniform();                  // [0, 1)
  double gauss();                    // standard normal
  int uniform_int(int lo, int hi);   // inclusive bounds

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a, used for substream naming and input digests in reports.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace qbnet
