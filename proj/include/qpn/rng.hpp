#pragma once

#include <cstdint>

#include "qpn/common.hpp"

namespace qpn {

/// Counter-based generator: output i of a stream is
/// splitmix64(key + i * golden) where key = splitmix64(seed) ^
/// splitmix64(stream + 1). Streams are independent by construction, so
/// per-instance work parallelizes reproducibly.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform01();  // [0, 1)
  double normal();     // standard normal via Box-Muller
  Vec normal_vec(int k);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qpn
