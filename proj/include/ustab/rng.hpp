#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace ustab {

// Philox4x32-10 block: pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Substream tags, so that independent consumers never share counters.
enum class StreamTag : std::uint32_t {
  kHestonDrivers = 1,
  kGeneralDrivers = 2,
  kDualBridge = 3,
  kPrimalBridge = 4,
  kHandoffBridge = 5,
};

// Counter-based stream: every (tag, path, step, block) cell has its own
// deterministic randomness, independent of evaluation order.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Two uniforms in the open interval (0, 1).
  std::pair<double, double> uniform_pair(StreamTag tag, std::uint64_t path, std::uint32_t step,
                                         std::uint32_t block = 0) const;
  double uniform(StreamTag tag, std::uint64_t path, std::uint32_t step,
                 std::uint32_t block = 0) const {
    return uniform_pair(tag, path, step, block).first;
  }
  // Two independent standard normals (Box-Muller on uniform_pair).
  std::pair<double, double> normal_pair(StreamTag tag, std::uint64_t path, std::uint32_t step,
                                        std::uint32_t block = 0) const;

 private:
  std::uint64_t seed_;
};

}  // namespace ustab
