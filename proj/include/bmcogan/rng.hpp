// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace bmcogan {

// xoshiro256** with splitmix64 seeding. Hand-rolled so that sequences are
// bit-identical across platforms and the full state serializes to 4 words,
// which std::mt19937 + std::normal_distribution do not guarantee.
class Rng {
  public:
    Rng() : Rng(0, 0) {}
    explicit Rng(uint64_t seed, uint64_t stream = 0);

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Standard Gaussian via Box-Muller. Consumes two words per call; no
    // cached spare, so the state alone determines every future draw.
    double normal();
    // Uniform integer in [0, n).
    int uniform_int(int n);
    // Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<int> permutation(int n);

    std::array<uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

  private:
    std::array<uint64_t, 4> s_{};
};

}  // namespace bmcogan
