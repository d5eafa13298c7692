// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "bmcogan/mat.hpp"

namespace bmcogan {

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-tensor moment state. Each tensor tracks its own step count so a
// subset step (e.g. the critic early-layer update) leaves the bias
// correction of untouched tensors alone.
struct AdamSlot {
    Mat m;
    Mat v;
    int64_t t = 0;
};

class Adam {
  public:
    Adam() = default;
    explicit Adam(const AdamParams& hp) : hp_(hp) {}

    // Allocates one slot per tensor; call once, shapes are fixed after.
    void attach(const std::vector<Mat*>& params);
    // Updates params[i] with grads[i] for every attached tensor.
    void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads);
    // Updates only the listed slot indices.
    void step_subset(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
                     const std::vector<size_t>& which);

    const AdamParams& hyper() const { return hp_; }
    std::vector<AdamSlot>& slots() { return slots_; }
    const std::vector<AdamSlot>& slots() const { return slots_; }

  private:
    AdamParams hp_;
    std::vector<AdamSlot> slots_;
};

}  // namespace bmcogan
