// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/optim.hpp"

#include <cmath>

#include "bmcogan/error.hpp"

namespace bmcogan {

void Adam::attach(const std::vector<Mat*>& params) {
    slots_.clear();
    slots_.reserve(params.size());
    for (const Mat* p : params) {
        AdamSlot s;
        s.m = Mat(p->rows, p->cols);
        s.v = Mat(p->rows, p->cols);
        slots_.push_back(std::move(s));
    }
}

void Adam::step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
    std::vector<size_t> all(params.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    step_subset(params, grads, all);
}

void Adam::step_subset(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
                       const std::vector<size_t>& which) {
    if (params.size() != slots_.size() || grads.size() != params.size())
        throw ArgumentError("Adam: parameter list does not match attached slots");
    for (size_t idx : which) {
        Mat& p = *params[idx];
        const Mat& g = *grads[idx];
        AdamSlot& s = slots_[idx];
        check_same_shape(p, g, "Adam::step");
        s.t += 1;
        const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(s.t));
        const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(s.t));
        for (size_t i = 0; i < p.size(); ++i) {
            s.m.d[i] = hp_.beta1 * s.m.d[i] + (1.0 - hp_.beta1) * g.d[i];
            s.v.d[i] = hp_.beta2 * s.v.d[i] + (1.0 - hp_.beta2) * g.d[i] * g.d[i];
            const double mhat = s.m.d[i] / bc1;
            const double vhat = s.v.d[i] / bc2;
            p.d[i] -= hp_.lr * mhat / (std::sqrt(vhat) + hp_.eps);
        }
    }
}

}  // namespace bmcogan
