// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmcogan/mat.hpp"
#include "bmcogan/rng.hpp"

namespace bmcogan {

inline constexpr double kLeakySlope = 0.2;

enum class Domain { seen, unseen };
Domain parse_domain(const std::string& s);

// Table-style ablation variants. Every entry rewires exactly one thing.
enum class Ablation {
    full,
    wo_LG2,         // drop the Wasserstein supervision on seen features
    wo_Ld,          // drop the push/pull discrimination term
    wo_Lcls,        // drop the frozen seen-classifier term
    wo_Lcen,        // drop the center hinge and center updates
    shared_R,       // one regressor serves both domains
    separate_Dsu,   // semantic discriminators stop sharing their final layer
    coupled_Gsu,    // per-domain generator output layers over a shared hidden
    wo_D_test,      // skip the critic early-layer transform at test time
};
Ablation parse_ablation(const std::string& s);
std::string to_string(Ablation a);
std::vector<std::string> all_ablation_names();

// Affine layer; W is out x in, b is 1 x out. The same struct doubles as the
// gradient container (matching shapes, accumulated in place).
struct Linear {
    Mat W;
    Mat b;

    Linear() = default;
    Linear(int out, int in) : W(out, in), b(1, out) {}
    int in_dim() const { return W.cols; }
    int out_dim() const { return W.rows; }
    Mat forward(const Mat& x) const;
    // Accumulates dW/db into g and optionally writes the input gradient.
    void backward(const Mat& x, const Mat& dy, Linear& g, Mat* dx = nullptr) const;
    void zero() {
        W.zero();
        b.zero();
    }
};

Mat leaky_relu(const Mat& pre);
Mat relu(const Mat& pre);
// dpre = dpost (.) act'(pre)
Mat leaky_relu_backward(const Mat& pre, const Mat& dpost);
Mat relu_backward(const Mat& pre, const Mat& dpost);

// Conditional generator [z | a] -> hidden (leaky) -> dx (relu, non-negative
// output to match deep visual features). The coupled_Gsu variant keeps the
// hidden layer shared and adds a private unseen-domain output layer.
struct Generator {
    Linear hidden;  // (dz + a_dim) -> gh
    Linear out;     // gh -> dx (seen branch when split)
    Linear out_u;   // unseen branch, only allocated when split_output
    bool split_output = false;

    struct Fwd {
        Mat u, h_pre, h, x_pre, x;
    };
    Fwd forward(const Mat& z, const Mat& a, Domain dom = Domain::seen) const;
    // dx_out: upstream gradient on the generated features.
    void backward(const Fwd& f, const Mat& dx_out, Domain dom, Generator& g) const;
    const Linear& out_for(Domain dom) const {
        return (split_output && dom == Domain::unseen) ? out_u : out;
    }
    Linear& out_for(Domain dom) { return (split_output && dom == Domain::unseen) ? out_u : out; }
};

// Visual feature -> reconstructed class semantics.
struct Regressor {
    Linear hidden;  // dx -> rh
    Linear out;     // rh -> a_dim

    struct Fwd {
        Mat h_pre, h, a_hat;
    };
    Fwd forward(const Mat& x) const;
    void backward(const Fwd& f, const Mat& x, const Mat& da_hat, Regressor& g,
                  Mat* dx = nullptr) const;
};

// Two domain-private semantic stems with one shared final layer. In the
// separate_Dsu variant each branch owns a private head instead.
struct CoupledDiscriminator {
    Linear stem_s;  // a_dim -> ch
    Linear stem_u;
    Linear head;    // ch -> 1, single storage read through both branches
    Linear head_u;  // allocated only when !shared_head
    bool shared_head = true;

    struct Fwd {
        Mat h_pre, h, logit;
    };
    Fwd forward(const Mat& a, Domain dom) const;
    void backward(const Fwd& f, const Mat& a, Domain dom, const Mat& dlogit,
                  CoupledDiscriminator& g, Mat* da = nullptr) const;
    const Linear& head_for(Domain dom) const {
        return (!shared_head && dom == Domain::unseen) ? head_u : head;
    }
    Linear& head_for(Domain dom) { return (!shared_head && dom == Domain::unseen) ? head_u : head; }
    const Linear& stem_for(Domain dom) const { return dom == Domain::seen ? stem_s : stem_u; }
    Linear& stem_for(Domain dom) { return dom == Domain::seen ? stem_s : stem_u; }
};

// Wasserstein critic on [x | a] pairs. The single hidden activation is the
// embedding k reused at test time; the scalar head carries no activation.
struct Critic {
    Linear hidden;  // (dx + a_dim) -> kh
    Linear out;     // kh -> 1

    struct Fwd {
        Mat u, k_pre, k, score;  // score is n x 1
    };
    Fwd forward(const Mat& x, const Mat& a) const;
    // Combines a gradient on the score with an extra gradient injected
    // directly on k (push/pull and center terms enter there). du, when
    // requested, is the gradient on the full [x | a] input; callers slice.
    void backward(const Fwd& f, const Mat* dscore, const Mat* dk_extra, Critic& g,
                  Mat* du = nullptr) const;
    // Same signature but touches only the hidden (early) layer parameters.
    void backward_early(const Fwd& f, const Mat& dk_extra, Critic& g, Mat* du = nullptr) const;
    // Rows of d(score_i)/d(u_i); closed form for the one-hidden-layer net.
    Mat input_gradient(const Fwd& f) const;
};

// Frozen seen-class scorer used during adversarial training.
struct Classifier {
    Linear lin;  // dx -> c_seen

    Mat forward_logp(const Mat& x) const;  // row-wise log-softmax
    // dlogp -> parameter grads (+ optional feature grads).
    void backward_logp(const Mat& x, const Mat& logp, const Mat& dlogp, Classifier& g,
                       Mat* dx = nullptr) const;
};

struct ClassCenters {
    Mat centers;  // c_seen x kh
    double delta = 1.0;
};

struct ModelDims {
    int dx = 0;
    int a_dim = 0;
    int dz = 0;  // <= 0 selects the default dz = a_dim
    int c_seen = 0;
    int gen_hidden = 4096;
    int reg_hidden = 1024;
    int disc_hidden = 256;
    int critic_hidden = 1024;
};

struct BMCoGANModel {
    ModelDims dims;
    Ablation ablation = Ablation::full;
    Generator gen;
    Regressor reg_s;
    Regressor reg_u;  // unused storage when shared_R
    CoupledDiscriminator cdisc;
    Critic critic;
    Classifier classifier;
    ClassCenters centers;

    bool shared_regressor() const { return ablation == Ablation::shared_R; }
    const Regressor& regressor(Domain dom) const {
        return (shared_regressor() || dom == Domain::seen) ? reg_s : reg_u;
    }
    Regressor& regressor(Domain dom) {
        return (shared_regressor() || dom == Domain::seen) ? reg_s : reg_u;
    }
};

struct ParamRef {
    std::string name;
    Mat* p;
};
// Stable, named enumeration of every trainable tensor (centers included for
// checkpointing). Identical ordering for a model and its gradient twin.
std::vector<ParamRef> model_params(BMCoGANModel& m);
int64_t model_param_count(const BMCoGANModel& m);

BMCoGANModel init_model(const ModelDims& dims, uint64_t seed, Ablation ablation = Ablation::full);
// Same shapes, all zeros; used as the gradient accumulator.
BMCoGANModel zeros_like(const BMCoGANModel& m);

// Spec-surface forward operations (shape-checked wrappers).
Mat generator_forward(const BMCoGANModel& m, const Mat& z, const Mat& a,
                      Domain dom = Domain::seen);
Mat regressor_forward(const BMCoGANModel& m, const Mat& x, Domain dom);
Mat coupled_discriminator_forward(const BMCoGANModel& m, const Mat& a, Domain dom);
struct CriticOut {
    Mat score;  // n x 1
    Mat k;      // n x kh
};
CriticOut critic_forward(const BMCoGANModel& m, const Mat& x, const Mat& a);
Mat classifier_forward(const BMCoGANModel& m, const Mat& x);

}  // namespace bmcogan
