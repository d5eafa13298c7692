// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "bmcogan/mat.hpp"
#include "bmcogan/model.hpp"
#include "bmcogan/rng.hpp"

namespace bmcogan {

struct LossWeights {
    double lambda1 = 2.0;
    double lambda2 = 0.8;
    double lambda_d = 1.0;
    double lambda_cls = 0.2;
    double lambda_cen = 0.1;
    double gp_coeff = 10.0;
    double delta = 1.0;  // center hinge margin, mirrors ClassCenters
};

// One scalar per term plus the two combined group totals.
struct LossReport {
    long step = -1;
    double l_g1 = 0;     // generator side of the coupled adversarial game
    double l_reg_s = 0;
    double l_reg_u = 0;
    double l_g2 = 0;     // generator side of the Wasserstein game
    double l_cls = 0;
    double l_d = 0;
    double l_cen = 0;
    double group1 = 0;
    double group2 = 0;
    // Diagnostics outside the two groups.
    double coupled_disc = 0;
    double critic = 0;
    double grad_penalty = 0;

    bool all_finite() const;
    // Tab-separated: step L_G1 L_Reg_s L_Reg_u L_G2 L_cls L_d L_cen group1 group2
    std::string log_line() const;
    static std::string log_header();
};

// Mean over rows of ||a - a_hat||^2. Optional gradient w.r.t. a_hat.
double regression_loss(const Mat& a, const Mat& a_hat, Mat* d_a_hat = nullptr);

struct AdvPair {
    double disc_loss = 0;
    double gen_loss = 0;
};
// Both sides of the coupled semantic game, computed in logit space.
AdvPair coupled_adversarial_loss(const Mat& real_s, const Mat& fake_s, const Mat& real_u,
                                 const Mat& fake_u);
// Discriminator side with gradients w.r.t. each logit batch.
double coupled_disc_loss(const Mat& real_s, const Mat& fake_s, const Mat& real_u,
                         const Mat& fake_u, Mat* d_real_s = nullptr, Mat* d_fake_s = nullptr,
                         Mat* d_real_u = nullptr, Mat* d_fake_u = nullptr);
// Non-saturating generator side with gradients w.r.t. fake logits.
double coupled_gen_loss(const Mat& fake_s, const Mat& fake_u, Mat* d_fake_s = nullptr,
                        Mat* d_fake_u = nullptr);

struct WganLosses {
    double critic_loss = 0;
    double gen_loss = 0;
};
WganLosses wgan_losses(const Mat& real_scores, const Mat& fake_scores, double gp_value,
                       double gp_coeff);

// Improved-WGAN penalty on per-row interpolates x_hat = eps*x + (1-eps)*x_fake
// with the real row's semantics. When grads is non-null the parameter
// gradients of the penalty are accumulated (double backprop; exact a.e. for
// the piecewise-linear critic).
double gradient_penalty(const Critic& critic, const Mat& x_real, const Mat& x_fake, const Mat& a,
                        Rng& rng, Critic* grads = nullptr);

// Push/pull term: mean matched-row distance(real seen, synthesized seen)
// minus mean all-pairs distance(real seen, synthesized unseen). The value is
// always the plain difference; the two knobs act on gradients only:
//   repulsion_clip_norm caps the joint norm of the repulsion gradient;
//   repulsion_margin_factor saturates it entirely once the mean repulsion
//   distance exceeds factor x spread(k_real), holding a finite gap instead
//   of pushing forever (the term is unbounded below).
double discrimination_loss(const Mat& k_real, const Mat& k_syn_seen, const Mat& k_syn_unseen,
                           Mat* dk_real = nullptr, Mat* dk_syn_seen = nullptr,
                           Mat* dk_syn_unseen = nullptr, double repulsion_clip_norm = 0.0,
                           double repulsion_margin_factor = 0.0);

// Mean squared distance between all ordered pairs of rows (2x the summed
// per-dimension variance); the scale reference for the repulsion margin.
double embedding_spread(const Mat& k);

// Hinge max(0, delta + ||k - C_y||^2 - ||k - C_y'||^2), batch mean.
double center_loss(const Mat& k, const std::vector<int>& y, const std::vector<int>& y_prime,
                   const ClassCenters& centers, Mat* dk = nullptr);
// Uniform contrast labels over seen classes excluding y.
std::vector<int> sample_contrast_labels(const std::vector<int>& y, int c_seen, Rng& rng);

// C_y <- C_y - lr * sum_{i: y_i = y}(C_y - k_i) / (1 + count_y)
void update_centers(ClassCenters& centers, const Mat& k, const std::vector<int>& y,
                    double center_lr);

// Mean negative log-probability of the true label.
double seen_classifier_loss(const Mat& log_probs, const std::vector<int>& y,
                            Mat* d_log_probs = nullptr);

// Fills group1 = lambda1*L_G1 + L_Reg_s + L_Reg_u and
// group2 = lambda2*L_G2 + lambda_cls*L_cls + lambda_d*L_d + lambda_cen*L_cen.
LossReport assemble_objectives(LossReport terms, const LossWeights& w);

}  // namespace bmcogan
