// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/losses.hpp"

#include <cmath>
#include <cstdio>

#include "bmcogan/error.hpp"

namespace bmcogan {

namespace {

void require_finite(const Mat& m, const char* what) {
    if (!m.all_finite()) throw NumericError(std::string(what) + ": non-finite input");
}

// log(sigmoid(x)) = -softplus(-x), stable at |x| ~ 50 and beyond.
double log_sigmoid(double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double mean(const Mat& m) {
    if (m.empty()) throw ArgumentError("mean of empty batch");
    double acc = 0;
    for (double v : m.d) acc += v;
    return acc / static_cast<double>(m.size());
}

}  // namespace

bool LossReport::all_finite() const {
    for (double v : {l_g1, l_reg_s, l_reg_u, l_g2, l_cls, l_d, l_cen, group1, group2,
                     coupled_disc, critic, grad_penalty})
        if (!std::isfinite(v)) return false;
    return true;
}

std::string LossReport::log_header() {
    return "step\tL_G1\tL_Reg_s\tL_Reg_u\tL_G2\tL_cls\tL_d\tL_cen\tgroup1\tgroup2";
}

std::string LossReport::log_line() const {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%ld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g", step, l_g1,
                  l_reg_s, l_reg_u, l_g2, l_cls, l_d, l_cen, group1, group2);
    return buf;
}

double regression_loss(const Mat& a, const Mat& a_hat, Mat* d_a_hat) {
    check_same_shape(a, a_hat, "regression_loss");
    if (a.rows == 0) throw ArgumentError("regression_loss: empty batch");
    const double inv_n = 1.0 / a.rows;
    double acc = 0;
    if (d_a_hat) *d_a_hat = Mat(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) {
        const double diff = a_hat.d[i] - a.d[i];
        acc += diff * diff;
        if (d_a_hat) d_a_hat->d[i] = 2.0 * diff * inv_n;
    }
    return acc * inv_n;
}

double coupled_disc_loss(const Mat& real_s, const Mat& fake_s, const Mat& real_u,
                         const Mat& fake_u, Mat* d_real_s, Mat* d_fake_s, Mat* d_real_u,
                         Mat* d_fake_u) {
    for (const Mat* m : {&real_s, &fake_s, &real_u, &fake_u})
        require_finite(*m, "coupled_disc_loss");
    double loss = 0;
    auto real_term = [&](const Mat& logits, Mat* grad) {
        if (logits.empty()) throw ArgumentError("coupled_disc_loss: empty logit batch");
        const double inv_n = 1.0 / static_cast<double>(logits.size());
        if (grad) *grad = Mat(logits.rows, logits.cols);
        double acc = 0;
        for (size_t i = 0; i < logits.size(); ++i) {
            acc += -log_sigmoid(logits.d[i]);
            if (grad) grad->d[i] = (sigmoid(logits.d[i]) - 1.0) * inv_n;
        }
        return acc * inv_n;
    };
    auto fake_term = [&](const Mat& logits, Mat* grad) {
        if (logits.empty()) throw ArgumentError("coupled_disc_loss: empty logit batch");
        const double inv_n = 1.0 / static_cast<double>(logits.size());
        if (grad) *grad = Mat(logits.rows, logits.cols);
        double acc = 0;
        for (size_t i = 0; i < logits.size(); ++i) {
            acc += -log_sigmoid(-logits.d[i]);  // -log(1 - sigma(x))
            if (grad) grad->d[i] = sigmoid(logits.d[i]) * inv_n;
        }
        return acc * inv_n;
    };
    loss += real_term(real_s, d_real_s);
    loss += fake_term(fake_s, d_fake_s);
    loss += real_term(real_u, d_real_u);
    loss += fake_term(fake_u, d_fake_u);
    return loss;
}

double coupled_gen_loss(const Mat& fake_s, const Mat& fake_u, Mat* d_fake_s, Mat* d_fake_u) {
    for (const Mat* m : {&fake_s, &fake_u}) require_finite(*m, "coupled_gen_loss");
    auto term = [&](const Mat& logits, Mat* grad) {
        if (logits.empty()) throw ArgumentError("coupled_gen_loss: empty logit batch");
        const double inv_n = 1.0 / static_cast<double>(logits.size());
        if (grad) *grad = Mat(logits.rows, logits.cols);
        double acc = 0;
        for (size_t i = 0; i < logits.size(); ++i) {
            acc += -log_sigmoid(logits.d[i]);
            if (grad) grad->d[i] = (sigmoid(logits.d[i]) - 1.0) * inv_n;
        }
        return acc * inv_n;
    };
    return term(fake_s, d_fake_s) + term(fake_u, d_fake_u);
}

AdvPair coupled_adversarial_loss(const Mat& real_s, const Mat& fake_s, const Mat& real_u,
                                 const Mat& fake_u) {
    AdvPair out;
    out.disc_loss = coupled_disc_loss(real_s, fake_s, real_u, fake_u);
    out.gen_loss = coupled_gen_loss(fake_s, fake_u);
    return out;
}

WganLosses wgan_losses(const Mat& real_scores, const Mat& fake_scores, double gp_value,
                       double gp_coeff) {
    require_finite(real_scores, "wgan_losses real");
    require_finite(fake_scores, "wgan_losses fake");
    if (!std::isfinite(gp_value) || gp_value < 0)
        throw NumericError("wgan_losses: invalid gradient penalty value");
    WganLosses out;
    const double mf = mean(fake_scores);
    out.critic_loss = mf - mean(real_scores) + gp_coeff * gp_value;
    out.gen_loss = -mf;
    return out;
}

double gradient_penalty(const Critic& critic, const Mat& x_real, const Mat& x_fake, const Mat& a,
                        Rng& rng, Critic* grads) {
    check_same_shape(x_real, x_fake, "gradient_penalty");
    if (x_real.rows != a.rows) throw ShapeError("gradient_penalty: semantics batch size differs");
    const int n = x_real.rows;

    Mat x_hat(n, x_real.cols);
    for (int i = 0; i < n; ++i) {
        const double eps = rng.uniform();
        for (int j = 0; j < x_real.cols; ++j)
            x_hat(i, j) = eps * x_real(i, j) + (1.0 - eps) * x_fake(i, j);
    }

    const auto f = critic.forward(x_hat, a);
    const Mat g = critic.input_gradient(f);  // n x (dx + a_dim)

    const int kh = critic.hidden.out_dim();
    const int in = critic.hidden.in_dim();
    double penalty = 0;
    for (int i = 0; i < n; ++i) {
        const double* grow = g.row(i);
        double sq = 0;
        for (int j = 0; j < in; ++j) sq += grow[j] * grow[j];
        const double norm = std::sqrt(sq);
        const double diff = norm - 1.0;
        penalty += diff * diff;

        if (grads) {
            // P_i = (||g_i|| - 1)^2 with g_i = W1^T (mask_i (.) w2).
            // dP/dg = 2(||g||-1) g/||g||; the activation mask is piecewise
            // constant, so its own derivative vanishes almost everywhere.
            if (norm < 1e-12) continue;  // flat spot of ||.|| at the origin
            const double c = 2.0 * diff / (norm * n);
            const double* kpre = f.k_pre.row(i);
            for (int h = 0; h < kh; ++h) {
                const double m = kpre[h] > 0 ? 1.0 : kLeakySlope;
                const double w2h = critic.out.W(0, h);
                double* gW1 = grads->hidden.W.row(h);
                const double* w1 = critic.hidden.W.row(h);
                double dot_wv = 0;
                for (int j = 0; j < in; ++j) {
                    gW1[j] += c * w2h * m * grow[j];
                    dot_wv += w1[j] * grow[j];
                }
                grads->out.W(0, h) += c * m * dot_wv;
            }
        }
    }
    return penalty / n;
}

double embedding_spread(const Mat& k) {
    if (k.rows == 0) throw ArgumentError("embedding_spread: empty batch");
    // (1/n^2) sum_ij ||k_i - k_j||^2 = 2 (mean ||k||^2 - ||mean k||^2)
    Mat mean(1, k.cols);
    double sq = 0;
    for (int i = 0; i < k.rows; ++i) {
        const double* r = k.row(i);
        for (int j = 0; j < k.cols; ++j) {
            mean(0, j) += r[j] / k.rows;
            sq += r[j] * r[j];
        }
    }
    return 2.0 * (sq / k.rows - squared_norm(mean));
}

double discrimination_loss(const Mat& k_real, const Mat& k_syn_seen, const Mat& k_syn_unseen,
                           Mat* dk_real, Mat* dk_syn_seen, Mat* dk_syn_unseen,
                           double repulsion_clip_norm, double repulsion_margin_factor) {
    check_same_shape(k_real, k_syn_seen, "discrimination_loss matched batches");
    if (k_syn_unseen.cols != k_real.cols)
        throw ShapeError("discrimination_loss: embedding widths differ");
    if (k_real.rows == 0 || k_syn_unseen.rows == 0)
        throw ArgumentError("discrimination_loss: empty batch");
    const int n = k_real.rows;
    const int m = k_syn_unseen.rows;
    const int w = k_real.cols;

    double attract = 0;
    for (int i = 0; i < n; ++i) attract += row_squared_distance(k_real, i, k_syn_seen, i);
    attract /= n;

    // sum_ij ||r_i - u_j||^2 = m*sum||r||^2 + n*sum||u||^2 - 2 (sum r).(sum u)
    Mat sum_r(1, w), sum_u(1, w);
    double sq_r = 0, sq_u = 0;
    for (int i = 0; i < n; ++i) {
        const double* r = k_real.row(i);
        for (int j = 0; j < w; ++j) {
            sum_r(0, j) += r[j];
            sq_r += r[j] * r[j];
        }
    }
    for (int i = 0; i < m; ++i) {
        const double* u = k_syn_unseen.row(i);
        for (int j = 0; j < w; ++j) {
            sum_u(0, j) += u[j];
            sq_u += u[j] * u[j];
        }
    }
    const double nm = static_cast<double>(n) * static_cast<double>(m);
    const double repel = (m * sq_r + n * sq_u - 2.0 * dot(sum_r, sum_u)) / nm;

    if (dk_real || dk_syn_seen || dk_syn_unseen) {
        if (dk_real) *dk_real = Mat(n, w);
        if (dk_syn_seen) *dk_syn_seen = Mat(n, w);
        if (dk_syn_unseen) *dk_syn_unseen = Mat(m, w);

        // Attraction part.
        for (int i = 0; i < n && (dk_real || dk_syn_seen); ++i) {
            const double* r = k_real.row(i);
            const double* s = k_syn_seen.row(i);
            for (int j = 0; j < w; ++j) {
                const double diff = 2.0 * (r[j] - s[j]) / n;
                if (dk_real) (*dk_real)(i, j) += diff;
                if (dk_syn_seen) (*dk_syn_seen)(i, j) -= diff;
            }
        }

        // Repulsion part enters with a minus sign; it is unbounded, so its
        // gradient saturates at the margin and is norm-capped below it.
        const bool saturated =
            repulsion_margin_factor > 0 &&
            repel > repulsion_margin_factor * embedding_spread(k_real);
        if (!saturated) {
            Mat rep_r(n, w), rep_u(m, w);
            for (int i = 0; i < n; ++i) {
                const double* r = k_real.row(i);
                for (int j = 0; j < w; ++j)
                    rep_r(i, j) = -2.0 * (m * r[j] - sum_u(0, j)) / nm;
            }
            for (int i = 0; i < m; ++i) {
                const double* u = k_syn_unseen.row(i);
                for (int j = 0; j < w; ++j)
                    rep_u(i, j) = -2.0 * (n * u[j] - sum_r(0, j)) / nm;
            }
            if (repulsion_clip_norm > 0) {
                const double norm = std::sqrt(squared_norm(rep_r) + squared_norm(rep_u));
                if (norm > repulsion_clip_norm) {
                    const double s = repulsion_clip_norm / norm;
                    scale(rep_r, s);
                    scale(rep_u, s);
                }
            }
            if (dk_real) axpy(1.0, rep_r, *dk_real);
            if (dk_syn_unseen) axpy(1.0, rep_u, *dk_syn_unseen);
        }
    }
    return attract - repel;
}

std::vector<int> sample_contrast_labels(const std::vector<int>& y, int c_seen, Rng& rng) {
    if (c_seen < 2) throw ArgumentError("sample_contrast_labels: need at least two seen classes");
    std::vector<int> yp(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const int draw = 1 + rng.uniform_int(c_seen - 1);  // in [1, c_seen-1]
        int cand = y[i] + draw;
        if (cand > c_seen) cand -= c_seen;
        yp[i] = cand;
    }
    return yp;
}

double center_loss(const Mat& k, const std::vector<int>& y, const std::vector<int>& y_prime,
                   const ClassCenters& centers, Mat* dk) {
    if (k.rows != static_cast<int>(y.size()) || y.size() != y_prime.size())
        throw ShapeError("center_loss: batch sizes differ");
    if (k.cols != centers.centers.cols) throw ShapeError("center_loss: embedding width differs");
    if (k.rows == 0) throw ArgumentError("center_loss: empty batch");
    const int c_seen = centers.centers.rows;
    if (dk) *dk = Mat(k.rows, k.cols);

    double acc = 0;
    for (int i = 0; i < k.rows; ++i) {
        const int yi = y[static_cast<size_t>(i)];
        const int ypi = y_prime[static_cast<size_t>(i)];
        if (yi == ypi) throw ArgumentError("center_loss: contrast label equals true label");
        if (yi < 1 || yi > c_seen || ypi < 1 || ypi > c_seen)
            throw ArgumentError("center_loss: label outside seen set");
        const double d_own = row_squared_distance(k, i, centers.centers, yi - 1);
        const double d_other = row_squared_distance(k, i, centers.centers, ypi - 1);
        const double hinge = centers.delta + d_own - d_other;
        if (hinge > 0) {
            acc += hinge;
            if (dk) {
                // d/dk [||k-Cy||^2 - ||k-Cy'||^2] = 2 (Cy' - Cy)
                const double* cy = centers.centers.row(yi - 1);
                const double* cyp = centers.centers.row(ypi - 1);
                for (int j = 0; j < k.cols; ++j)
                    (*dk)(i, j) += 2.0 * (cyp[j] - cy[j]) / k.rows;
            }
        }
    }
    return acc / k.rows;
}

void update_centers(ClassCenters& centers, const Mat& k, const std::vector<int>& y,
                    double center_lr) {
    if (center_lr <= 0) throw ArgumentError("update_centers: learning rate must be positive");
    if (k.rows != static_cast<int>(y.size())) throw ShapeError("update_centers: batch mismatch");
    if (k.cols != centers.centers.cols)
        throw ShapeError("update_centers: embedding width differs");
    const int c_seen = centers.centers.rows;

    std::vector<int> count(static_cast<size_t>(c_seen), 0);
    Mat delta(c_seen, k.cols);
    for (int i = 0; i < k.rows; ++i) {
        const int yi = y[static_cast<size_t>(i)];
        if (yi < 1 || yi > c_seen) throw ArgumentError("update_centers: label outside seen set");
        count[static_cast<size_t>(yi - 1)] += 1;
        for (int j = 0; j < k.cols; ++j)
            delta(yi - 1, j) += centers.centers(yi - 1, j) - k(i, j);
    }
    for (int c = 0; c < c_seen; ++c) {
        if (count[static_cast<size_t>(c)] == 0) continue;
        const double scale = center_lr / (1.0 + count[static_cast<size_t>(c)]);
        for (int j = 0; j < k.cols; ++j) centers.centers(c, j) -= scale * delta(c, j);
    }
}

double seen_classifier_loss(const Mat& log_probs, const std::vector<int>& y, Mat* d_log_probs) {
    if (log_probs.rows != static_cast<int>(y.size()))
        throw ShapeError("seen_classifier_loss: batch sizes differ");
    if (log_probs.rows == 0) throw ArgumentError("seen_classifier_loss: empty batch");
    if (d_log_probs) *d_log_probs = Mat(log_probs.rows, log_probs.cols);
    double acc = 0;
    for (int i = 0; i < log_probs.rows; ++i) {
        const int yi = y[static_cast<size_t>(i)];
        if (yi < 1 || yi > log_probs.cols)
            throw ArgumentError("seen_classifier_loss: label out of range");
        acc -= log_probs(i, yi - 1);
        if (d_log_probs) (*d_log_probs)(i, yi - 1) = -1.0 / log_probs.rows;
    }
    return acc / log_probs.rows;
}

LossReport assemble_objectives(LossReport terms, const LossWeights& w) {
    for (double v : {terms.l_g1, terms.l_reg_s, terms.l_reg_u, terms.l_g2, terms.l_cls, terms.l_d,
                     terms.l_cen})
        if (!std::isfinite(v)) throw NumericError("assemble_objectives: non-finite term");
    terms.group1 = w.lambda1 * terms.l_g1 + terms.l_reg_s + terms.l_reg_u;
    terms.group2 = w.lambda2 * terms.l_g2 + w.lambda_cls * terms.l_cls + w.lambda_d * terms.l_d +
                   w.lambda_cen * terms.l_cen;
    return terms;
}

}  // namespace bmcogan
