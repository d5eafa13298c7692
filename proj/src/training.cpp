// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "bmcogan/config.hpp"
#include "bmcogan/error.hpp"
#include "bmcogan/version.hpp"

namespace bmcogan {

using nlohmann::json;
namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (lr_main <= 0 || lr_aux <= 0 || pretrain_lr <= 0)
        throw ArgumentError("TrainConfig: learning rates must be positive");
    if (n_critic < 1) throw ArgumentError("TrainConfig: n_critic must be >= 1");
    if (batch_size < 1) throw ArgumentError("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw ArgumentError("TrainConfig: epochs must be >= 0");
    if (weights.lambda1 < 0 || weights.lambda2 < 0 || weights.lambda_d < 0 ||
        weights.lambda_cls < 0 || weights.lambda_cen < 0 || weights.gp_coeff < 0)
        throw ArgumentError("TrainConfig: loss weights must be non-negative");
    if (weights.delta <= 0) throw ArgumentError("TrainConfig: margin delta must be positive");
}

ModelDims TrainConfig::dims_for(const DatasetMeta& meta) const {
    ModelDims d;
    d.dx = meta.dx;
    d.a_dim = meta.a_dim;
    d.c_seen = meta.c_seen;
    d.dz = dz;
    d.gen_hidden = gen_hidden;
    d.reg_hidden = reg_hidden;
    d.disc_hidden = disc_hidden;
    d.critic_hidden = critic_hidden;
    return d;
}

namespace {

std::vector<Mat*> linear_params(Linear& l) { return {&l.W, &l.b}; }

std::vector<Mat*> gen_params(Generator& g) {
    std::vector<Mat*> v = {&g.hidden.W, &g.hidden.b, &g.out.W, &g.out.b};
    if (g.split_output) {
        v.push_back(&g.out_u.W);
        v.push_back(&g.out_u.b);
    }
    return v;
}

std::vector<Mat*> reg_params(Regressor& r) {
    return {&r.hidden.W, &r.hidden.b, &r.out.W, &r.out.b};
}

std::vector<Mat*> cdisc_params(CoupledDiscriminator& d) {
    std::vector<Mat*> v = {&d.stem_s.W, &d.stem_s.b, &d.stem_u.W, &d.stem_u.b, &d.head.W,
                           &d.head.b};
    if (!d.shared_head) {
        v.push_back(&d.head_u.W);
        v.push_back(&d.head_u.b);
    }
    return v;
}

std::vector<Mat*> critic_params(Critic& c) {
    return {&c.hidden.W, &c.hidden.b, &c.out.W, &c.out.b};
}

std::vector<const Mat*> const_view(const std::vector<Mat*>& v) {
    return std::vector<const Mat*>(v.begin(), v.end());
}

void add_scaled_linear(Linear& dst, const Linear& src, double alpha) {
    axpy(alpha, src.W, dst.W);
    axpy(alpha, src.b, dst.b);
}

double effective(double lambda, bool dropped) { return dropped ? 0.0 : lambda; }

}  // namespace

TrainState init_train_state(const GZSLDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.model = init_model(cfg.dims_for(ds.meta), cfg.seed, cfg.ablation);
    st.model.centers.delta = cfg.weights.delta;
    st.rng = Rng(cfg.seed, 11);

    const AdamParams main_hp{cfg.lr_main, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    const AdamParams aux_hp{cfg.lr_aux, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    st.opt_gen = Adam(main_hp);
    st.opt_gen.attach(gen_params(st.model.gen));
    st.opt_reg_s = Adam(aux_hp);
    st.opt_reg_s.attach(reg_params(st.model.reg_s));
    if (!st.model.shared_regressor()) {
        st.opt_reg_u = Adam(aux_hp);
        st.opt_reg_u.attach(reg_params(st.model.reg_u));
    }
    st.opt_cdisc = Adam(aux_hp);
    st.opt_cdisc.attach(cdisc_params(st.model.cdisc));
    st.opt_critic = Adam(main_hp);
    st.opt_critic.attach(critic_params(st.model.critic));
    return st;
}

Classifier pretrain_classifier(const GZSLDataset& ds, const TrainConfig& cfg) {
    if (ds.train_features.rows == 0) throw ArgumentError("pretrain_classifier: empty train set");
    std::set<int> distinct(ds.train_labels.begin(), ds.train_labels.end());
    if (distinct.size() < 2)
        throw ArgumentError("pretrain_classifier: need at least two seen classes");

    Classifier clf;
    {
        Rng init_rng(cfg.seed, 13);
        clf.lin = Linear(ds.meta.c_seen, ds.meta.dx);
        const double sigma = 1.0 / std::sqrt(static_cast<double>(ds.meta.dx));
        for (double& v : clf.lin.W.d) v = sigma * init_rng.normal();
    }

    Adam opt(AdamParams{cfg.pretrain_lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8});
    auto params = linear_params(clf.lin);
    opt.attach(params);

    Rng shuffle_rng(cfg.seed, 14);
    const int n = ds.train_features.rows;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const auto perm = shuffle_rng.permutation(n);
        for (int at = 0; at < n; at += cfg.batch_size) {
            const int take = std::min(cfg.batch_size, n - at);
            std::vector<int> idx(perm.begin() + at, perm.begin() + at + take);
            const Mat x = gather_rows(ds.train_features, idx);
            std::vector<int> y(static_cast<size_t>(take));
            for (int i = 0; i < take; ++i)
                y[static_cast<size_t>(i)] = ds.train_labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];

            const Mat logp = clf.forward_logp(x);
            Mat dlogp;
            seen_classifier_loss(logp, y, &dlogp);
            Classifier grads;
            grads.lin = Linear(clf.lin.out_dim(), clf.lin.in_dim());
            clf.backward_logp(x, logp, dlogp, grads);
            opt.step(params, const_view(linear_params(grads.lin)));
        }
    }
    return clf;
}

Mat sample_unseen_semantics(const SemanticTable& table, int n, Rng& rng) {
    if (table.c_unseen < 1) throw ArgumentError("sample_unseen_semantics: no unseen classes");
    Mat out(n, table.a_dim());
    for (int i = 0; i < n; ++i) {
        const int pick = table.c_seen + 1 + rng.uniform_int(table.c_unseen);
        const double* row = table.semantic_of(pick);
        std::copy(row, row + table.a_dim(), out.row(i));
    }
    return out;
}

LossReport train_step(TrainState& state, const Batch& batch_seen, const Mat& a_unseen,
                      const TrainConfig& cfg) {
    BMCoGANModel& m = state.model;
    const int bs = batch_seen.x.rows;
    if (bs == 0) throw ArgumentError("train_step: empty batch");
    if (a_unseen.rows == 0) throw ArgumentError("train_step: empty unseen semantic batch");

    const bool wo_lg2 = cfg.ablation == Ablation::wo_LG2;
    const bool wo_ld = cfg.ablation == Ablation::wo_Ld;
    const bool wo_lcls = cfg.ablation == Ablation::wo_Lcls;
    const bool wo_lcen = cfg.ablation == Ablation::wo_Lcen;
    const double lam_d = effective(cfg.weights.lambda_d, wo_ld);
    const double lam_cls = effective(cfg.weights.lambda_cls, wo_lcls);
    const double lam_cen = effective(cfg.weights.lambda_cen, wo_lcen);
    const double lam_2 = effective(cfg.weights.lambda2, wo_lg2);

    LossReport rep;
    rep.step = state.step;

    auto draw_noise = [&](int rows) {
        Mat z(rows, m.dims.dz);
        for (double& v : z.d) v = state.rng.normal();
        return z;
    };

    // (i) Wasserstein critic updates on real vs synthesized seen pairs.
    if (!wo_lg2) {
        auto params = critic_params(m.critic);
        for (int it = 0; it < cfg.n_critic; ++it) {
            const Mat z = draw_noise(bs);
            const Mat x_fake = m.gen.forward(z, batch_seen.a, Domain::seen).x;
            const auto f_real = m.critic.forward(batch_seen.x, batch_seen.a);
            const auto f_fake = m.critic.forward(x_fake, batch_seen.a);

            Critic gp_grads;
            gp_grads.hidden = Linear(m.critic.hidden.out_dim(), m.critic.hidden.in_dim());
            gp_grads.out = Linear(1, m.critic.out.in_dim());
            const double gp = gradient_penalty(m.critic, batch_seen.x, x_fake, batch_seen.a,
                                               state.rng, &gp_grads);

            Critic grads;
            grads.hidden = Linear(m.critic.hidden.out_dim(), m.critic.hidden.in_dim());
            grads.out = Linear(1, m.critic.out.in_dim());
            Mat ds_fake(bs, 1, 1.0 / bs);
            Mat ds_real(bs, 1, -1.0 / bs);
            m.critic.backward(f_fake, &ds_fake, nullptr, grads);
            m.critic.backward(f_real, &ds_real, nullptr, grads);
            add_scaled_linear(grads.hidden, gp_grads.hidden, cfg.weights.gp_coeff);
            add_scaled_linear(grads.out, gp_grads.out, cfg.weights.gp_coeff);

            const auto wl =
                wgan_losses(f_real.score, f_fake.score, gp, cfg.weights.gp_coeff);
            rep.critic = wl.critic_loss;
            rep.grad_penalty = gp;

            state.opt_critic.step(params, const_view(critic_params(grads)));
        }
    }

    // (ii) Coupled discriminator update on real vs reconstructed semantics.
    {
        const Mat z_s = draw_noise(bs);
        const Mat x_syn_s = m.gen.forward(z_s, batch_seen.a, Domain::seen).x;
        const Mat a_hat_s = m.regressor(Domain::seen).forward(x_syn_s).a_hat;
        const Mat z_u = draw_noise(a_unseen.rows);
        const Mat x_syn_u = m.gen.forward(z_u, a_unseen, Domain::unseen).x;
        const Mat a_hat_u = m.regressor(Domain::unseen).forward(x_syn_u).a_hat;

        const auto f_rs = m.cdisc.forward(batch_seen.a, Domain::seen);
        const auto f_fs = m.cdisc.forward(a_hat_s, Domain::seen);
        const auto f_ru = m.cdisc.forward(a_unseen, Domain::unseen);
        const auto f_fu = m.cdisc.forward(a_hat_u, Domain::unseen);

        Mat d_rs, d_fs, d_ru, d_fu;
        rep.coupled_disc = coupled_disc_loss(f_rs.logit, f_fs.logit, f_ru.logit, f_fu.logit,
                                             &d_rs, &d_fs, &d_ru, &d_fu);

        BMCoGANModel grads = zeros_like(m);
        m.cdisc.backward(f_rs, batch_seen.a, Domain::seen, d_rs, grads.cdisc);
        m.cdisc.backward(f_fs, a_hat_s, Domain::seen, d_fs, grads.cdisc);
        m.cdisc.backward(f_ru, a_unseen, Domain::unseen, d_ru, grads.cdisc);
        m.cdisc.backward(f_fu, a_hat_u, Domain::unseen, d_fu, grads.cdisc);
        state.opt_cdisc.step(cdisc_params(m.cdisc), const_view(cdisc_params(grads.cdisc)));
    }

    // Group-1 generator gradients, optionally merged into the group-2 step.
    BMCoGANModel gen_grads_g1 = zeros_like(m);

    // (iii) Group 1: bidirectional mapping (generator + regressors).
    {
        const Mat z_s = draw_noise(bs);
        const auto f_gs = m.gen.forward(z_s, batch_seen.a, Domain::seen);
        const auto f_rs = m.regressor(Domain::seen).forward(f_gs.x);
        const Mat z_u = draw_noise(a_unseen.rows);
        const auto f_gu = m.gen.forward(z_u, a_unseen, Domain::unseen);
        const auto f_ru = m.regressor(Domain::unseen).forward(f_gu.x);

        const auto f_ds = m.cdisc.forward(f_rs.a_hat, Domain::seen);
        const auto f_du = m.cdisc.forward(f_ru.a_hat, Domain::unseen);

        Mat d_ls, d_lu;
        rep.l_g1 = coupled_gen_loss(f_ds.logit, f_du.logit, &d_ls, &d_lu);
        scale(d_ls, cfg.weights.lambda1);
        scale(d_lu, cfg.weights.lambda1);

        Mat d_ahat_s_reg, d_ahat_u_reg;
        rep.l_reg_s = regression_loss(batch_seen.a, f_rs.a_hat, &d_ahat_s_reg);
        rep.l_reg_u = regression_loss(a_unseen, f_ru.a_hat, &d_ahat_u_reg);

        BMCoGANModel sink = zeros_like(m);  // discriminator side is frozen here
        Mat d_ahat_s_adv, d_ahat_u_adv;
        m.cdisc.backward(f_ds, f_rs.a_hat, Domain::seen, d_ls, sink.cdisc, &d_ahat_s_adv);
        m.cdisc.backward(f_du, f_ru.a_hat, Domain::unseen, d_lu, sink.cdisc, &d_ahat_u_adv);
        axpy(1.0, d_ahat_s_reg, d_ahat_s_adv);
        axpy(1.0, d_ahat_u_reg, d_ahat_u_adv);

        Mat dx_s, dx_u;
        m.regressor(Domain::seen).backward(f_rs, f_gs.x, d_ahat_s_adv,
                                           gen_grads_g1.regressor(Domain::seen), &dx_s);
        m.regressor(Domain::unseen).backward(f_ru, f_gu.x, d_ahat_u_adv,
                                             gen_grads_g1.regressor(Domain::unseen), &dx_u);
        m.gen.backward(f_gs, dx_s, Domain::seen, gen_grads_g1.gen);
        m.gen.backward(f_gu, dx_u, Domain::unseen, gen_grads_g1.gen);

        if (cfg.regress_real_features) {
            const auto f_real_reg = m.regressor(Domain::seen).forward(batch_seen.x);
            Mat d_real;
            rep.l_reg_s += regression_loss(batch_seen.a, f_real_reg.a_hat, &d_real);
            m.regressor(Domain::seen).backward(f_real_reg, batch_seen.x, d_real,
                                               gen_grads_g1.regressor(Domain::seen), nullptr);
        }

        state.opt_reg_s.step(reg_params(m.reg_s), const_view(reg_params(gen_grads_g1.reg_s)));
        if (!m.shared_regressor())
            state.opt_reg_u.step(reg_params(m.reg_u), const_view(reg_params(gen_grads_g1.reg_u)));
        if (!cfg.combined_gen_update)
            state.opt_gen.step(gen_params(m.gen), const_view(gen_params(gen_grads_g1.gen)));
    }

    // (iv) Group 2: Wasserstein supervision, classifier decision, push/pull,
    // center hinge. The generator and the critic early layers both descend.
    {
        const Mat z_s = draw_noise(bs);
        const auto f_gs = m.gen.forward(z_s, batch_seen.a, Domain::seen);
        const Mat z_u = draw_noise(a_unseen.rows);
        const auto f_gu = m.gen.forward(z_u, a_unseen, Domain::unseen);

        const auto f_syn_s = m.critic.forward(f_gs.x, batch_seen.a);
        const auto f_syn_u = m.critic.forward(f_gu.x, a_unseen);
        const auto f_real = m.critic.forward(batch_seen.x, batch_seen.a);

        Mat dx_s(bs, m.dims.dx);
        Mat dx_u(a_unseen.rows, m.dims.dx);
        bool unseen_has_grad = false;

        // Embedding-space gradients for the critic's early layers.
        Mat dk_real(bs, m.dims.critic_hidden);
        Mat dk_syn_s(bs, m.dims.critic_hidden);
        Mat dk_syn_u(a_unseen.rows, m.dims.critic_hidden);

        if (lam_d != 0.0) {
            Mat g_r, g_s, g_u;
            rep.l_d = discrimination_loss(f_real.k, f_syn_s.k, f_syn_u.k, &g_r, &g_s, &g_u,
                                          cfg.clip_norm, cfg.repulsion_margin);
            axpy(lam_d, g_r, dk_real);
            axpy(lam_d, g_s, dk_syn_s);
            axpy(lam_d, g_u, dk_syn_u);
            unseen_has_grad = true;
        } else if (!wo_ld) {
            rep.l_d = discrimination_loss(f_real.k, f_syn_s.k, f_syn_u.k);
        }

        if (lam_cen != 0.0) {
            const Mat k_cat = concat_rows(f_real.k, f_syn_s.k);
            std::vector<int> y_cat = batch_seen.y;
            y_cat.insert(y_cat.end(), batch_seen.y.begin(), batch_seen.y.end());
            const auto y_prime = sample_contrast_labels(y_cat, m.dims.c_seen, state.rng);
            Mat dk_cat;
            rep.l_cen = center_loss(k_cat, y_cat, y_prime, m.centers, &dk_cat);
            for (int i = 0; i < bs; ++i)
                for (int j = 0; j < m.dims.critic_hidden; ++j) {
                    dk_real(i, j) += lam_cen * dk_cat(i, j);
                    dk_syn_s(i, j) += lam_cen * dk_cat(bs + i, j);
                }
        }

        BMCoGANModel early_grads = zeros_like(m);
        const bool early_active = lam_d != 0.0 || lam_cen != 0.0;
        if (early_active) {
            Mat du_s, du_u;
            m.critic.backward_early(f_real, dk_real, early_grads.critic, nullptr);
            m.critic.backward_early(f_syn_s, dk_syn_s, early_grads.critic, &du_s);
            m.critic.backward_early(f_syn_u, dk_syn_u, early_grads.critic, &du_u);
            axpy(1.0, slice_cols(du_s, 0, m.dims.dx), dx_s);
            axpy(1.0, slice_cols(du_u, 0, m.dims.dx), dx_u);
        }

        if (lam_2 != 0.0) {
            rep.l_g2 = 0;
            for (int i = 0; i < bs; ++i) rep.l_g2 -= f_syn_s.score(i, 0);
            rep.l_g2 /= bs;
            BMCoGANModel sink = zeros_like(m);
            Mat dscore(bs, 1, -lam_2 / bs);
            Mat du;
            m.critic.backward(f_syn_s, &dscore, nullptr, sink.critic, &du);
            axpy(1.0, slice_cols(du, 0, m.dims.dx), dx_s);
        }

        if (lam_cls != 0.0) {
            const Mat logp = m.classifier.forward_logp(f_gs.x);
            Mat dlogp;
            rep.l_cls = seen_classifier_loss(logp, batch_seen.y, &dlogp);
            BMCoGANModel sink = zeros_like(m);
            Mat dxc;
            m.classifier.backward_logp(f_gs.x, logp, dlogp, sink.classifier, &dxc);
            axpy(lam_cls, dxc, dx_s);
        }

        BMCoGANModel gen_grads_g2 = zeros_like(m);
        m.gen.backward(f_gs, dx_s, Domain::seen, gen_grads_g2.gen);
        if (unseen_has_grad || early_active)
            m.gen.backward(f_gu, dx_u, Domain::unseen, gen_grads_g2.gen);

        if (cfg.combined_gen_update) {
            auto dst = gen_params(gen_grads_g2.gen);
            auto src = gen_params(gen_grads_g1.gen);
            for (size_t i = 0; i < dst.size(); ++i) axpy(1.0, *src[i], *dst[i]);
        }
        state.opt_gen.step(gen_params(m.gen), const_view(gen_params(gen_grads_g2.gen)));

        if (early_active) {
            // Hidden layer only; the Wasserstein score head stays adversarial.
            state.opt_critic.step_subset(critic_params(m.critic),
                                         const_view(critic_params(early_grads.critic)), {0, 1});
        }

        // (v) Center update from the real seen embeddings of this batch.
        if (!wo_lcen) update_centers(m.centers, f_real.k, batch_seen.y, cfg.lr_main);
    }

    rep = assemble_objectives(rep, cfg.weights);
    state.step += 1;
    rep.step = state.step;

    if (!rep.all_finite()) {
        const char* term = nullptr;
        if (!std::isfinite(rep.l_g1)) term = "L_G1";
        else if (!std::isfinite(rep.l_reg_s)) term = "L_Reg_s";
        else if (!std::isfinite(rep.l_reg_u)) term = "L_Reg_u";
        else if (!std::isfinite(rep.l_g2)) term = "L_G2";
        else if (!std::isfinite(rep.l_cls)) term = "L_cls";
        else if (!std::isfinite(rep.l_d)) term = "L_d";
        else if (!std::isfinite(rep.l_cen)) term = "L_cen";
        else if (!std::isfinite(rep.critic)) term = "critic";
        else term = "objective";
        throw NumericError("training aborted: non-finite " + std::string(term) + " at step " +
                           std::to_string(rep.step));
    }
    return rep;
}

namespace {

void write_run_manifest(const fs::path& run_dir, const TrainConfig& cfg, const GZSLDataset& ds,
                        const TrainState& state) {
    json j{{"artifact", std::string("bmcogan ") + kVersionString},
           {"config", train_config_to_json(cfg)},
           {"seed", cfg.seed},
           {"dataset", {{"name", ds.meta.name}, {"hash", dataset_content_hash(ds)}}},
           {"steps", state.step},
           {"epochs_done", state.epoch}};
    const fs::path tmp = run_dir / "run_manifest.json.tmp";
    std::ofstream f(tmp);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << j.dump(2) << "\n";
    f.close();
    fs::rename(tmp, run_dir / "run_manifest.json");
}

void snapshot_iter(TrainState& state, BatchIterator& it) {
    state.iter.rng = it.rng().state();
    state.iter.perm = it.permutation();
    state.iter.cursor = it.cursor();
}

TrainState run_epochs(TrainState state, const GZSLDataset& ds, const TrainConfig& cfg,
                      const TrainHooks& hooks, bool resumed) {
    BatchIterator it(ds, cfg.batch_size, cfg.seed);
    if (resumed)
        it.restore(state.iter.rng, state.iter.perm, state.iter.cursor);
    else
        snapshot_iter(state, it);

    if (!hooks.run_dir.empty()) fs::create_directories(hooks.run_dir / "checkpoints");
    if (hooks.log && state.step == 0) *hooks.log << LossReport::log_header() << "\n";

    Batch batch;
    while (state.epoch < cfg.epochs) {
        while (it.next(batch)) {
            const Mat a_unseen =
                sample_unseen_semantics(ds.semantics, batch.x.rows, state.rng);
            const LossReport rep = train_step(state, batch, a_unseen, cfg);
            state.history.push_back(rep);
            snapshot_iter(state, it);
            if (hooks.log && cfg.log_every > 0 && rep.step % cfg.log_every == 0)
                *hooks.log << rep.log_line() << "\n";
            if (!hooks.run_dir.empty() && cfg.checkpoint_every > 0 &&
                rep.step % cfg.checkpoint_every == 0)
                save_checkpoint(state, cfg,
                                hooks.run_dir / "checkpoints" /
                                    ("step_" + std::to_string(rep.step) + ".ckpt"));
        }
        // Reshuffle unconditionally so a run halted here and a run that
        // continues observe identical iterator state (resume equivalence).
        state.epoch += 1;
        it.reshuffle();
        snapshot_iter(state, it);
    }

    if (!hooks.run_dir.empty()) {
        save_checkpoint(state, cfg, hooks.run_dir / "checkpoints" / "final.ckpt");
        write_run_manifest(hooks.run_dir, cfg, ds, state);
    }
    return state;
}

}  // namespace

TrainState train(const GZSLDataset& ds, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    TrainState state = init_train_state(ds, cfg);
    if (cfg.epochs == 0) return state;  // untouched initial state

    if (cfg.ablation != Ablation::wo_Lcls) {
        state.model.classifier = pretrain_classifier(ds, cfg);
        state.classifier_trained = true;
    }
    return run_epochs(std::move(state), ds, cfg, hooks, /*resumed=*/false);
}

TrainState resume_training(const GZSLDataset& ds, const fs::path& checkpoint,
                           const TrainHooks& hooks) {
    auto loaded = load_checkpoint(checkpoint);
    return run_epochs(std::move(loaded.state), ds, loaded.config, hooks, /*resumed=*/true);
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, JSON header, f64 tensor payload.

namespace {

constexpr char kMagic[8] = {'B', 'M', 'C', 'G', 'C', 'K', 'P', '1'};
constexpr uint32_t kCkptVersion = 1;

struct NamedTensor {
    std::string name;
    const Mat* m;
};

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t parse_hex64(const std::string& s) { return std::strtoull(s.c_str(), nullptr, 16); }

json rng_to_json(const std::array<uint64_t, 4>& s) {
    json arr = json::array();
    for (uint64_t w : s) arr.push_back(hex64(w));
    return arr;
}

std::array<uint64_t, 4> rng_from_json(const json& arr) {
    std::array<uint64_t, 4> s{};
    for (size_t i = 0; i < 4; ++i) s[i] = parse_hex64(arr.at(i).get<std::string>());
    return s;
}

void collect_adam(std::vector<NamedTensor>& tensors, json& meta, const std::string& name,
                  const Adam& opt) {
    json ts = json::array();
    for (size_t i = 0; i < opt.slots().size(); ++i) {
        const auto& slot = opt.slots()[i];
        tensors.push_back({"adam." + name + "." + std::to_string(i) + ".m", &slot.m});
        tensors.push_back({"adam." + name + "." + std::to_string(i) + ".v", &slot.v});
        ts.push_back(slot.t);
    }
    meta[name] = std::move(ts);
}

void restore_adam(const std::map<std::string, Mat>& loaded, const json& meta,
                  const std::string& name, Adam& opt) {
    const auto& ts = meta.at(name);
    if (ts.size() != opt.slots().size())
        throw SchemaError("checkpoint: optimizer " + name + " slot count mismatch");
    for (size_t i = 0; i < opt.slots().size(); ++i) {
        auto& slot = opt.slots()[i];
        const auto m_it = loaded.find("adam." + name + "." + std::to_string(i) + ".m");
        const auto v_it = loaded.find("adam." + name + "." + std::to_string(i) + ".v");
        if (m_it == loaded.end() || v_it == loaded.end())
            throw SchemaError("checkpoint: missing optimizer tensor for " + name);
        check_same_shape(slot.m, m_it->second, "checkpoint adam.m");
        check_same_shape(slot.v, v_it->second, "checkpoint adam.v");
        slot.m = m_it->second;
        slot.v = v_it->second;
        slot.t = ts.at(i).get<int64_t>();
    }
}

}  // namespace

std::string config_hash(const TrainConfig& cfg) {
    const std::string dump = train_config_to_json(cfg).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const fs::path& path) {
    auto& model = const_cast<BMCoGANModel&>(state.model);

    std::vector<NamedTensor> tensors;
    for (const auto& p : model_params(model)) tensors.push_back({p.name, p.p});

    json adam_meta;
    collect_adam(tensors, adam_meta, "gen", state.opt_gen);
    collect_adam(tensors, adam_meta, "reg_s", state.opt_reg_s);
    if (!model.shared_regressor()) collect_adam(tensors, adam_meta, "reg_u", state.opt_reg_u);
    collect_adam(tensors, adam_meta, "cdisc", state.opt_cdisc);
    collect_adam(tensors, adam_meta, "critic", state.opt_critic);

    // Loss history rides along as one tensor: 13 doubles per step.
    Mat history(static_cast<int>(state.history.size()), 13);
    for (size_t i = 0; i < state.history.size(); ++i) {
        const auto& r = state.history[i];
        double* row = history.row(static_cast<int>(i));
        row[0] = static_cast<double>(r.step);
        row[1] = r.l_g1;
        row[2] = r.l_reg_s;
        row[3] = r.l_reg_u;
        row[4] = r.l_g2;
        row[5] = r.l_cls;
        row[6] = r.l_d;
        row[7] = r.l_cen;
        row[8] = r.group1;
        row[9] = r.group2;
        row[10] = r.coupled_disc;
        row[11] = r.critic;
        row[12] = r.grad_penalty;
    }
    tensors.push_back({"history", &history});

    json tlist = json::array();
    for (const auto& t : tensors)
        tlist.push_back({{"name", t.name}, {"rows", t.m->rows}, {"cols", t.m->cols}});

    json header{{"version", kCkptVersion},
                {"artifact", std::string("bmcogan ") + kVersionString},
                {"config", train_config_to_json(cfg)},
                {"config_hash", config_hash(cfg)},
                {"dims",
                 {{"dx", model.dims.dx},
                  {"a_dim", model.dims.a_dim},
                  {"dz", model.dims.dz},
                  {"c_seen", model.dims.c_seen},
                  {"gen_hidden", model.dims.gen_hidden},
                  {"reg_hidden", model.dims.reg_hidden},
                  {"disc_hidden", model.dims.disc_hidden},
                  {"critic_hidden", model.dims.critic_hidden}}},
                {"ablation", to_string(model.ablation)},
                {"delta", model.centers.delta},
                {"step", state.step},
                {"epoch", state.epoch},
                {"classifier_trained", state.classifier_trained},
                {"rng", rng_to_json(state.rng.state())},
                {"iter",
                 {{"rng", rng_to_json(state.iter.rng)},
                  {"perm", state.iter.perm},
                  {"cursor", state.iter.cursor}}},
                {"adam_t", adam_meta},
                {"tensors", tlist}};

    const std::string hdr = header.dump();
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(kMagic, sizeof(kMagic));
        const uint32_t ver = kCkptVersion;
        f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
        const uint64_t hlen = hdr.size();
        f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
        for (const auto& t : tensors)
            f.write(reinterpret_cast<const char*>(t.m->d.data()),
                    static_cast<std::streamsize>(t.m->size() * sizeof(double)));
        if (!f) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw VersionError("cannot open checkpoint: " + path.string());

    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw VersionError("not a bmcogan checkpoint: " + path.string());
    uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (!f || ver != kCkptVersion)
        throw VersionError("unsupported checkpoint version " + std::to_string(ver) +
                           " (expected " + std::to_string(kCkptVersion) + ")");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f) throw LoadError("truncated checkpoint header");
    std::string hdr(hlen, '\0');
    f.read(hdr.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw LoadError("truncated checkpoint header");

    json header;
    try {
        header = json::parse(hdr);
    } catch (const json::exception& e) {
        throw LoadError("corrupt checkpoint header: " + std::string(e.what()));
    }

    LoadedCheckpoint out;
    try {
        out.config = train_config_from_json(header.at("config"));

        ModelDims dims;
        const auto& dj = header.at("dims");
        dims.dx = dj.at("dx").get<int>();
        dims.a_dim = dj.at("a_dim").get<int>();
        dims.dz = dj.at("dz").get<int>();
        dims.c_seen = dj.at("c_seen").get<int>();
        dims.gen_hidden = dj.at("gen_hidden").get<int>();
        dims.reg_hidden = dj.at("reg_hidden").get<int>();
        dims.disc_hidden = dj.at("disc_hidden").get<int>();
        dims.critic_hidden = dj.at("critic_hidden").get<int>();
        const Ablation ab = parse_ablation(header.at("ablation").get<std::string>());

        TrainState& st = out.state;
        st.model = init_model(dims, 0, ab);
        st.model.centers.delta = header.at("delta").get<double>();
        st.step = header.at("step").get<long>();
        st.epoch = header.at("epoch").get<int>();
        st.classifier_trained = header.at("classifier_trained").get<bool>();
        st.rng.set_state(rng_from_json(header.at("rng")));
        st.iter.rng = rng_from_json(header.at("iter").at("rng"));
        st.iter.perm = header.at("iter").at("perm").get<std::vector<int>>();
        st.iter.cursor = header.at("iter").at("cursor").get<int>();

        // Payload: read every tensor in declared order, then verify EOF.
        std::map<std::string, Mat> loaded;
        for (const auto& tj : header.at("tensors")) {
            Mat m(tj.at("rows").get<int>(), tj.at("cols").get<int>());
            f.read(reinterpret_cast<char*>(m.d.data()),
                   static_cast<std::streamsize>(m.size() * sizeof(double)));
            if (!f) throw LoadError("truncated checkpoint payload at tensor " +
                                    tj.at("name").get<std::string>());
            loaded.emplace(tj.at("name").get<std::string>(), std::move(m));
        }
        char probe;
        f.read(&probe, 1);
        if (!f.eof()) throw LoadError("trailing bytes after checkpoint payload");

        for (auto& p : model_params(st.model)) {
            const auto it = loaded.find(p.name);
            if (it == loaded.end())
                throw SchemaError("checkpoint missing model tensor " + p.name);
            check_same_shape(*p.p, it->second, "checkpoint tensor");
            *p.p = it->second;
        }

        const AdamParams main_hp{out.config.lr_main, out.config.adam_beta1,
                                 out.config.adam_beta2, 1e-8};
        const AdamParams aux_hp{out.config.lr_aux, out.config.adam_beta1, out.config.adam_beta2,
                                1e-8};
        st.opt_gen = Adam(main_hp);
        st.opt_gen.attach(gen_params(st.model.gen));
        st.opt_reg_s = Adam(aux_hp);
        st.opt_reg_s.attach(reg_params(st.model.reg_s));
        if (!st.model.shared_regressor()) {
            st.opt_reg_u = Adam(aux_hp);
            st.opt_reg_u.attach(reg_params(st.model.reg_u));
        }
        st.opt_cdisc = Adam(aux_hp);
        st.opt_cdisc.attach(cdisc_params(st.model.cdisc));
        st.opt_critic = Adam(main_hp);
        st.opt_critic.attach(critic_params(st.model.critic));

        const auto& adam_meta = header.at("adam_t");
        restore_adam(loaded, adam_meta, "gen", st.opt_gen);
        restore_adam(loaded, adam_meta, "reg_s", st.opt_reg_s);
        if (!st.model.shared_regressor()) restore_adam(loaded, adam_meta, "reg_u", st.opt_reg_u);
        restore_adam(loaded, adam_meta, "cdisc", st.opt_cdisc);
        restore_adam(loaded, adam_meta, "critic", st.opt_critic);

        const auto hist_it = loaded.find("history");
        if (hist_it != loaded.end()) {
            const Mat& h = hist_it->second;
            st.history.resize(static_cast<size_t>(h.rows));
            for (int i = 0; i < h.rows; ++i) {
                LossReport& r = st.history[static_cast<size_t>(i)];
                const double* row = h.row(i);
                r.step = static_cast<long>(row[0]);
                r.l_g1 = row[1];
                r.l_reg_s = row[2];
                r.l_reg_u = row[3];
                r.l_g2 = row[4];
                r.l_cls = row[5];
                r.l_d = row[6];
                r.l_cen = row[7];
                r.group1 = row[8];
                r.group2 = row[9];
                r.coupled_disc = row[10];
                r.critic = row[11];
                r.grad_penalty = row[12];
            }
        }
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint header field error: " + std::string(e.what()));
    }
    return out;
}

}  // namespace bmcogan
