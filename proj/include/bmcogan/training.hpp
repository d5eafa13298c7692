// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bmcogan/dataset.hpp"
#include "bmcogan/losses.hpp"
#include "bmcogan/model.hpp"
#include "bmcogan/optim.hpp"

namespace bmcogan {

struct TrainConfig {
    LossWeights weights;
    double lr_main = 1e-4;   // generator, critic, centers
    double lr_aux = 2e-4;    // regressors, coupled discriminators
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int n_critic = 5;
    int batch_size = 64;
    int epochs = 10;
    uint64_t seed = 0;
    double clip_norm = 5.0;          // cap on the unseen repulsion gradient
    double repulsion_margin = 1.0;   // stop repelling past this multiple of
                                     // the real-seen embedding spread; 0 = off
    Ablation ablation = Ablation::full;

    // Architecture knobs; <= 0 picks the documented default.
    int dz = -1;
    int gen_hidden = 4096;
    int reg_hidden = 1024;
    int disc_hidden = 256;
    int critic_hidden = 1024;

    // Group-1 and group-2 generator gradients are applied alternately by
    // default; combined applies one summed step per outer iteration.
    bool combined_gen_update = false;
    // Adds || a - R_s(x_real) ||^2 to group 1 alongside the synthesized term.
    bool regress_real_features = false;

    int pretrain_epochs = 30;
    double pretrain_lr = 1e-3;

    int checkpoint_every = 0;  // outer steps; 0 = only the final checkpoint
    int log_every = 1;

    void validate() const;
    ModelDims dims_for(const DatasetMeta& meta) const;
};

// Snapshot of the batch iterator so training can resume mid-epoch.
struct IterState {
    std::array<uint64_t, 4> rng{};
    std::vector<int> perm;
    int cursor = 0;
};

struct TrainState {
    BMCoGANModel model;
    Adam opt_gen;
    Adam opt_reg_s;
    Adam opt_reg_u;
    Adam opt_cdisc;
    Adam opt_critic;
    long step = 0;
    int epoch = 0;
    Rng rng;  // master stream: noise, interpolation, contrast labels, sampling
    IterState iter;
    std::vector<LossReport> history;
    bool classifier_trained = false;
};

TrainState init_train_state(const GZSLDataset& ds, const TrainConfig& cfg);

// Cross-entropy training of the frozen seen classifier on real features.
Classifier pretrain_classifier(const GZSLDataset& ds, const TrainConfig& cfg);

// Uniform-with-replacement batch of unseen class semantics.
Mat sample_unseen_semantics(const SemanticTable& table, int n, Rng& rng);

// One outer optimization step: n_critic critic updates, one coupled
// discriminator update, one group-1 update (generator + regressors), one
// group-2 update (generator + critic early layers), then a center update.
LossReport train_step(TrainState& state, const Batch& batch_seen, const Mat& a_unseen,
                      const TrainConfig& cfg);

struct TrainHooks {
    std::ostream* log = nullptr;                      // one line per outer step
    std::filesystem::path run_dir;                    // empty: no checkpoints
};

TrainState train(const GZSLDataset& ds, const TrainConfig& cfg, const TrainHooks& hooks = {});
// Continue a checkpointed run on the same dataset until cfg.epochs complete.
TrainState resume_training(const GZSLDataset& ds, const std::filesystem::path& checkpoint,
                           const TrainHooks& hooks = {});

void save_checkpoint(const TrainState& state, const TrainConfig& cfg,
                     const std::filesystem::path& path);
struct LoadedCheckpoint {
    TrainState state;
    TrainConfig config;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string config_hash(const TrainConfig& cfg);

}  // namespace bmcogan
