// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "bmcogan/dataset.hpp"
#include "bmcogan/model.hpp"

namespace bmcogan {

struct SynthesisConfig {
    int n_per_class = 400;
    uint64_t seed = 0;
    bool use_D_transform = true;
};

enum class FinalClassifierKind { softmax, knn };
FinalClassifierKind parse_classifier_kind(const std::string& s);
std::string to_string(FinalClassifierKind k);

struct FinalClassifierConfig {
    FinalClassifierKind kind = FinalClassifierKind::softmax;
    int knn_k = 1;
    int softmax_epochs = 100;
    double softmax_lr = 1e-2;
    int softmax_batch = 128;
};

struct SynthesizedSet {
    Mat features;
    std::vector<int> labels;
};

// n_per_class rows per unseen class from the trained generator, labeled by
// the conditioning class, deterministic under the config seed.
SynthesizedSet synthesize_unseen(const BMCoGANModel& model, const SemanticTable& table,
                                 const SynthesisConfig& cfg);

// Critic early-layer embedding of each (feature, class-semantic) row;
// identity pass-through when use_D_transform is false.
Mat transform_through_D(const BMCoGANModel& model, const Mat& features,
                        const std::vector<int>& labels, const SemanticTable& table,
                        bool use_D_transform);

// Final GZSL classifier over seen + unseen classes in the transformed space.
struct FinalClassifier {
    FinalClassifierKind kind = FinalClassifierKind::softmax;
    int n_classes = 0;
    Linear head;  // softmax
    Mat corpus;   // knn store, immutable after fit
    std::vector<int> corpus_labels;
    int knn_k = 1;

    std::vector<int> predict(const Mat& x) const;
    Mat log_probs(const Mat& x) const;  // softmax kind only
};

FinalClassifier fit_final_classifier(const Mat& features, const std::vector<int>& labels,
                                     int n_classes, uint64_t seed,
                                     const FinalClassifierConfig& cfg);

// Fraction of each class's samples predicted correctly. Every class in
// class_set must have at least one sample.
std::map<int, double> per_class_top1(const std::vector<int>& predictions,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& class_set);
// Unweighted mean of per-class accuracies, in percent.
double mean_class_accuracy_pct(const std::map<int, double>& per_class);

// H = 2*S*U / (S + U); 0 when either argument is 0.
double harmonic_mean(double u, double s);

struct EvalReport {
    std::map<int, double> per_class_acc;
    std::map<int, int> n_test;
    double U = 0;
    double S = 0;
    double H = 0;
    std::string classifier;
    int n_per_class = 0;
    bool used_D_transform = true;
    uint64_t seed = 0;

    std::string to_json() const;
    std::string to_text_table(const std::string& row_label = "BMCoGAN") const;
};

// Aggregates predictions into the U/S/H report (protocol layer, no model).
EvalReport report_from_predictions(const std::vector<int>& pred_seen,
                                   const std::vector<int>& label_seen,
                                   const std::vector<int>& pred_unseen,
                                   const std::vector<int>& label_unseen,
                                   const SemanticTable& table);

// Full testing phase: synthesize, transform, fit, predict, score.
EvalReport evaluate_gzsl(const BMCoGANModel& model, const GZSLDataset& ds,
                         const SynthesisConfig& synth, const FinalClassifierConfig& clf);

// Unseen-only protocol: the label space restricts to unseen classes and the
// classifier fits on synthesized features alone. Returns the per-class mean
// accuracy in percent.
double evaluate_zsl(const BMCoGANModel& model, const GZSLDataset& ds,
                    const SynthesisConfig& synth, const FinalClassifierConfig& clf);

// One (variant, report) row per requested ablation; each variant retrains
// from scratch with only the flagged change.
struct TrainConfig;  // training.hpp
struct AblationResult {
    std::string variant;
    EvalReport report;
};
std::vector<AblationResult> run_ablation_suite(const GZSLDataset& ds, const TrainConfig& base,
                                               const std::vector<std::string>& variants,
                                               const SynthesisConfig& synth,
                                               const FinalClassifierConfig& clf);
std::string ablation_table_text(const std::vector<AblationResult>& rows);
std::string ablation_csv(const std::vector<AblationResult>& rows);
std::string sweep_csv(const std::vector<std::pair<double, EvalReport>>& rows,
                      const std::string& param_name);

}  // namespace bmcogan
