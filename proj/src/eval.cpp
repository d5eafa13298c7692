// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include <json.hpp>

#include "bmcogan/error.hpp"
#include "bmcogan/losses.hpp"
#include "bmcogan/optim.hpp"
#include "bmcogan/training.hpp"

namespace bmcogan {

using nlohmann::json;

FinalClassifierKind parse_classifier_kind(const std::string& s) {
    if (s == "softmax") return FinalClassifierKind::softmax;
    if (s == "knn") return FinalClassifierKind::knn;
    throw ArgumentError("unknown classifier kind: " + s);
}

std::string to_string(FinalClassifierKind k) {
    return k == FinalClassifierKind::softmax ? "softmax" : "knn";
}

SynthesizedSet synthesize_unseen(const BMCoGANModel& model, const SemanticTable& table,
                                 const SynthesisConfig& cfg) {
    if (cfg.n_per_class < 0) throw ArgumentError("synthesize_unseen: n_per_class must be >= 0");
    SynthesizedSet out;
    out.features = Mat(cfg.n_per_class * table.c_unseen, model.dims.dx);
    out.labels.reserve(out.features.rows >= 0 ? static_cast<size_t>(out.features.rows) : 0);
    if (cfg.n_per_class == 0) {
        out.features = Mat(0, model.dims.dx);
        return out;
    }

    Rng rng(cfg.seed, 21);
    int at = 0;
    for (int c = table.c_seen + 1; c <= table.total_classes(); ++c) {
        Mat z(cfg.n_per_class, model.dims.dz);
        for (double& v : z.d) v = rng.normal();
        Mat a(cfg.n_per_class, table.a_dim());
        const double* row = table.semantic_of(c);
        for (int i = 0; i < cfg.n_per_class; ++i) std::copy(row, row + table.a_dim(), a.row(i));
        const Mat x = model.gen.forward(z, a, Domain::unseen).x;
        for (int i = 0; i < x.rows; ++i, ++at) {
            std::copy(x.row(i), x.row(i) + x.cols, out.features.row(at));
            out.labels.push_back(c);
        }
    }
    return out;
}

Mat transform_through_D(const BMCoGANModel& model, const Mat& features,
                        const std::vector<int>& labels, const SemanticTable& table,
                        bool use_D_transform) {
    if (features.rows != static_cast<int>(labels.size()))
        throw ShapeError("transform_through_D: feature/label count mismatch");
    if (!use_D_transform) return features;
    if (features.rows == 0) return Mat(0, model.dims.critic_hidden);
    const Mat a = table.rows_for_labels(labels);  // throws on a missing class
    return model.critic.forward(features, a).k;
}

std::vector<int> FinalClassifier::predict(const Mat& x) const {
    std::vector<int> pred(static_cast<size_t>(x.rows));
    if (kind == FinalClassifierKind::softmax) {
        const Mat scores = head.forward(x);
        for (int i = 0; i < scores.rows; ++i) {
            const double* r = scores.row(i);
            int best = 0;
            for (int j = 1; j < scores.cols; ++j)
                if (r[j] > r[best]) best = j;
            pred[static_cast<size_t>(i)] = best + 1;
        }
        return pred;
    }
    // k-NN over the stored corpus; ties resolve to the lowest row index.
    for (int i = 0; i < x.rows; ++i) {
        if (knn_k == 1) {
            int best = 0;
            double best_d = row_squared_distance(x, i, corpus, 0);
            for (int j = 1; j < corpus.rows; ++j) {
                const double d = row_squared_distance(x, i, corpus, j);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            pred[static_cast<size_t>(i)] = corpus_labels[static_cast<size_t>(best)];
        } else {
            std::vector<std::pair<double, int>> dist(static_cast<size_t>(corpus.rows));
            for (int j = 0; j < corpus.rows; ++j)
                dist[static_cast<size_t>(j)] = {row_squared_distance(x, i, corpus, j), j};
            std::partial_sort(dist.begin(), dist.begin() + knn_k, dist.end());
            std::map<int, int> votes;
            for (int t = 0; t < knn_k; ++t)
                votes[corpus_labels[static_cast<size_t>(dist[static_cast<size_t>(t)].second)]]++;
            int best_label = votes.begin()->first, best_votes = votes.begin()->second;
            for (const auto& [label, count] : votes)
                if (count > best_votes) {
                    best_votes = count;
                    best_label = label;
                }
            pred[static_cast<size_t>(i)] = best_label;
        }
    }
    return pred;
}

Mat FinalClassifier::log_probs(const Mat& x) const {
    if (kind != FinalClassifierKind::softmax)
        throw ArgumentError("log_probs: only the softmax classifier produces probabilities");
    Classifier tmp;
    tmp.lin = head;
    return tmp.forward_logp(x);
}

FinalClassifier fit_final_classifier(const Mat& features, const std::vector<int>& labels,
                                     int n_classes, uint64_t seed,
                                     const FinalClassifierConfig& cfg) {
    if (features.rows != static_cast<int>(labels.size()))
        throw ShapeError("fit_final_classifier: feature/label count mismatch");
    if (features.rows == 0) throw ArgumentError("fit_final_classifier: empty corpus");
    for (int y : labels)
        if (y < 1 || y > n_classes)
            throw ArgumentError("fit_final_classifier: label " + std::to_string(y) +
                                " outside [1, " + std::to_string(n_classes) + "]");

    FinalClassifier out;
    out.kind = cfg.kind;
    out.n_classes = n_classes;
    if (cfg.kind == FinalClassifierKind::knn) {
        out.corpus = features;
        out.corpus_labels = labels;
        out.knn_k = cfg.knn_k;
        return out;
    }

    Rng rng(seed, 23);
    out.head = Linear(n_classes, features.cols);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(features.cols));
    for (double& v : out.head.W.d) v = sigma * rng.normal();

    Classifier clf;
    clf.lin = out.head;
    Adam opt(AdamParams{cfg.softmax_lr, 0.9, 0.999, 1e-8});
    std::vector<Mat*> params = {&clf.lin.W, &clf.lin.b};
    opt.attach(params);

    const int n = features.rows;
    for (int epoch = 0; epoch < cfg.softmax_epochs; ++epoch) {
        const auto perm = rng.permutation(n);
        for (int at = 0; at < n; at += cfg.softmax_batch) {
            const int take = std::min(cfg.softmax_batch, n - at);
            std::vector<int> idx(perm.begin() + at, perm.begin() + at + take);
            const Mat x = gather_rows(features, idx);
            std::vector<int> y(static_cast<size_t>(take));
            for (int i = 0; i < take; ++i)
                y[static_cast<size_t>(i)] = labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
            const Mat logp = clf.forward_logp(x);
            Mat dlogp;
            seen_classifier_loss(logp, y, &dlogp);
            Classifier grads;
            grads.lin = Linear(n_classes, features.cols);
            clf.backward_logp(x, logp, dlogp, grads);
            std::vector<const Mat*> g = {&grads.lin.W, &grads.lin.b};
            opt.step(params, g);
        }
    }
    out.head = clf.lin;
    return out;
}

std::map<int, double> per_class_top1(const std::vector<int>& predictions,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& class_set) {
    if (predictions.size() != labels.size())
        throw ShapeError("per_class_top1: prediction/label count mismatch");
    std::map<int, int> total, correct;
    for (int c : class_set) total[c] = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const auto it = total.find(labels[i]);
        if (it == total.end()) continue;  // outside the scored class set
        it->second += 1;
        if (predictions[i] == labels[i]) correct[labels[i]] += 1;
    }
    std::map<int, double> acc;
    for (int c : class_set) {
        if (total[c] == 0)
            throw ArgumentError("per_class_top1: class " + std::to_string(c) +
                                " has no test samples");
        acc[c] = static_cast<double>(correct[c]) / total[c];
    }
    return acc;
}

double mean_class_accuracy_pct(const std::map<int, double>& per_class) {
    if (per_class.empty()) throw ArgumentError("mean_class_accuracy_pct: empty class set");
    double acc = 0;
    for (const auto& [c, a] : per_class) {
        (void)c;
        acc += a;
    }
    return 100.0 * acc / static_cast<double>(per_class.size());
}

double harmonic_mean(double u, double s) {
    if (u < 0 || s < 0) throw ArgumentError("harmonic_mean: accuracies must be >= 0");
    if (u == 0 && s == 0) {
        std::cerr << "warning: harmonic mean of (0, 0) defined as 0\n";
        return 0.0;
    }
    if (u == 0 || s == 0) return 0.0;
    return 2.0 * s * u / (s + u);
}

std::string EvalReport::to_json() const {
    json per;
    for (const auto& [c, a] : per_class_acc) per[std::to_string(c)] = a;
    json nt;
    for (const auto& [c, n] : n_test) nt[std::to_string(c)] = n;
    json j{{"U", U},
           {"S", S},
           {"H", H},
           {"per_class_acc", per},
           {"n_test", nt},
           {"classifier", classifier},
           {"n_per_class", n_per_class},
           {"use_D_transform", used_D_transform},
           {"seed", seed}};
    return j.dump(2);
}

std::string EvalReport::to_text_table(const std::string& row_label) const {
    char buf[256];
    std::string out = "Approach                        U      S      H\n";
    out += "------------------------------------------------\n";
    std::snprintf(buf, sizeof(buf), "%-28s %6.1f %6.1f %6.1f\n", row_label.c_str(), U, S, H);
    out += buf;
    return out;
}

EvalReport report_from_predictions(const std::vector<int>& pred_seen,
                                   const std::vector<int>& label_seen,
                                   const std::vector<int>& pred_unseen,
                                   const std::vector<int>& label_unseen,
                                   const SemanticTable& table) {
    EvalReport rep;
    const auto acc_seen = per_class_top1(pred_seen, label_seen, table.seen_class_ids());
    const auto acc_unseen = per_class_top1(pred_unseen, label_unseen, table.unseen_class_ids());
    rep.S = mean_class_accuracy_pct(acc_seen);
    rep.U = mean_class_accuracy_pct(acc_unseen);
    rep.H = harmonic_mean(rep.U, rep.S);
    for (const auto& [c, a] : acc_seen) rep.per_class_acc[c] = a;
    for (const auto& [c, a] : acc_unseen) rep.per_class_acc[c] = a;
    for (int y : label_seen) rep.n_test[y] += 1;
    for (int y : label_unseen) rep.n_test[y] += 1;
    return rep;
}

EvalReport evaluate_gzsl(const BMCoGANModel& model, const GZSLDataset& ds,
                         const SynthesisConfig& synth, const FinalClassifierConfig& clf_cfg) {
    if (ds.test_seen_features.rows == 0 || ds.test_unseen_features.rows == 0)
        throw ArgumentError("evaluate_gzsl: both test splits must be present");

    const bool transform =
        synth.use_D_transform && model.ablation != Ablation::wo_D_test;

    const SynthesizedSet syn = synthesize_unseen(model, ds.semantics, synth);
    if (syn.features.rows == 0)
        throw ArgumentError("evaluate_gzsl: n_per_class must be >= 1 to build the corpus");

    const Mat train_t = transform_through_D(model, ds.train_features, ds.train_labels,
                                            ds.semantics, transform);
    const Mat syn_t =
        transform_through_D(model, syn.features, syn.labels, ds.semantics, transform);

    Mat corpus = concat_rows(train_t, syn_t);
    std::vector<int> corpus_labels = ds.train_labels;
    corpus_labels.insert(corpus_labels.end(), syn.labels.begin(), syn.labels.end());

    const FinalClassifier clf = fit_final_classifier(
        corpus, corpus_labels, ds.semantics.total_classes(), synth.seed, clf_cfg);

    const Mat seen_t = transform_through_D(model, ds.test_seen_features, ds.test_seen_labels,
                                           ds.semantics, transform);
    const Mat unseen_t = transform_through_D(model, ds.test_unseen_features,
                                             ds.test_unseen_labels, ds.semantics, transform);

    EvalReport rep = report_from_predictions(clf.predict(seen_t), ds.test_seen_labels,
                                             clf.predict(unseen_t), ds.test_unseen_labels,
                                             ds.semantics);
    rep.classifier = to_string(clf_cfg.kind);
    rep.n_per_class = synth.n_per_class;
    rep.used_D_transform = transform;
    rep.seed = synth.seed;
    return rep;
}

double evaluate_zsl(const BMCoGANModel& model, const GZSLDataset& ds,
                    const SynthesisConfig& synth, const FinalClassifierConfig& clf_cfg) {
    if (ds.test_unseen_features.rows == 0)
        throw ArgumentError("evaluate_zsl: test_unseen split must be present");
    const bool transform =
        synth.use_D_transform && model.ablation != Ablation::wo_D_test;

    const SynthesizedSet syn = synthesize_unseen(model, ds.semantics, synth);
    if (syn.features.rows == 0)
        throw ArgumentError("evaluate_zsl: n_per_class must be >= 1 to build the corpus");
    const Mat corpus =
        transform_through_D(model, syn.features, syn.labels, ds.semantics, transform);

    // Shift canonical unseen ids down to a dense [1, c_unseen] label space.
    const int c_seen = ds.semantics.c_seen;
    std::vector<int> shifted(syn.labels.size());
    for (size_t i = 0; i < syn.labels.size(); ++i) shifted[i] = syn.labels[i] - c_seen;
    const FinalClassifier clf =
        fit_final_classifier(corpus, shifted, ds.semantics.c_unseen, synth.seed, clf_cfg);

    const Mat test_t = transform_through_D(model, ds.test_unseen_features,
                                           ds.test_unseen_labels, ds.semantics, transform);
    auto preds = clf.predict(test_t);
    for (int& p : preds) p += c_seen;
    const auto acc =
        per_class_top1(preds, ds.test_unseen_labels, ds.semantics.unseen_class_ids());
    return mean_class_accuracy_pct(acc);
}

std::vector<AblationResult> run_ablation_suite(const GZSLDataset& ds, const TrainConfig& base,
                                               const std::vector<std::string>& variants,
                                               const SynthesisConfig& synth,
                                               const FinalClassifierConfig& clf) {
    std::vector<AblationResult> rows;
    for (const auto& name : variants) {
        TrainConfig cfg = base;
        cfg.ablation = parse_ablation(name);  // throws on unknown variants
        const TrainState st = train(ds, cfg);
        SynthesisConfig sc = synth;
        if (cfg.ablation == Ablation::wo_D_test) sc.use_D_transform = false;
        rows.push_back({name, evaluate_gzsl(st.model, ds, sc, clf)});
    }
    return rows;
}

namespace {

std::string ablation_row_label(const std::string& variant) {
    if (variant == "full") return "BMCoGAN";
    if (variant == "wo_LG2") return "BMCoGAN w/o L_G2";
    if (variant == "wo_Ld") return "BMCoGAN w/o L_d";
    if (variant == "wo_Lcls") return "BMCoGAN w/o L_cls";
    if (variant == "wo_Lcen") return "BMCoGAN w/o L_cen";
    if (variant == "shared_R") return "BMCoGAN w/ R";
    if (variant == "separate_Dsu") return "BMCoGAN w/ sep. D_s & D_u";
    if (variant == "coupled_Gsu") return "BMCoGAN w/ sep. G_s & G_u";
    if (variant == "wo_D_test") return "BMCoGAN w/o D (test)";
    return variant;
}

}  // namespace

std::string ablation_table_text(const std::vector<AblationResult>& rows) {
    std::string out = "Approach                        U      S      H\n";
    out += "------------------------------------------------\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-28s %6.1f %6.1f %6.1f\n",
                      ablation_row_label(r.variant).c_str(), r.report.U, r.report.S, r.report.H);
        out += buf;
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationResult>& rows) {
    std::string out = "variant,U,S,H\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f\n", r.variant.c_str(), r.report.U,
                      r.report.S, r.report.H);
        out += buf;
    }
    return out;
}

std::string sweep_csv(const std::vector<std::pair<double, EvalReport>>& rows,
                      const std::string& param_name) {
    std::string out = param_name + ",U,S,H\n";
    char buf[160];
    for (const auto& [value, rep] : rows) {
        std::snprintf(buf, sizeof(buf), "%-.6g,%.4f,%.4f,%.4f\n", value, rep.U, rep.S, rep.H);
        out += buf;
    }
    return out;
}

}  // namespace bmcogan
