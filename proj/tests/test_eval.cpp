// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bmcogan/error.hpp"
#include "bmcogan/eval.hpp"
#include "bmcogan/training.hpp"

using namespace bmcogan;

namespace {

BMCoGANModel tiny_model(uint64_t seed = 1) {
    ModelDims d;
    d.dx = 6;
    d.a_dim = 4;
    d.dz = 3;
    d.c_seen = 4;
    d.gen_hidden = 8;
    d.reg_hidden = 6;
    d.disc_hidden = 4;
    d.critic_hidden = 5;
    return init_model(d, seed);
}

SemanticTable tiny_table(int c_seen = 4, int c_unseen = 3, int a_dim = 4) {
    SemanticTable t;
    t.c_seen = c_seen;
    t.c_unseen = c_unseen;
    t.attributes = Mat(c_seen + c_unseen, a_dim);
    Rng rng(3);
    for (auto& v : t.attributes.d) v = rng.uniform();
    return t;
}

}  // namespace

TEST_CASE("synthesize_unseen: counts, labels, empty case, determinism") {
    const auto m = tiny_model();
    const auto table = tiny_table();

    SynthesisConfig cfg;
    cfg.n_per_class = 7;
    cfg.seed = 5;
    const auto syn = synthesize_unseen(m, table, cfg);
    CHECK(syn.features.rows == 21);
    CHECK(syn.features.cols == m.dims.dx);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 7; ++i) CHECK(syn.labels[static_cast<size_t>(c * 7 + i)] == 5 + c);

    cfg.n_per_class = 0;
    const auto empty = synthesize_unseen(m, table, cfg);
    CHECK(empty.features.rows == 0);
    CHECK(empty.labels.empty());

    cfg.n_per_class = 4;
    const auto a = synthesize_unseen(m, table, cfg);
    const auto b = synthesize_unseen(m, table, cfg);
    CHECK(a.features.d == b.features.d);
    cfg.seed = 6;
    const auto c = synthesize_unseen(m, table, cfg);
    CHECK(a.features.d != c.features.d);

    cfg.n_per_class = -1;
    CHECK_THROWS_AS(synthesize_unseen(m, table, cfg), ArgumentError);
}

TEST_CASE("paper-scale synthesis: 50 unseen classes at 400 each gives 20000 rows") {
    ModelDims d;
    d.dx = 4;
    d.a_dim = 3;
    d.dz = 2;
    d.c_seen = 2;
    d.gen_hidden = 4;
    d.reg_hidden = 4;
    d.disc_hidden = 4;
    d.critic_hidden = 4;
    const auto m = init_model(d, 2);
    const auto table = tiny_table(2, 50, 3);
    SynthesisConfig cfg;  // n_per_class defaults to 400
    CHECK(cfg.n_per_class == 400);
    const auto syn = synthesize_unseen(m, table, cfg);
    CHECK(syn.features.rows == 20000);
}

TEST_CASE("transform_through_D matches the critic embedding and the bypass") {
    const auto m = tiny_model();
    const auto table = tiny_table();
    Rng rng(9);
    Mat x(5, m.dims.dx);
    for (auto& v : x.d) v = rng.normal();
    const std::vector<int> labels = {1, 2, 5, 6, 7};

    const Mat k = transform_through_D(m, x, labels, table, true);
    CHECK(k.cols == m.dims.critic_hidden);
    const Mat a = table.rows_for_labels(labels);
    const auto direct = m.critic.forward(x, a);
    CHECK(k.d == direct.k.d);

    const Mat bypass = transform_through_D(m, x, labels, table, false);
    CHECK(bypass.d == x.d);  // ablation pass-through

    CHECK_THROWS_AS(transform_through_D(m, x, {1, 2, 3, 4, 99}, table, true), ArgumentError);
}

TEST_CASE("default critic width gives 1024-d embeddings") {
    ModelDims d;
    d.dx = 2048;
    d.a_dim = 16;
    d.c_seen = 3;
    const auto m = init_model(d, 1);
    Rng rng(4);
    Mat x(2, 2048);
    for (auto& v : x.d) v = rng.uniform();
    const auto table = tiny_table(3, 2, 16);
    const Mat k = transform_through_D(m, x, {1, 2}, table, true);
    CHECK(k.cols == 1024);
}

TEST_CASE("1-NN retrieves a stored point exactly; softmax normalizes") {
    Rng rng(11);
    Mat corpus(10, 4);
    for (auto& v : corpus.d) v = rng.normal();
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) labels.push_back(1 + i % 5);

    FinalClassifierConfig cfg;
    cfg.kind = FinalClassifierKind::knn;
    const auto knn = fit_final_classifier(corpus, labels, 5, 1, cfg);
    Mat probe(1, 4);
    std::copy(corpus.row(6), corpus.row(6) + 4, probe.row(0));
    CHECK(knn.predict(probe)[0] == labels[6]);

    cfg.kind = FinalClassifierKind::softmax;
    cfg.softmax_epochs = 10;
    const auto sm = fit_final_classifier(corpus, labels, 5, 1, cfg);
    const Mat logp = sm.log_probs(corpus);
    for (int i = 0; i < logp.rows; ++i) {
        double sum = 0;
        for (int j = 0; j < logp.cols; ++j) sum += std::exp(logp(i, j));
        CHECK(std::fabs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("softmax head reaches 99% on a separable corpus") {
    // Four well-separated clusters in 3-D.
    Rng rng(12);
    Mat x(200, 3);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        const int c = i % 4;
        for (int j = 0; j < 3; ++j)
            x(i, j) = (j == c % 3 ? 5.0 * (c + 1) : 0.0) + 0.05 * rng.normal();
        y.push_back(1 + c);
    }
    FinalClassifierConfig cfg;
    const auto sm = fit_final_classifier(x, y, 4, 7, cfg);
    const auto pred = sm.predict(x);
    int correct = 0;
    for (int i = 0; i < 200; ++i)
        if (pred[static_cast<size_t>(i)] == y[static_cast<size_t>(i)]) correct++;
    CHECK(static_cast<double>(correct) / 200.0 >= 0.99);

    CHECK_THROWS_AS(fit_final_classifier(x, std::vector<int>(200, 9), 4, 7, cfg),
                    ArgumentError);
}

TEST_CASE("per_class_top1: analytic cases and the counting oracle") {
    // class 1: one of two correct; class 2: one of one -> mean 75%
    const std::vector<int> labels = {1, 1, 2};
    const std::vector<int> preds = {1, 2, 2};
    const auto acc = per_class_top1(preds, labels, {1, 2});
    CHECK(acc.at(1) == doctest::Approx(0.5));
    CHECK(acc.at(2) == doctest::Approx(1.0));
    CHECK(mean_class_accuracy_pct(acc) == doctest::Approx(75.0));

    const auto perfect = per_class_top1(labels, labels, {1, 2});
    CHECK(mean_class_accuracy_pct(perfect) == doctest::Approx(100.0));

    CHECK_THROWS_AS(per_class_top1(preds, labels, {1, 2, 3}), ArgumentError);  // empty class

    // 200 random tables against brute-force counting
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 20 + rng.uniform_int(50);
        std::vector<int> lab, pre;
        for (int i = 0; i < n; ++i) {
            lab.push_back(1 + rng.uniform_int(5));
            pre.push_back(1 + rng.uniform_int(5));
        }
        for (int c = 1; c <= 5; ++c)
            if (std::find(lab.begin(), lab.end(), c) == lab.end()) lab[0] = c;  // cover class

        std::vector<int> classes = {1, 2, 3, 4, 5};
        const auto got = per_class_top1(pre, lab, classes);
        for (int c = 1; c <= 5; ++c) {
            int total = 0, correct = 0;
            for (size_t i = 0; i < lab.size(); ++i)
                if (lab[i] == c) {
                    total++;
                    if (pre[i] == c) correct++;
                }
            CHECK(std::fabs(got.at(c) - static_cast<double>(correct) / total) <= 1e-9);
        }
    }
}

TEST_CASE("class-mean and sample-mean accuracy differ on an imbalanced table") {
    // class 1: 90 samples all correct; class 2: 10 samples all wrong
    std::vector<int> labels, preds;
    for (int i = 0; i < 90; ++i) {
        labels.push_back(1);
        preds.push_back(1);
    }
    for (int i = 0; i < 10; ++i) {
        labels.push_back(2);
        preds.push_back(1);
    }
    const auto acc = per_class_top1(preds, labels, {1, 2});
    const double class_mean = mean_class_accuracy_pct(acc);  // 50%
    const double sample_mean = 100.0 * 90.0 / 100.0;         // 90%
    CHECK(class_mean == doctest::Approx(50.0));
    CHECK(std::fabs(sample_mean - class_mean) >= 10.0);
}

TEST_CASE("harmonic mean: paper rows, bounds, symmetry, zero convention") {
    CHECK(std::fabs(harmonic_mean(57.9, 66.1) - 61.7) <= 0.05);  // CUB softmax
    CHECK(std::fabs(harmonic_mean(66.9, 81.3) - 73.4) <= 0.05);  // AWA2 1-NN
    CHECK(harmonic_mean(50, 50) == doctest::Approx(50.0));

    Rng rng(14);
    for (int i = 0; i < 100; ++i) {
        const double u = 100 * rng.uniform(), s = 100 * rng.uniform();
        const double h = harmonic_mean(u, s);
        if (u > 0 && s > 0) {
            CHECK(h >= std::min(u, s) - 1e-9);
            CHECK(h <= std::max(u, s) + 1e-9);
        }
        CHECK(harmonic_mean(s, u) == doctest::Approx(h));
    }
    CHECK(harmonic_mean(0.0, 77.0) == 0.0);
    CHECK(harmonic_mean(0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(harmonic_mean(-1.0, 5.0), ArgumentError);
}

TEST_CASE("report_from_predictions: oracle and seen-biased classifiers") {
    const auto table = tiny_table(2, 2, 4);
    const std::vector<int> seen_labels = {1, 1, 2, 2};
    const std::vector<int> unseen_labels = {3, 3, 4, 4};

    // oracle: always right
    auto rep = report_from_predictions(seen_labels, seen_labels, unseen_labels, unseen_labels,
                                       table);
    CHECK(rep.U == doctest::Approx(100.0));
    CHECK(rep.S == doctest::Approx(100.0));
    CHECK(rep.H == doctest::Approx(100.0));

    // predicts only seen classes: U = 0 forces H = 0
    const std::vector<int> biased = {1, 1, 2, 2};
    rep = report_from_predictions(seen_labels, seen_labels, biased, unseen_labels, table);
    CHECK(rep.U == 0.0);
    CHECK(rep.H == 0.0);
    CHECK(rep.S == doctest::Approx(100.0));
}

TEST_CASE("evaluate_gzsl runs the full pipeline deterministically") {
    const auto ds = make_toy_dataset(21, 5, 3, 10, 5, 15);
    TrainConfig cfg;
    cfg.seed = 2;
    cfg.epochs = 1;
    cfg.batch_size = 25;
    cfg.n_critic = 1;
    cfg.gen_hidden = 16;
    cfg.reg_hidden = 12;
    cfg.disc_hidden = 6;
    cfg.critic_hidden = 8;
    cfg.pretrain_epochs = 3;
    const TrainState st = train(ds, cfg);

    SynthesisConfig synth;
    synth.n_per_class = 30;
    synth.seed = 4;
    FinalClassifierConfig clf;
    clf.softmax_epochs = 15;

    const auto r1 = evaluate_gzsl(st.model, ds, synth, clf);
    const auto r2 = evaluate_gzsl(st.model, ds, synth, clf);
    CHECK(r1.U == r2.U);
    CHECK(r1.S == r2.S);
    CHECK(r1.H == r2.H);
    CHECK(r1.per_class_acc.size() == 8);
    CHECK(r1.H == doctest::Approx(harmonic_mean(r1.U, r1.S)));

    // knn route works from the same trained model
    clf.kind = FinalClassifierKind::knn;
    const auto rknn = evaluate_gzsl(st.model, ds, synth, clf);
    CHECK(rknn.classifier == "knn");
    CHECK(std::isfinite(rknn.H));

    // the report serializes with the U/S/H columns
    const auto text = r1.to_text_table();
    CHECK(text.find("U") != std::string::npos);
    CHECK(text.find("S") != std::string::npos);
    CHECK(text.find("H") != std::string::npos);
    CHECK(r1.to_json().find("\"H\"") != std::string::npos);
}

TEST_CASE("ablation suite emits one labeled row per variant") {
    const auto ds = make_toy_dataset(22, 4, 2, 8, 4, 10);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.epochs = 1;
    cfg.batch_size = 20;
    cfg.n_critic = 1;
    cfg.gen_hidden = 12;
    cfg.reg_hidden = 8;
    cfg.disc_hidden = 4;
    cfg.critic_hidden = 6;
    cfg.pretrain_epochs = 2;
    SynthesisConfig synth;
    synth.n_per_class = 10;
    FinalClassifierConfig clf;
    clf.softmax_epochs = 5;

    const auto rows = run_ablation_suite(ds, cfg, {"full", "wo_Ld"}, synth, clf);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].variant == "full");
    const auto table = ablation_table_text(rows);
    CHECK(table.find("BMCoGAN") != std::string::npos);
    CHECK(table.find("BMCoGAN w/o L_d") != std::string::npos);
    const auto csv = ablation_csv(rows);
    CHECK(csv.find("variant,U,S,H") == 0);

    CHECK(run_ablation_suite(ds, cfg, {}, synth, clf).empty());
    CHECK_THROWS_AS(run_ablation_suite(ds, cfg, {"nonsense"}, synth, clf), ArgumentError);
}
