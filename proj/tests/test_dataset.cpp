// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "bmcogan/dataset.hpp"
#include "bmcogan/error.hpp"

using namespace bmcogan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    const fs::path p = fs::temp_directory_path() / (std::string("bmcogan_test_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool datasets_equal(const GZSLDataset& a, const GZSLDataset& b) {
    return a.train_features.d == b.train_features.d && a.train_labels == b.train_labels &&
           a.test_seen_features.d == b.test_seen_features.d &&
           a.test_seen_labels == b.test_seen_labels &&
           a.test_unseen_features.d == b.test_unseen_features.d &&
           a.test_unseen_labels == b.test_unseen_labels &&
           a.semantics.attributes.d == b.semantics.attributes.d &&
           a.original_to_canonical == b.original_to_canonical && a.meta.dx == b.meta.dx &&
           a.meta.a_dim == b.meta.a_dim && a.meta.c_seen == b.meta.c_seen &&
           a.meta.c_unseen == b.meta.c_unseen;
}

}  // namespace

TEST_CASE("toy dataset has the promised counts") {
    const auto ds = make_toy_dataset(7, 8, 4, 16, 8, 50);
    CHECK(ds.train_features.rows == 400);
    CHECK(ds.test_unseen_features.rows == 200);
    CHECK(ds.meta.dx == 16);
    CHECK(ds.meta.a_dim == 8);
    CHECK(ds.semantics.attributes.rows == 12);
    // every train label is seen
    for (int y : ds.train_labels) CHECK(ds.semantics.is_seen(y));
    for (int y : ds.test_unseen_labels) CHECK(ds.semantics.is_unseen(y));
}

TEST_CASE("toy dataset is bitwise deterministic in the seed") {
    const auto a = make_toy_dataset(123, 5, 3, 10, 6, 20);
    const auto b = make_toy_dataset(123, 5, 3, 10, 6, 20);
    CHECK(datasets_equal(a, b));
    const auto c = make_toy_dataset(124, 5, 3, 10, 6, 20);
    CHECK_FALSE(datasets_equal(a, c));
}

TEST_CASE("toy dataset rejects bad arguments") {
    CHECK_THROWS_AS(make_toy_dataset(1, 0, 4, 16, 8, 50), ArgumentError);
    CHECK_THROWS_AS(make_toy_dataset(1, 8, 4, 16, 8, 0), ArgumentError);
    CHECK_THROWS_AS(make_toy_dataset(1, 8, 4, 4, 8, 50), ArgumentError);  // dx < a_dim
}

TEST_CASE("class means converge to the linear map as n_per_class grows") {
    // Law-of-large-numbers oracle: the empirical class mean must approach
    // the generating mean, so the deviation at 5000 samples is far below
    // the deviation at 50.
    ToySpec small;
    small.seed = 11;
    small.n_per_class = 50;
    ToySpec big = small;
    big.n_per_class = 5000;

    const Mat means = toy_class_means(small);
    auto max_dev = [&](const GZSLDataset& ds) {
        Mat sums(ds.meta.c_seen, ds.meta.dx);
        std::vector<int> counts(static_cast<size_t>(ds.meta.c_seen), 0);
        for (int i = 0; i < ds.train_features.rows; ++i) {
            const int c = ds.train_labels[static_cast<size_t>(i)];
            counts[static_cast<size_t>(c - 1)]++;
            for (int j = 0; j < ds.meta.dx; ++j) sums(c - 1, j) += ds.train_features(i, j);
        }
        double dev = 0;
        for (int c = 0; c < ds.meta.c_seen; ++c)
            for (int j = 0; j < ds.meta.dx; ++j)
                dev = std::max(dev, std::fabs(sums(c, j) / counts[static_cast<size_t>(c)] -
                                              means(c, j)));
        return dev;
    };

    const double dev_small = max_dev(make_toy_dataset(small));
    const double dev_big = max_dev(make_toy_dataset(big));
    CHECK(dev_big < dev_small);
    CHECK(dev_big < 0.05);  // sigma/sqrt(5000) has this comfortably beaten
}

TEST_CASE("save then load round-trips every field") {
    const auto dir = temp_dir("roundtrip");
    const auto ds = make_toy_dataset(42, 4, 2, 8, 4, 10);
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    CHECK(datasets_equal(ds, back));

    // load(save(load(x))) is also identity
    const auto dir2 = temp_dir("roundtrip2");
    save_dataset(back, dir2);
    CHECK(datasets_equal(back, load_dataset(dir2)));
}

TEST_CASE("loader rejects a payload whose size disagrees with the manifest") {
    const auto dir = temp_dir("badpayload");
    save_dataset(make_toy_dataset(1, 3, 2, 6, 3, 5), dir);
    // truncate one float from the feature payload
    const auto fpath = dir / "features.f32";
    const auto size = fs::file_size(fpath);
    fs::resize_file(fpath, size - 4);
    CHECK_THROWS_AS(load_dataset(dir), SchemaError);
}

TEST_CASE("loader surfaces missing files as load errors") {
    const auto dir = temp_dir("missing");
    save_dataset(make_toy_dataset(1, 3, 2, 6, 3, 5), dir);
    fs::remove(dir / "labels.i32");
    CHECK_THROWS_AS(load_dataset(dir), LoadError);
    CHECK_THROWS_AS(load_dataset(temp_dir("empty")), LoadError);  // no manifest at all
}

TEST_CASE("loader rejects a train label from the unseen set") {
    const auto dir = temp_dir("inductive");
    auto ds = make_toy_dataset(1, 3, 2, 6, 3, 5);
    save_dataset(ds, dir);

    // Rewrite one train row's label to an unseen class id.
    std::fstream f(dir / "labels.i32", std::ios::binary | std::ios::in | std::ios::out);
    const int32_t unseen_id = 4;  // canonical unseen for c_seen=3
    f.seekp(0);
    f.write(reinterpret_cast<const char*>(&unseen_id), sizeof(unseen_id));
    f.close();
    CHECK_THROWS_AS(load_dataset(dir), InductiveViolationError);
}

TEST_CASE("remap bijection composes to identity") {
    auto ds = make_toy_dataset(5, 4, 2, 8, 4, 6);
    // give the classes non-trivial original ids
    ds.original_to_canonical.clear();
    const int originals[6] = {17, 3, 99, 42, 7, 55};
    for (int c = 1; c <= 6; ++c) ds.original_to_canonical[originals[c - 1]] = c;

    for (int c = 1; c <= 6; ++c) CHECK(ds.canonical_id(ds.original_id(c)) == c);
    for (int i = 0; i < 6; ++i)
        CHECK(ds.original_id(ds.canonical_id(originals[i])) == originals[i]);

    // and the bijection survives a disk round-trip
    const auto dir = temp_dir("remap");
    save_dataset(ds, dir);
    CHECK(load_dataset(dir).original_to_canonical == ds.original_to_canonical);
}

TEST_CASE("semantic table rejects out-of-range class ids") {
    const auto ds = make_toy_dataset(5, 4, 2, 8, 4, 6);
    CHECK_THROWS_AS(ds.semantics.semantic_of(0), ArgumentError);
    CHECK_THROWS_AS(ds.semantics.semantic_of(7), ArgumentError);
    CHECK(ds.semantics.seen_class_ids() == std::vector<int>{1, 2, 3, 4});
    CHECK(ds.semantics.unseen_class_ids() == std::vector<int>{5, 6});
}

TEST_CASE("batch iterator: sizes, coverage, determinism") {
    const auto ds = make_toy_dataset(9, 5, 2, 8, 4, 2);  // N = 10
    BatchIterator it(ds, 4, 77);
    Batch b;
    std::vector<int> sizes;
    std::set<int> touched;
    while (it.next(b)) {
        sizes.push_back(b.x.rows);
        for (int i : b.indices) touched.insert(i);
        // the batch pairs each row with the semantics of its label
        for (size_t r = 0; r < b.y.size(); ++r) {
            const double* a = ds.semantics.semantic_of(b.y[r]);
            for (int j = 0; j < ds.meta.a_dim; ++j)
                CHECK(b.a(static_cast<int>(r), j) == a[j]);
        }
    }
    CHECK(sizes == std::vector<int>{4, 4, 2});
    CHECK(touched.size() == 10);  // permutation oracle: union == {0..N-1}
    CHECK(*touched.begin() == 0);
    CHECK(*touched.rbegin() == 9);

    // same seed => identical order
    BatchIterator it1(ds, 3, 5), it2(ds, 3, 5);
    Batch b1, b2;
    while (it1.next(b1)) {
        REQUIRE(it2.next(b2));
        CHECK(b1.indices == b2.indices);
    }
}

TEST_CASE("batch iterator rejects degenerate arguments") {
    const auto ds = make_toy_dataset(9, 5, 2, 8, 4, 2);
    CHECK_THROWS_AS(BatchIterator(ds, 0, 1), ArgumentError);
    GZSLDataset empty = ds;
    empty.train_features = Mat(0, 8);
    empty.train_labels.clear();
    empty.meta.n_train = 0;
    CHECK_THROWS_AS(BatchIterator(empty, 4, 1), ArgumentError);
}

TEST_CASE("minmax normalization maps train features into [0,1]") {
    auto ds = make_toy_dataset(3, 4, 2, 8, 4, 20);
    minmax_normalize(ds);
    for (double v : ds.train_features.d) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("content hash is stable and sensitive") {
    const auto a = make_toy_dataset(1, 3, 2, 6, 3, 5);
    const auto b = make_toy_dataset(1, 3, 2, 6, 3, 5);
    const auto c = make_toy_dataset(2, 3, 2, 6, 3, 5);
    CHECK(dataset_content_hash(a) == dataset_content_hash(b));
    CHECK(dataset_content_hash(a) != dataset_content_hash(c));
}
