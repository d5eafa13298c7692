// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bmcogan/mat.hpp"
#include "bmcogan/rng.hpp"

namespace bmcogan {

// Per-class attribute score vector. Canonical class ids are 1-based:
// seen classes are {1, ..., c_seen}, unseen are {c_seen+1, ..., c_seen+c_unseen}.
struct ClassSemanticVector {
    int class_id = 0;
    std::vector<double> values;
};

// Attribute table for all classes in canonical row order (row c-1 <-> class c).
struct SemanticTable {
    Mat attributes;  // (c_seen + c_unseen) x a_dim
    int c_seen = 0;
    int c_unseen = 0;

    int total_classes() const { return c_seen + c_unseen; }
    int a_dim() const { return attributes.cols; }
    bool is_seen(int class_id) const { return class_id >= 1 && class_id <= c_seen; }
    bool is_unseen(int class_id) const {
        return class_id > c_seen && class_id <= total_classes();
    }
    const double* semantic_of(int class_id) const;
    ClassSemanticVector vector_of(int class_id) const;
    // Semantic rows for a batch of labels.
    Mat rows_for_labels(const std::vector<int>& labels) const;
    std::vector<int> seen_class_ids() const;
    std::vector<int> unseen_class_ids() const;
};

struct DatasetMeta {
    std::string name;
    int dx = 0;
    int a_dim = 0;
    int c_seen = 0;
    int c_unseen = 0;
    int64_t n_train = 0;
};

struct GZSLDataset {
    Mat train_features;
    std::vector<int> train_labels;  // canonical ids, all seen
    Mat test_seen_features;
    std::vector<int> test_seen_labels;
    Mat test_unseen_features;
    std::vector<int> test_unseen_labels;
    SemanticTable semantics;
    DatasetMeta meta;
    // Stored bijection between the source corpus ids and canonical ids.
    std::map<int, int> original_to_canonical;

    int canonical_id(int original_id) const;
    int original_id(int canonical_id) const;
    // Throws on any broken invariant (dims, label ranges, inductive setting).
    void validate() const;
};

// Portable container: manifest.json + raw little-endian payloads
// (features.f32 row-major, labels.i32, attributes.f32).
GZSLDataset load_dataset(const std::filesystem::path& root);
void save_dataset(const GZSLDataset& ds, const std::filesystem::path& root);

// FNV-1a over the payload files, for run manifests.
std::string dataset_content_hash(const GZSLDataset& ds);

// Rounds every entry to float32 precision. Dataset producers apply this so
// in-memory values match the on-disk f32 payloads bit for bit (round-trip
// identity).
void quantize_f32(Mat& m);

// Deterministic desk-scale benchmark. Class attribute vectors are uniform
// draws; features are Gaussian around a fixed linear map of the attributes,
// so a closed-form classifier oracle exists.
struct ToySpec {
    uint64_t seed = 0;
    int c_seen = 8;
    int c_unseen = 4;
    int dx = 16;
    int a_dim = 8;
    int n_per_class = 50;
    int test_per_class = -1;    // -1: same as n_per_class
    double noise_sigma = 0.35;  // class clusters overlap moderately at default
};

GZSLDataset make_toy_dataset(const ToySpec& spec);
GZSLDataset make_toy_dataset(uint64_t seed, int c_seen, int c_unseen, int dx, int a_dim,
                             int n_per_class);
// True class means (the linear map applied to each class attribute vector),
// canonical row order. Oracle hook for tests.
Mat toy_class_means(const ToySpec& spec);

// Optional per-dimension min-max scaling fitted on train features.
void minmax_normalize(GZSLDataset& ds);

struct Batch {
    Mat x;
    std::vector<int> y;
    Mat a;  // semantics of y, row-aligned
    std::vector<int> indices;
};

// Deterministic shuffled epoch order under a fixed seed; the final short
// batch is included. State (rng, permutation, cursor) is exposed so a
// training run can checkpoint mid-epoch and resume exactly.
class BatchIterator {
  public:
    BatchIterator(const GZSLDataset& ds, int batch_size, uint64_t seed);

    bool next(Batch& out);   // false at end of epoch
    void reshuffle();        // begin a new epoch with a fresh permutation

    int batch_size() const { return batch_size_; }
    const std::vector<int>& permutation() const { return perm_; }
    int cursor() const { return cursor_; }
    Rng& rng() { return rng_; }
    void restore(const std::array<uint64_t, 4>& rng_state, std::vector<int> perm, int cursor);

  private:
    const GZSLDataset* ds_;
    int batch_size_;
    Rng rng_;
    std::vector<int> perm_;
    int cursor_ = 0;
};

}  // namespace bmcogan
