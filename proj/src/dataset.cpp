// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "bmcogan/error.hpp"

namespace bmcogan {

using nlohmann::json;
namespace fs = std::filesystem;

const double* SemanticTable::semantic_of(int class_id) const {
    if (class_id < 1 || class_id > total_classes())
        throw ArgumentError("SemanticTable: class id " + std::to_string(class_id) +
                            " outside [1, " + std::to_string(total_classes()) + "]");
    return attributes.row(class_id - 1);
}

ClassSemanticVector SemanticTable::vector_of(int class_id) const {
    const double* r = semantic_of(class_id);
    return ClassSemanticVector{class_id, std::vector<double>(r, r + attributes.cols)};
}

Mat SemanticTable::rows_for_labels(const std::vector<int>& labels) const {
    Mat out(static_cast<int>(labels.size()), attributes.cols);
    for (size_t i = 0; i < labels.size(); ++i) {
        const double* r = semantic_of(labels[i]);
        std::copy(r, r + attributes.cols, out.row(static_cast<int>(i)));
    }
    return out;
}

std::vector<int> SemanticTable::seen_class_ids() const {
    std::vector<int> ids(static_cast<size_t>(c_seen));
    for (int c = 0; c < c_seen; ++c) ids[static_cast<size_t>(c)] = c + 1;
    return ids;
}

std::vector<int> SemanticTable::unseen_class_ids() const {
    std::vector<int> ids(static_cast<size_t>(c_unseen));
    for (int c = 0; c < c_unseen; ++c) ids[static_cast<size_t>(c)] = c_seen + c + 1;
    return ids;
}

int GZSLDataset::canonical_id(int original_id) const {
    auto it = original_to_canonical.find(original_id);
    if (it == original_to_canonical.end())
        throw ArgumentError("unknown original class id " + std::to_string(original_id));
    return it->second;
}

int GZSLDataset::original_id(int canonical_id) const {
    for (const auto& [orig, canon] : original_to_canonical)
        if (canon == canonical_id) return orig;
    throw ArgumentError("unknown canonical class id " + std::to_string(canonical_id));
}

void GZSLDataset::validate() const {
    if (meta.dx <= 0 || meta.a_dim <= 0 || meta.c_seen <= 0 || meta.c_unseen <= 0)
        throw SchemaError("dataset meta has non-positive dimensions");
    if (semantics.c_seen != meta.c_seen || semantics.c_unseen != meta.c_unseen)
        throw SchemaError("semantic table class counts disagree with meta");
    if (semantics.attributes.rows != meta.c_seen + meta.c_unseen ||
        semantics.attributes.cols != meta.a_dim)
        throw SchemaError("attribute matrix shape disagrees with meta");
    if (!semantics.attributes.all_finite()) throw SchemaError("non-finite attribute entry");

    auto check_block = [&](const Mat& x, const std::vector<int>& y, const char* name) {
        if (x.rows != static_cast<int>(y.size()))
            throw SchemaError(std::string(name) + ": feature row count != label count");
        if (x.rows > 0 && x.cols != meta.dx)
            throw SchemaError(std::string(name) + ": feature width != dx");
        if (!x.all_finite()) throw SchemaError(std::string(name) + ": non-finite feature");
    };
    check_block(train_features, train_labels, "train");
    check_block(test_seen_features, test_seen_labels, "test_seen");
    check_block(test_unseen_features, test_unseen_labels, "test_unseen");

    for (int y : train_labels) {
        if (semantics.is_unseen(y))
            throw InductiveViolationError("train label " + std::to_string(y) +
                                          " belongs to the unseen class set");
        if (!semantics.is_seen(y))
            throw SchemaError("train label " + std::to_string(y) + " outside class range");
    }
    for (int y : test_seen_labels)
        if (!semantics.is_seen(y))
            throw SchemaError("test_seen label " + std::to_string(y) + " not a seen class");
    for (int y : test_unseen_labels)
        if (!semantics.is_unseen(y))
            throw SchemaError("test_unseen label " + std::to_string(y) + " not an unseen class");

    if (meta.n_train != train_features.rows)
        throw SchemaError("meta.n_train disagrees with train feature rows");

    if (!original_to_canonical.empty()) {
        std::set<int> canon;
        for (const auto& [orig, c] : original_to_canonical) {
            (void)orig;
            if (!canon.insert(c).second) throw SchemaError("class id map is not a bijection");
        }
    }
}

namespace {

void write_f32(const fs::path& p, const Mat& m) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    std::vector<float> rowbuf(static_cast<size_t>(m.cols));
    for (int i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) rowbuf[static_cast<size_t>(j)] = static_cast<float>(r[j]);
        f.write(reinterpret_cast<const char*>(rowbuf.data()),
                static_cast<std::streamsize>(sizeof(float) * rowbuf.size()));
    }
    if (!f) throw IoError("short write to " + p.string());
}

Mat read_f32(const fs::path& p, int rows, int cols, const char* what) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw LoadError("missing payload file " + p.string());
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<uint64_t>(f.tellg());
    const uint64_t expect = static_cast<uint64_t>(rows) * static_cast<uint64_t>(cols) * 4u;
    if (bytes != expect)
        throw SchemaError(std::string(what) + ": payload " + p.filename().string() + " holds " +
                          std::to_string(bytes) + " bytes, manifest implies " +
                          std::to_string(expect));
    f.seekg(0);
    Mat m(rows, cols);
    std::vector<float> buf(static_cast<size_t>(rows) * static_cast<size_t>(cols));
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw LoadError("short read from " + p.string());
    for (size_t i = 0; i < buf.size(); ++i) m.d[i] = static_cast<double>(buf[i]);
    return m;
}

void write_i32(const fs::path& p, const std::vector<int32_t>& v) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(int32_t)));
    if (!f) throw IoError("short write to " + p.string());
}

std::vector<int32_t> read_i32(const fs::path& p, size_t count, const char* what) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw LoadError("missing payload file " + p.string());
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<uint64_t>(f.tellg());
    if (bytes != count * sizeof(int32_t))
        throw SchemaError(std::string(what) + ": payload " + p.filename().string() +
                          " size disagrees with manifest");
    f.seekg(0);
    std::vector<int32_t> v(count);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw LoadError("short read from " + p.string());
    return v;
}

}  // namespace

void save_dataset(const GZSLDataset& ds, const fs::path& root) {
    ds.validate();
    fs::create_directories(root);

    // One flat feature file; the manifest's split index lists select rows.
    const int64_t n_total =
        ds.train_features.rows + ds.test_seen_features.rows + ds.test_unseen_features.rows;
    Mat all(static_cast<int>(n_total), ds.meta.dx);
    std::vector<int32_t> labels(static_cast<size_t>(n_total));
    std::vector<int> train_idx, seen_idx, unseen_idx;
    int row = 0;
    auto emit = [&](const Mat& x, const std::vector<int>& y, std::vector<int>& idx) {
        for (int i = 0; i < x.rows; ++i, ++row) {
            std::copy(x.row(i), x.row(i) + x.cols, all.row(row));
            // Payload labels carry the original corpus ids; loading remaps.
            labels[static_cast<size_t>(row)] =
                ds.original_to_canonical.empty()
                    ? y[static_cast<size_t>(i)]
                    : ds.original_id(y[static_cast<size_t>(i)]);
            idx.push_back(row);
        }
    };
    emit(ds.train_features, ds.train_labels, train_idx);
    emit(ds.test_seen_features, ds.test_seen_labels, seen_idx);
    emit(ds.test_unseen_features, ds.test_unseen_labels, unseen_idx);

    write_f32(root / "features.f32", all);
    write_i32(root / "labels.i32", labels);
    write_f32(root / "attributes.f32", ds.semantics.attributes);

    json map_orig = json::array();
    json map_canon = json::array();
    if (ds.original_to_canonical.empty()) {
        for (int c = 1; c <= ds.semantics.total_classes(); ++c) {
            map_orig.push_back(c);
            map_canon.push_back(c);
        }
    } else {
        for (const auto& [orig, canon] : ds.original_to_canonical) {
            map_orig.push_back(orig);
            map_canon.push_back(canon);
        }
    }

    json m{{"format_version", 1},
           {"name", ds.meta.name},
           {"dx", ds.meta.dx},
           {"a_dim", ds.meta.a_dim},
           {"c_seen", ds.meta.c_seen},
           {"c_unseen", ds.meta.c_unseen},
           {"n_total", n_total},
           {"files",
            {{"features", "features.f32"}, {"labels", "labels.i32"},
             {"attributes", "attributes.f32"}}},
           {"class_id_map", {{"original", map_orig}, {"canonical", map_canon}}},
           {"splits",
            {{"train", train_idx}, {"test_seen", seen_idx}, {"test_unseen", unseen_idx}}}};

    std::ofstream mf(root / "manifest.json");
    if (!mf) throw IoError("cannot write manifest.json under " + root.string());
    mf << m.dump(2) << "\n";
}

GZSLDataset load_dataset(const fs::path& root) {
    const fs::path mpath = root / "manifest.json";
    std::ifstream mf(mpath);
    if (!mf) throw LoadError("missing manifest: " + mpath.string());
    json m;
    try {
        mf >> m;
    } catch (const json::exception& e) {
        throw SchemaError("malformed manifest.json: " + std::string(e.what()));
    }

    GZSLDataset ds;
    try {
        if (m.at("format_version").get<int>() != 1)
            throw VersionError("unsupported dataset format_version");
        ds.meta.name = m.at("name").get<std::string>();
        ds.meta.dx = m.at("dx").get<int>();
        ds.meta.a_dim = m.at("a_dim").get<int>();
        ds.meta.c_seen = m.at("c_seen").get<int>();
        ds.meta.c_unseen = m.at("c_unseen").get<int>();

        const auto n_total = m.at("n_total").get<int64_t>();
        const auto files = m.at("files");
        const Mat all = read_f32(root / files.at("features").get<std::string>(),
                                 static_cast<int>(n_total), ds.meta.dx, "features");
        const auto raw_labels = read_i32(root / files.at("labels").get<std::string>(),
                                         static_cast<size_t>(n_total), "labels");
        ds.semantics.attributes =
            read_f32(root / files.at("attributes").get<std::string>(),
                     ds.meta.c_seen + ds.meta.c_unseen, ds.meta.a_dim, "attributes");
        ds.semantics.c_seen = ds.meta.c_seen;
        ds.semantics.c_unseen = ds.meta.c_unseen;

        const auto orig = m.at("class_id_map").at("original").get<std::vector<int>>();
        const auto canon = m.at("class_id_map").at("canonical").get<std::vector<int>>();
        if (orig.size() != canon.size() ||
            orig.size() != static_cast<size_t>(ds.semantics.total_classes()))
            throw SchemaError("class_id_map length disagrees with class counts");
        for (size_t i = 0; i < orig.size(); ++i) ds.original_to_canonical[orig[i]] = canon[i];

        auto take = [&](const char* split, Mat& x, std::vector<int>& y) {
            const auto idx = m.at("splits").at(split).get<std::vector<int>>();
            x = Mat(static_cast<int>(idx.size()), ds.meta.dx);
            y.resize(idx.size());
            for (size_t i = 0; i < idx.size(); ++i) {
                if (idx[i] < 0 || idx[i] >= all.rows)
                    throw SchemaError(std::string(split) + " index out of range");
                std::copy(all.row(idx[i]), all.row(idx[i]) + all.cols,
                          x.row(static_cast<int>(i)));
                y[i] = ds.canonical_id(raw_labels[static_cast<size_t>(idx[i])]);
            }
        };
        take("train", ds.train_features, ds.train_labels);
        take("test_seen", ds.test_seen_features, ds.test_seen_labels);
        take("test_unseen", ds.test_unseen_features, ds.test_unseen_labels);
        ds.meta.n_train = ds.train_features.rows;

        // Splits must not share rows.
        std::set<int> used;
        for (const char* split : {"train", "test_seen", "test_unseen"})
            for (int i : m.at("splits").at(split).get<std::vector<int>>())
                if (!used.insert(i).second)
                    throw SchemaError("split index lists overlap at row " + std::to_string(i));
    } catch (const json::exception& e) {
        throw SchemaError("manifest field error: " + std::string(e.what()));
    }

    ds.validate();
    return ds;
}

std::string dataset_content_hash(const GZSLDataset& ds) {
    // Hash the canonical in-memory content, not the files, so toy datasets
    // that never touch disk hash identically to their saved form.
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    auto mix_mat_f32 = [&](const Mat& m) {
        for (double v : m.d) {
            const float f = static_cast<float>(v);
            mix(&f, sizeof(f));
        }
    };
    auto mix_labels = [&](const std::vector<int>& y) {
        for (int v : y) {
            const int32_t i = v;
            mix(&i, sizeof(i));
        }
    };
    mix_mat_f32(ds.train_features);
    mix_labels(ds.train_labels);
    mix_mat_f32(ds.test_seen_features);
    mix_labels(ds.test_seen_labels);
    mix_mat_f32(ds.test_unseen_features);
    mix_labels(ds.test_unseen_labels);
    mix_mat_f32(ds.semantics.attributes);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

void quantize_f32(Mat& m) {
    for (double& v : m.d) v = static_cast<double>(static_cast<float>(v));
}

Mat toy_class_means(const ToySpec& spec) {
    // Attribute vectors and the linear map depend only on (seed, class
    // counts, dims), never on n_per_class, so means are stable across sizes.
    Rng attr_rng(spec.seed, 1);
    const int c_total = spec.c_seen + spec.c_unseen;
    Mat attrs(c_total, spec.a_dim);
    for (int c = 0; c < c_total; ++c)
        for (int j = 0; j < spec.a_dim; ++j) attrs(c, j) = attr_rng.uniform();

    Rng map_rng(spec.seed, 2);
    Mat lin(spec.dx, spec.a_dim);
    const double scale = 2.0 / std::sqrt(static_cast<double>(spec.a_dim));
    for (int i = 0; i < spec.dx; ++i)
        for (int j = 0; j < spec.a_dim; ++j) lin(i, j) = std::fabs(map_rng.normal()) * scale;

    return matmul_nt(attrs, lin);  // c_total x dx
}

GZSLDataset make_toy_dataset(const ToySpec& spec) {
    if (spec.c_seen < 1 || spec.c_unseen < 1 || spec.dx < 1 || spec.a_dim < 1 ||
        spec.n_per_class < 1)
        throw ArgumentError("make_toy_dataset: all counts must be >= 1");
    if (spec.dx < spec.a_dim) throw ArgumentError("make_toy_dataset: dx must be >= a_dim");
    const int n_test = spec.test_per_class < 0 ? spec.n_per_class : spec.test_per_class;

    const int c_total = spec.c_seen + spec.c_unseen;
    GZSLDataset ds;
    ds.meta.name = "toy";
    ds.meta.dx = spec.dx;
    ds.meta.a_dim = spec.a_dim;
    ds.meta.c_seen = spec.c_seen;
    ds.meta.c_unseen = spec.c_unseen;

    Rng attr_rng(spec.seed, 1);
    ds.semantics.attributes = Mat(c_total, spec.a_dim);
    for (int c = 0; c < c_total; ++c)
        for (int j = 0; j < spec.a_dim; ++j) ds.semantics.attributes(c, j) = attr_rng.uniform();
    ds.semantics.c_seen = spec.c_seen;
    ds.semantics.c_unseen = spec.c_unseen;

    const Mat means = toy_class_means(spec);

    auto draw_block = [&](int class_id, int n, uint64_t stream, Mat& x, std::vector<int>& y) {
        Rng rng(spec.seed, stream);
        const int base = x.rows;
        Mat grown(base + n, spec.dx);
        std::copy(x.d.begin(), x.d.end(), grown.d.begin());
        for (int i = 0; i < n; ++i) {
            double* r = grown.row(base + i);
            const double* mu = means.row(class_id - 1);
            for (int j = 0; j < spec.dx; ++j) r[j] = mu[j] + spec.noise_sigma * rng.normal();
            y.push_back(class_id);
        }
        x = std::move(grown);
    };

    for (int c = 1; c <= spec.c_seen; ++c) {
        draw_block(c, spec.n_per_class, 100 + static_cast<uint64_t>(c), ds.train_features,
                   ds.train_labels);
        draw_block(c, n_test, 10000 + static_cast<uint64_t>(c), ds.test_seen_features,
                   ds.test_seen_labels);
    }
    for (int c = spec.c_seen + 1; c <= c_total; ++c)
        draw_block(c, n_test, 20000 + static_cast<uint64_t>(c), ds.test_unseen_features,
                   ds.test_unseen_labels);

    quantize_f32(ds.train_features);
    quantize_f32(ds.test_seen_features);
    quantize_f32(ds.test_unseen_features);
    quantize_f32(ds.semantics.attributes);
    ds.meta.n_train = ds.train_features.rows;
    for (int c = 1; c <= c_total; ++c) ds.original_to_canonical[c] = c;
    ds.validate();
    return ds;
}

GZSLDataset make_toy_dataset(uint64_t seed, int c_seen, int c_unseen, int dx, int a_dim,
                             int n_per_class) {
    ToySpec spec;
    spec.seed = seed;
    spec.c_seen = c_seen;
    spec.c_unseen = c_unseen;
    spec.dx = dx;
    spec.a_dim = a_dim;
    spec.n_per_class = n_per_class;
    return make_toy_dataset(spec);
}

void minmax_normalize(GZSLDataset& ds) {
    if (ds.train_features.rows == 0) throw ArgumentError("minmax_normalize: empty train set");
    std::vector<double> lo(static_cast<size_t>(ds.meta.dx)),
        hi(static_cast<size_t>(ds.meta.dx));
    for (int j = 0; j < ds.meta.dx; ++j) {
        double mn = ds.train_features(0, j), mx = mn;
        for (int i = 1; i < ds.train_features.rows; ++i) {
            mn = std::min(mn, ds.train_features(i, j));
            mx = std::max(mx, ds.train_features(i, j));
        }
        lo[static_cast<size_t>(j)] = mn;
        hi[static_cast<size_t>(j)] = mx;
    }
    auto apply = [&](Mat& x) {
        for (int i = 0; i < x.rows; ++i)
            for (int j = 0; j < x.cols; ++j) {
                const double span = hi[static_cast<size_t>(j)] - lo[static_cast<size_t>(j)];
                x(i, j) = span > 0 ? (x(i, j) - lo[static_cast<size_t>(j)]) / span : 0.0;
            }
    };
    apply(ds.train_features);
    apply(ds.test_seen_features);
    apply(ds.test_unseen_features);
}

BatchIterator::BatchIterator(const GZSLDataset& ds, int batch_size, uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), rng_(seed, 7) {
    if (batch_size < 1) throw ArgumentError("BatchIterator: batch_size must be >= 1");
    if (ds.train_features.rows == 0) throw ArgumentError("BatchIterator: empty dataset");
    perm_ = rng_.permutation(ds.train_features.rows);
}

void BatchIterator::reshuffle() {
    perm_ = rng_.permutation(ds_->train_features.rows);
    cursor_ = 0;
}

bool BatchIterator::next(Batch& out) {
    const int n = static_cast<int>(perm_.size());
    if (cursor_ >= n) return false;
    const int take = std::min(batch_size_, n - cursor_);
    out.indices.assign(perm_.begin() + cursor_, perm_.begin() + cursor_ + take);
    cursor_ += take;
    out.x = gather_rows(ds_->train_features, out.indices);
    out.y.resize(out.indices.size());
    for (size_t i = 0; i < out.indices.size(); ++i)
        out.y[i] = ds_->train_labels[static_cast<size_t>(out.indices[i])];
    out.a = ds_->semantics.rows_for_labels(out.y);
    return true;
}

void BatchIterator::restore(const std::array<uint64_t, 4>& rng_state, std::vector<int> perm,
                            int cursor) {
    rng_.set_state(rng_state);
    perm_ = std::move(perm);
    cursor_ = cursor;
}

}  // namespace bmcogan
