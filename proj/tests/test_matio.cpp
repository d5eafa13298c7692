// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "bmcogan/error.hpp"
#include "bmcogan/matio.hpp"

using namespace bmcogan;
namespace fs = std::filesystem;

namespace {

// Minimal Level-5 MAT writer used only to build fixtures for the importer.
struct MatWriter {
    std::vector<uint8_t> buf;

    MatWriter() {
        buf.resize(128, 0);
        const char* text = "MATLAB 5.0 MAT-file, test fixture";
        std::memcpy(buf.data(), text, std::strlen(text));
        buf[124] = 0x00;
        buf[125] = 0x01;  // version 0x0100
        buf[126] = 'I';
        buf[127] = 'M';
    }

    static void put_u32(std::vector<uint8_t>& v, uint32_t x) {
        const auto at = v.size();
        v.resize(at + 4);
        std::memcpy(v.data() + at, &x, 4);
    }

    static void pad8(std::vector<uint8_t>& v) {
        while (v.size() % 8 != 0) v.push_back(0);
    }

    static void element(std::vector<uint8_t>& v, uint32_t type, const void* data, size_t size) {
        put_u32(v, type);
        put_u32(v, static_cast<uint32_t>(size));
        const auto at = v.size();
        v.resize(at + size);
        std::memcpy(v.data() + at, data, size);
        pad8(v);
    }

    // col-major doubles; as_single stores the payload as 32-bit floats
    static std::vector<uint8_t> matrix_element(const std::string& name, int rows, int cols,
                                               const std::vector<double>& data,
                                               bool as_single = false) {
        std::vector<uint8_t> body;
        const uint32_t flags[2] = {as_single ? 7u : 6u, 0u};  // mxSINGLE / mxDOUBLE
        element(body, 6 /*miUINT32*/, flags, 8);
        const int32_t dims[2] = {rows, cols};
        element(body, 5 /*miINT32*/, dims, 8);
        element(body, 1 /*miINT8*/, name.data(), name.size());
        if (as_single) {
            std::vector<float> f(data.begin(), data.end());
            element(body, 7 /*miSINGLE*/, f.data(), f.size() * 4);
        } else {
            element(body, 9 /*miDOUBLE*/, data.data(), data.size() * 8);
        }

        std::vector<uint8_t> full;
        put_u32(full, 14 /*miMATRIX*/);
        put_u32(full, static_cast<uint32_t>(body.size()));
        full.insert(full.end(), body.begin(), body.end());
        return full;
    }

    void add(const std::string& name, int rows, int cols, const std::vector<double>& data,
             bool as_single = false) {
        const auto el = matrix_element(name, rows, cols, data, as_single);
        buf.insert(buf.end(), el.begin(), el.end());
        pad8(buf);
    }

    void add_compressed(const std::string& name, int rows, int cols,
                        const std::vector<double>& data) {
        const auto el = matrix_element(name, rows, cols, data);
        uLongf bound = compressBound(static_cast<uLong>(el.size()));
        std::vector<uint8_t> packed(bound);
        REQUIRE(compress(packed.data(), &bound, el.data(), static_cast<uLong>(el.size())) ==
                Z_OK);
        packed.resize(bound);
        element(buf, 15 /*miCOMPRESSED*/, packed.data(), packed.size());
    }

    fs::path write(const char* tag) const {
        const fs::path p = fs::temp_directory_path() / (std::string("bmcogan_") + tag + ".mat");
        std::ofstream f(p, std::ios::binary);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size()));
        return p;
    }
};

}  // namespace

TEST_CASE("mat reader handles plain, single-precision, and compressed arrays") {
    MatWriter w;
    w.add("plain", 2, 3, {1, 2, 3, 4, 5, 6});        // col-major
    w.add("floaty", 2, 2, {1.5, -2.5, 3.25, 4}, true);
    w.add_compressed("packed", 3, 1, {7, 8, 9});
    const auto path = w.write("reader");

    const auto vars = read_mat_file(path);
    REQUIRE(vars.count("plain") == 1);
    REQUIRE(vars.count("floaty") == 1);
    REQUIRE(vars.count("packed") == 1);

    const auto& plain = vars.at("plain");
    CHECK(plain.rows() == 2);
    CHECK(plain.cols() == 3);
    CHECK(plain.at(0, 0) == 1.0);
    CHECK(plain.at(1, 0) == 2.0);  // column-major layout
    CHECK(plain.at(0, 1) == 3.0);
    CHECK(vars.at("floaty").at(1, 0) == -2.5);
    CHECK(vars.at("packed").at(2, 0) == 9.0);
}

TEST_CASE("mat reader rejects garbage and missing files") {
    const fs::path junk = fs::temp_directory_path() / "bmcogan_junk.mat";
    std::ofstream(junk) << "hello";
    CHECK_THROWS_AS(read_mat_file(junk), LoadError);
    CHECK_THROWS_AS(read_mat_file(fs::temp_directory_path() / "bmcogan_nonexistent.mat"),
                    LoadError);
}

namespace {

// Fixture mirroring the common res101/att_splits layout:
// 10 samples, dx=3, classes 1..5 (original ids), A=2 attributes.
// Seen original classes {2, 3, 5}; unseen {1, 4}.
struct XlsaFixture {
    fs::path features_path, splits_path;

    XlsaFixture() {
        const int n = 10, dx = 3;
        // feature of sample i = (i+1, 10(i+1), 100(i+1))
        std::vector<double> features(static_cast<size_t>(n) * dx);  // dx x n col-major
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dx; ++j)
                features[static_cast<size_t>(i) * dx + j] =
                    (i + 1) * std::pow(10.0, j);
        const std::vector<double> labels = {2, 2, 3, 3, 5, 5, 1, 1, 4, 4};

        MatWriter fw;
        fw.add("features", dx, n, features);
        fw.add("labels", n, 1, labels);
        features_path = fw.write("res101");

        // att: A x C, column c-1 = attributes of original class c
        std::vector<double> att;
        for (int c = 1; c <= 5; ++c) {
            att.push_back(c * 0.1);      // attribute 1
            att.push_back(c * 0.1 + 5);  // attribute 2
        }
        MatWriter sw;
        sw.add("att", 2, 5, att);
        sw.add("trainval_loc", 4, 1, {1, 3, 5, 6});       // samples of classes 2,3,5
        sw.add("train_loc", 2, 1, {1, 3});
        sw.add("test_seen_loc", 2, 1, {2, 4});            // classes 2,3
        sw.add("test_unseen_loc", 4, 1, {7, 8, 9, 10});   // classes 1,4
        splits_path = sw.write("att_splits");
    }
};

}  // namespace

TEST_CASE("xlsa import remaps classes, transposes features, and validates") {
    const XlsaFixture fx;
    const GZSLDataset ds = import_xlsa_dataset(fx.features_path, fx.splits_path, "toyml");

    CHECK(ds.meta.name == "toyml");
    CHECK(ds.meta.dx == 3);
    CHECK(ds.meta.a_dim == 2);
    CHECK(ds.meta.c_seen == 3);
    CHECK(ds.meta.c_unseen == 2);
    CHECK(ds.train_features.rows == 4);
    CHECK(ds.test_seen_features.rows == 2);
    CHECK(ds.test_unseen_features.rows == 4);

    // canonical: seen {2,3,5} -> {1,2,3}; unseen {1,4} -> {4,5}
    CHECK(ds.original_to_canonical.at(2) == 1);
    CHECK(ds.original_to_canonical.at(3) == 2);
    CHECK(ds.original_to_canonical.at(5) == 3);
    CHECK(ds.original_to_canonical.at(1) == 4);
    CHECK(ds.original_to_canonical.at(4) == 5);

    // sample 1 (original class 2) leads the train split, features transposed
    CHECK(ds.train_features(0, 0) == 1.0);
    CHECK(ds.train_features(0, 1) == 10.0);
    CHECK(ds.train_features(0, 2) == 100.0);
    CHECK(ds.train_labels[0] == 1);

    // attribute rows follow canonical order: canonical 1 = original class 2
    CHECK(ds.semantics.attributes(0, 0) == doctest::Approx(0.2));
    CHECK(ds.semantics.attributes(3, 0) == doctest::Approx(0.1));  // canonical 4 = original 1

    // train_loc variant uses the smaller training split
    const GZSLDataset ds2 =
        import_xlsa_dataset(fx.features_path, fx.splits_path, "toyml", false);
    CHECK(ds2.train_features.rows == 2);
}

TEST_CASE("xlsa import round-trips through the portable container") {
    const XlsaFixture fx;
    const GZSLDataset ds = import_xlsa_dataset(fx.features_path, fx.splits_path, "toyml");
    const fs::path dir = fs::temp_directory_path() / "bmcogan_imported";
    fs::remove_all(dir);
    save_dataset(ds, dir);
    const GZSLDataset back = load_dataset(dir);
    CHECK(back.train_features.d == ds.train_features.d);
    CHECK(back.train_labels == ds.train_labels);
    CHECK(back.original_to_canonical == ds.original_to_canonical);
}

TEST_CASE("xlsa import rejects a class present in both train and test_unseen") {
    const int n = 4, dx = 2;
    std::vector<double> features(static_cast<size_t>(n) * dx, 1.0);
    MatWriter fw;
    fw.add("features", dx, n, features);
    fw.add("labels", n, 1, {1, 2, 1, 2});
    const auto fpath = fw.write("bad_res101");

    MatWriter sw;
    sw.add("att", 2, 2, {0.1, 0.2, 0.3, 0.4});
    sw.add("trainval_loc", 2, 1, {1, 2});       // classes 1 and 2 in training...
    sw.add("test_seen_loc", 1, 1, {3});
    sw.add("test_unseen_loc", 1, 1, {4});       // ...and class 2 also unseen
    const auto spath = sw.write("bad_splits");

    CHECK_THROWS_AS(import_xlsa_dataset(fpath, spath, "bad"), InductiveViolationError);
}

TEST_CASE("xlsa import reports missing variables by name") {
    MatWriter fw;
    fw.add("features", 2, 2, {1, 2, 3, 4});
    const auto fpath = fw.write("incomplete");
    MatWriter sw;
    sw.add("att", 1, 2, {0.5, 0.6});
    const auto spath = sw.write("incomplete_splits");
    CHECK_THROWS_AS(import_xlsa_dataset(fpath, spath, "x"), SchemaError);
}
