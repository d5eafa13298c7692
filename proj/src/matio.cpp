// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/matio.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <zlib.h>

#include "bmcogan/error.hpp"

namespace bmcogan {

namespace {

// MAT-file data type tags.
enum MiType : uint32_t {
    miINT8 = 1,
    miUINT8 = 2,
    miINT16 = 3,
    miUINT16 = 4,
    miINT32 = 5,
    miUINT32 = 6,
    miSINGLE = 7,
    miDOUBLE = 9,
    miINT64 = 12,
    miUINT64 = 13,
    miMATRIX = 14,
    miCOMPRESSED = 15,
};

// Array class codes (subset).
enum MxClass : uint32_t {
    mxDOUBLE_CLASS = 6,
    mxSINGLE_CLASS = 7,
    mxINT8_CLASS = 8,
    mxUINT8_CLASS = 9,
    mxINT16_CLASS = 10,
    mxUINT16_CLASS = 11,
    mxINT32_CLASS = 12,
    mxUINT32_CLASS = 13,
};

struct Cursor {
    const uint8_t* p;
    size_t len;
    size_t at = 0;

    void require(size_t n, const char* what) const {
        if (at + n > len) throw LoadError(std::string("mat file truncated in ") + what);
    }
    uint32_t u32(const char* what) {
        require(4, what);
        uint32_t v;
        std::memcpy(&v, p + at, 4);
        at += 4;
        return v;
    }
    const uint8_t* bytes(size_t n, const char* what) {
        require(n, what);
        const uint8_t* out = p + at;
        at += n;
        return out;
    }
    void align8() { at = (at + 7) & ~size_t{7}; }
    bool done() const { return at >= len; }
};

struct Element {
    uint32_t type = 0;
    const uint8_t* data = nullptr;
    size_t size = 0;
};

Element next_element(Cursor& cur) {
    Element e;
    const uint32_t tag = cur.u32("element tag");
    if ((tag & 0xFFFF0000u) != 0) {  // small data element: size in the upper half
        e.type = tag & 0xFFFFu;
        e.size = tag >> 16;
        e.data = cur.bytes(4, "small element data");
        if (e.size > 4) throw LoadError("mat file: small element longer than 4 bytes");
        return e;
    }
    e.type = tag;
    e.size = cur.u32("element size");
    e.data = cur.bytes(e.size, "element data");
    cur.align8();
    return e;
}

size_t mi_type_size(uint32_t type) {
    switch (type) {
        case miINT8:
        case miUINT8: return 1;
        case miINT16:
        case miUINT16: return 2;
        case miINT32:
        case miUINT32:
        case miSINGLE: return 4;
        case miDOUBLE:
        case miINT64:
        case miUINT64: return 8;
        default: return 0;
    }
}

std::vector<double> decode_numeric(const Element& e, const char* what) {
    const size_t unit = mi_type_size(e.type);
    if (unit == 0)
        throw LoadError(std::string("mat file: unsupported numeric storage type in ") + what);
    const size_t n = e.size / unit;
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* q = e.data + i * unit;
        switch (e.type) {
            case miINT8: out[i] = *reinterpret_cast<const int8_t*>(q); break;
            case miUINT8: out[i] = *q; break;
            case miINT16: {
                int16_t v;
                std::memcpy(&v, q, 2);
                out[i] = v;
                break;
            }
            case miUINT16: {
                uint16_t v;
                std::memcpy(&v, q, 2);
                out[i] = v;
                break;
            }
            case miINT32: {
                int32_t v;
                std::memcpy(&v, q, 4);
                out[i] = v;
                break;
            }
            case miUINT32: {
                uint32_t v;
                std::memcpy(&v, q, 4);
                out[i] = v;
                break;
            }
            case miSINGLE: {
                float v;
                std::memcpy(&v, q, 4);
                out[i] = v;
                break;
            }
            case miDOUBLE: {
                double v;
                std::memcpy(&v, q, 8);
                out[i] = v;
                break;
            }
            case miINT64: {
                int64_t v;
                std::memcpy(&v, q, 8);
                out[i] = static_cast<double>(v);
                break;
            }
            case miUINT64: {
                uint64_t v;
                std::memcpy(&v, q, 8);
                out[i] = static_cast<double>(v);
                break;
            }
            default: break;
        }
    }
    return out;
}

bool numeric_class(uint32_t cls) {
    return cls >= mxDOUBLE_CLASS && cls <= mxUINT32_CLASS;
}

// Parses one miMATRIX payload; returns false for unsupported array classes.
bool parse_matrix(const Element& outer, MatVariable& var) {
    Cursor cur{outer.data, outer.size, 0};

    const Element flags = next_element(cur);
    if (flags.type != miUINT32 || flags.size < 8)
        throw LoadError("mat file: malformed array flags");
    uint32_t flagword;
    std::memcpy(&flagword, flags.data, 4);
    const uint32_t cls = flagword & 0xFFu;
    const bool complex_flag = (flagword & 0x0800u) != 0;

    const Element dims_el = next_element(cur);
    const auto dims_d = decode_numeric(dims_el, "dimensions");
    std::vector<int> dims(dims_d.begin(), dims_d.end());

    const Element name_el = next_element(cur);
    var.name.assign(reinterpret_cast<const char*>(name_el.data), name_el.size);
    // names are NUL-padded in small elements
    var.name.erase(std::find(var.name.begin(), var.name.end(), '\0'), var.name.end());

    if (!numeric_class(cls)) return false;  // cell/struct/char arrays are skipped
    if (complex_flag) return false;
    if (dims.size() != 2)
        throw LoadError("mat file: only 2-D numeric arrays are supported (" + var.name + ")");

    const Element real_el = next_element(cur);
    var.dims = dims;
    var.data = decode_numeric(real_el, var.name.c_str());
    const size_t expect = static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]);
    if (var.data.size() != expect)
        throw LoadError("mat file: element count mismatch in variable " + var.name);
    return true;
}

std::vector<uint8_t> inflate_buffer(const uint8_t* data, size_t size) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw LoadError("zlib: inflateInit failed");
    std::vector<uint8_t> out;
    out.resize(std::max<size_t>(size * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    size_t written = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw LoadError("zlib: corrupt compressed mat element");
        }
        written = out.size() - zs.avail_out;
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

}  // namespace

std::map<std::string, MatVariable> read_mat_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot open mat file: " + path.string());
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    if (buf.size() < 128) throw LoadError("mat file too short: " + path.string());

    uint16_t version, endian;
    std::memcpy(&version, buf.data() + 124, 2);
    std::memcpy(&endian, buf.data() + 126, 2);
    if (endian != 0x4D49)  // "IM" read little-endian
        throw LoadError("mat file: big-endian files are not supported");
    if (version != 0x0100)
        throw VersionError("mat file: unsupported version (v7.3/HDF5 archives need conversion)");

    std::map<std::string, MatVariable> vars;
    Cursor cur{buf.data(), buf.size(), 128};
    while (!cur.done()) {
        if (cur.len - cur.at < 8) break;  // trailing padding
        const Element e = next_element(cur);
        std::vector<uint8_t> inflated;
        Element matrix = e;
        if (e.type == miCOMPRESSED) {
            inflated = inflate_buffer(e.data, e.size);
            Cursor inner{inflated.data(), inflated.size(), 0};
            matrix = next_element(inner);
        }
        if (matrix.type != miMATRIX) continue;
        MatVariable var;
        if (parse_matrix(matrix, var)) vars[var.name] = std::move(var);
    }
    return vars;
}

GZSLDataset import_xlsa_dataset(const std::filesystem::path& features_mat,
                                const std::filesystem::path& splits_mat,
                                const std::string& name, bool use_trainval) {
    const auto feats = read_mat_file(features_mat);
    const auto splits = read_mat_file(splits_mat);

    auto need = [](const std::map<std::string, MatVariable>& m, const char* key,
                   const std::filesystem::path& p) -> const MatVariable& {
        const auto it = m.find(key);
        if (it == m.end())
            throw SchemaError(std::string("variable '") + key + "' missing from " + p.string());
        return it->second;
    };

    const MatVariable& features = need(feats, "features", features_mat);  // dx x N
    const MatVariable& labels = need(feats, "labels", features_mat);      // N x 1
    const MatVariable& att = need(splits, "att", splits_mat);             // A x C
    const char* train_key = use_trainval ? "trainval_loc" : "train_loc";
    const MatVariable& train_loc = need(splits, train_key, splits_mat);
    const MatVariable& seen_loc = need(splits, "test_seen_loc", splits_mat);
    const MatVariable& unseen_loc = need(splits, "test_unseen_loc", splits_mat);

    const int dx = features.rows();
    const int n = features.cols();
    if (static_cast<int>(labels.data.size()) != n)
        throw SchemaError("labels count disagrees with feature columns");
    const int a_dim = att.rows();
    const int c_total_orig = att.cols();

    auto loc_to_indices = [n](const MatVariable& loc, const char* what) {
        std::vector<int> idx;
        idx.reserve(loc.data.size());
        for (double v : loc.data) {
            const int i = static_cast<int>(v) - 1;  // MATLAB indices are 1-based
            if (i < 0 || i >= n)
                throw SchemaError(std::string(what) + " index out of range: " + std::to_string(v));
            idx.push_back(i);
        }
        return idx;
    };
    const auto train_idx = loc_to_indices(train_loc, train_key);
    const auto seen_idx = loc_to_indices(seen_loc, "test_seen_loc");
    const auto unseen_idx = loc_to_indices(unseen_loc, "test_unseen_loc");

    auto label_of = [&labels](int sample) { return static_cast<int>(labels.data[sample]); };

    std::set<int> seen_orig, unseen_orig;
    for (int i : train_idx) seen_orig.insert(label_of(i));
    for (int i : seen_idx) seen_orig.insert(label_of(i));
    for (int i : unseen_idx) unseen_orig.insert(label_of(i));
    for (int c : unseen_orig)
        if (seen_orig.count(c))
            throw InductiveViolationError("class " + std::to_string(c) +
                                          " appears in both train and test_unseen splits");

    GZSLDataset ds;
    ds.meta.name = name;
    ds.meta.dx = dx;
    ds.meta.a_dim = a_dim;
    ds.meta.c_seen = static_cast<int>(seen_orig.size());
    ds.meta.c_unseen = static_cast<int>(unseen_orig.size());

    int canon = 1;
    for (int c : seen_orig) ds.original_to_canonical[c] = canon++;
    for (int c : unseen_orig) ds.original_to_canonical[c] = canon++;

    ds.semantics.c_seen = ds.meta.c_seen;
    ds.semantics.c_unseen = ds.meta.c_unseen;
    ds.semantics.attributes = Mat(ds.meta.c_seen + ds.meta.c_unseen, a_dim);
    for (const auto& [orig, canon_id] : ds.original_to_canonical) {
        if (orig < 1 || orig > c_total_orig)
            throw SchemaError("label " + std::to_string(orig) +
                              " has no attribute column in att");
        for (int j = 0; j < a_dim; ++j)
            ds.semantics.attributes(canon_id - 1, j) = att.at(j, orig - 1);
    }

    auto fill = [&](const std::vector<int>& idx, Mat& x, std::vector<int>& y) {
        x = Mat(static_cast<int>(idx.size()), dx);
        y.resize(idx.size());
        for (size_t r = 0; r < idx.size(); ++r) {
            for (int j = 0; j < dx; ++j) x(static_cast<int>(r), j) = features.at(j, idx[r]);
            y[r] = ds.original_to_canonical.at(label_of(idx[r]));
        }
    };
    fill(train_idx, ds.train_features, ds.train_labels);
    fill(seen_idx, ds.test_seen_features, ds.test_seen_labels);
    fill(unseen_idx, ds.test_unseen_features, ds.test_unseen_labels);
    // the portable container stores f32 payloads; round once at import
    quantize_f32(ds.train_features);
    quantize_f32(ds.test_seen_features);
    quantize_f32(ds.test_unseen_features);
    quantize_f32(ds.semantics.attributes);
    ds.meta.n_train = ds.train_features.rows;

    ds.validate();
    return ds;
}

}  // namespace bmcogan
