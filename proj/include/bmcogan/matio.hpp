// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bmcogan/dataset.hpp"

namespace bmcogan {

// One numeric MATLAB array, column-major as stored on disk.
struct MatVariable {
    std::string name;
    std::vector<int> dims;
    std::vector<double> data;

    int rows() const { return dims.empty() ? 0 : dims[0]; }
    int cols() const { return dims.size() < 2 ? 1 : dims[1]; }
    double at(int r, int c) const { return data[static_cast<size_t>(c) * rows() + r]; }
};

// Level-5 MAT-file reader covering what the split archives use: real numeric
// 2-D arrays in plain or zlib-compressed elements. Unsupported variables
// (cells, structs, char) are skipped by name.
std::map<std::string, MatVariable> read_mat_file(const std::filesystem::path& path);

// Builds a canonical dataset from the common res101/att_splits archive pair.
// use_trainval selects trainval_loc (standard GZSL protocol) over train_loc.
GZSLDataset import_xlsa_dataset(const std::filesystem::path& features_mat,
                                const std::filesystem::path& splits_mat,
                                const std::string& name, bool use_trainval = true);

}  // namespace bmcogan
