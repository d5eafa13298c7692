// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "bmcogan/error.hpp"

namespace bmcogan {

// Dense row-major double matrix. Row = sample everywhere in this project.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), d(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
    }

    double& operator()(int i, int j) { return d[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return d[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return d.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return d.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return d.size(); }
    bool empty() const { return d.empty(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void zero() { std::fill(d.begin(), d.end(), 0.0); }

    bool all_finite() const {
        for (double v : d)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// C = A * B, A: r x k, B: k x c
Mat matmul(const Mat& a, const Mat& b);
// C = A * B^T, A: r x k, B: c x k
Mat matmul_nt(const Mat& a, const Mat& b);
// C = A^T * B, A: k x r, B: k x c
Mat matmul_tn(const Mat& a, const Mat& b);

// [A | B] along columns; rows must match.
Mat concat_cols(const Mat& a, const Mat& b);
// A stacked on top of B; columns must match.
Mat concat_rows(const Mat& a, const Mat& b);
// Columns [begin, end) of a.
Mat slice_cols(const Mat& a, int begin, int end);
// Rows listed in idx (may repeat).
Mat gather_rows(const Mat& a, const std::vector<int>& idx);

// a(i, :) += b(0, :) for every row; b is 1 x cols.
void add_rowvec(Mat& a, const Mat& b);
// 1 x cols column sums.
Mat colsum(const Mat& a);
// y += alpha * x
void axpy(double alpha, const Mat& x, Mat& y);
// Elementwise y *= alpha
void scale(Mat& y, double alpha);

double dot(const Mat& a, const Mat& b);
double squared_norm(const Mat& a);
double row_squared_distance(const Mat& a, int i, const Mat& b, int j);

inline void check_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ")");
}

}  // namespace bmcogan
