// SPDX-License-Identifier: Apache-2.0
#include "bmcogan/mat.hpp"

#include <algorithm>

namespace bmcogan {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: inner dimensions differ");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: inner dimensions differ");
    Mat c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Mat concat_cols(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw ShapeError("concat_cols: row counts differ");
    Mat c(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        std::copy(a.row(i), a.row(i) + a.cols, c.row(i));
        std::copy(b.row(i), b.row(i) + b.cols, c.row(i) + a.cols);
    }
    return c;
}

Mat concat_rows(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw ShapeError("concat_rows: column counts differ");
    Mat c(a.rows + b.rows, a.cols);
    std::copy(a.d.begin(), a.d.end(), c.d.begin());
    std::copy(b.d.begin(), b.d.end(), c.d.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return c;
}

Mat slice_cols(const Mat& a, int begin, int end) {
    if (begin < 0 || end > a.cols || begin > end) throw ShapeError("slice_cols: bad range");
    Mat c(a.rows, end - begin);
    for (int i = 0; i < a.rows; ++i) std::copy(a.row(i) + begin, a.row(i) + end, c.row(i));
    return c;
}

Mat gather_rows(const Mat& a, const std::vector<int>& idx) {
    Mat c(static_cast<int>(idx.size()), a.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        const int r = idx[i];
        if (r < 0 || r >= a.rows) throw ArgumentError("gather_rows: index out of range");
        std::copy(a.row(r), a.row(r) + a.cols, c.row(static_cast<int>(i)));
    }
    return c;
}

void add_rowvec(Mat& a, const Mat& b) {
    if (b.rows != 1 || b.cols != a.cols) throw ShapeError("add_rowvec: bias must be 1 x cols");
    for (int i = 0; i < a.rows; ++i) {
        double* arow = a.row(i);
        const double* brow = b.row(0);
        for (int j = 0; j < a.cols; ++j) arow[j] += brow[j];
    }
}

Mat colsum(const Mat& a) {
    Mat c(1, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < a.cols; ++j) c(0, j) += arow[j];
    }
    return c;
}

void axpy(double alpha, const Mat& x, Mat& y) {
    check_same_shape(x, y, "axpy");
    for (size_t i = 0; i < x.size(); ++i) y.d[i] += alpha * x.d[i];
}

void scale(Mat& y, double alpha) {
    for (double& v : y.d) v *= alpha;
}

double dot(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "dot");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.d[i] * b.d[i];
    return acc;
}

double squared_norm(const Mat& a) {
    double acc = 0.0;
    for (double v : a.d) acc += v * v;
    return acc;
}

double row_squared_distance(const Mat& a, int i, const Mat& b, int j) {
    if (a.cols != b.cols) throw ShapeError("row_squared_distance: widths differ");
    const double* x = a.row(i);
    const double* y = b.row(j);
    double acc = 0.0;
    for (int k = 0; k < a.cols; ++k) {
        const double dk = x[k] - y[k];
        acc += dk * dk;
    }
    return acc;
}

}  // namespace bmcogan
