#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "traco/errors.hpp"

namespace traco {

// Dense row-major matrix of doubles. Column vectors are n x 1, row vectors 1 x n.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix column(std::span<const double> values);
    static Matrix row(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

    void fill(double x) { v_.assign(v_.size(), x); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

// Throws NumericError naming `what` if any entry is NaN or infinite.
void check_finite(const Matrix& m, const char* what);
bool all_finite(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Squared Euclidean distances between columns: a is D x m, b is D x n, result m x n.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b);

// Numerically stable softmax of a vector (max-shifted). Empty input throws.
std::vector<double> softmax_stable(std::span<const double> logits);

// Max-shifted log(sum(exp(x))). Empty input throws.
double logsumexp(std::span<const double> x);

double l1_distance(std::span<const double> a, std::span<const double> b);

}  // namespace traco
