#include "traco/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "traco/parallel.hpp"

namespace traco {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: value count does not match rows*cols");
    }
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool all_finite(const Matrix& m) {
    for (double x : m.values()) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void check_finite(const Matrix& m, const char* what) {
    if (!all_finite(m)) {
        throw NumericError(std::string(what) + ": non-finite value");
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t bc = b.cols();
    auto run_rows = [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            double* outp = out.data() + i * bc;
            const double* ap = a.data() + i * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                const double av = ap[k];
                if (av == 0.0) continue;
                const double* bp = b.data() + k * bc;
                for (std::size_t j = 0; j < bc; ++j) outp[j] += av * bp[j];
            }
        }
    };
    // Row-partitioned: each output element is accumulated by exactly one
    // thread in fixed k order, so results are bitwise identical for any
    // thread count.
    if (a.rows() * inner * bc >= (1u << 18)) {
        parallel_for(a.rows(), run_rows);
    } else {
        run_rows(0, a.rows());
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    }
    return out;
}

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("pairwise_sq_dist: embedding dimensions differ (" +
                         std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + ")");
    }
    const std::size_t d = a.rows();
    const std::size_t m = a.cols();
    const std::size_t n = b.cols();
    Matrix out(m, n);
    auto run = [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = a(k, i) - b(k, j);
                    s += diff * diff;
                }
                out(i, j) = s;
            }
        }
    };
    if (m * n * d >= (1u << 18)) {
        parallel_for(m, run);
    } else {
        run(0, m);
    }
    return out;
}

double logsumexp(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("logsumexp: empty input");
    const double mx = *std::max_element(x.begin(), x.end());
    if (std::isinf(mx) && mx < 0) return mx;  // all -inf
    double s = 0.0;
    for (double xi : x) s += std::exp(xi - mx);
    return mx + std::log(s);
}

std::vector<double> softmax_stable(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax_stable: empty input");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        s += out[i];
    }
    for (double& o : out) o /= s;
    return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("l1_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace traco
