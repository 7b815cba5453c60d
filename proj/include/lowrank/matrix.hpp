#pragma once

// Dense row-major real matrix and the handful of kernels the low-rank
// optimizer needs. Everything is double precision and value-semantic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lowrank {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Matrix {
public:
    using value_type = double;
    using size_type = std::size_t;

    Matrix() = default;

    Matrix(size_type rows, size_type cols, double fill = 0.0)
        : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}

    // Row-major nested initializer: Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_)
                throw DimensionError("Matrix: ragged initializer list");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    Matrix(size_type rows, size_type cols, std::vector<double> data)
        : rows_{rows}, cols_{cols}, data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                                 " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    [[nodiscard]] size_type rows() const noexcept { return rows_; }
    [[nodiscard]] size_type cols() const noexcept { return cols_; }
    [[nodiscard]] size_type size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(size_type i, size_type j) noexcept { return data_[i * cols_ + j]; }
    const double& operator()(size_type i, size_type j) const noexcept {
        return data_[i * cols_ + j];
    }

    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    [[nodiscard]] std::span<double> row(size_type i) noexcept {
        return std::span<double>(data_).subspan(i * cols_, cols_);
    }
    [[nodiscard]] std::span<const double> row(size_type i) const noexcept {
        return std::span<const double>(data_).subspan(i * cols_, cols_);
    }

    [[nodiscard]] bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    size_type rows_ = 0;
    size_type cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                             shape_string(b));
}

template <typename F>
Matrix zip_with(const Matrix& a, const Matrix& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Matrix out(a.rows(), a.cols());
    auto x = a.values();
    auto y = b.values();
    auto z = out.values();
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = f(x[k], y[k]);
    return out;
}

template <typename F>
Matrix map(const Matrix& a, F f) {
    Matrix out(a.rows(), a.cols());
    auto x = a.values();
    auto z = out.values();
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = f(x[k]);
    return out;
}

}  // namespace detail

inline Matrix identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

inline void fill_zero(Matrix& m) noexcept { std::ranges::fill(m.values(), 0.0); }

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

// a·b, i-k-j loop order so the inner loop streams rows of b and out.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + shape_string(a) + " * " + shape_string(b));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

// aᵀ·b without materializing aᵀ.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_at_b: " + shape_string(a) + "^T * " + shape_string(b));
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto a_row = a.row(k);
        auto b_row = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a_row[i];
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
        }
    }
    return out;
}

// a·bᵀ without materializing bᵀ; used for the U·Vᵀ style outer products.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_a_bt: " + shape_string(a) + " * " + shape_string(b) + "^T");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto a_row = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto b_row = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
            out(i, j) = acc;
        }
    }
    return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    return detail::zip_with(a, b, "add", [](double x, double y) { return x + y; });
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    return detail::zip_with(a, b, "sub", [](double x, double y) { return x - y; });
}

inline Matrix scale(const Matrix& a, double s) {
    return detail::map(a, [s](double x) { return s * x; });
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    return detail::zip_with(a, b, "hadamard", [](double x, double y) { return x * y; });
}

inline Matrix elementwise_divide(const Matrix& a, const Matrix& b) {
    return detail::zip_with(a, b, "elementwise_divide", [](double x, double y) { return x / y; });
}

// Negative inputs are a caller bug; sqrt would return NaN.
inline Matrix elementwise_sqrt(const Matrix& a) {
    return detail::map(a, [](double x) {
        if (x < 0.0) throw std::domain_error("elementwise_sqrt: negative entry");
        return std::sqrt(x);
    });
}

inline void add_in_place(Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "add_in_place");
    auto x = a.values();
    auto y = b.values();
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += y[k];
}

inline double trace(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("trace: non-square " + shape_string(a));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) acc += a(i, i);
    return acc;
}

inline double squared_frobenius_norm(const Matrix& a) noexcept {
    double acc = 0.0;
    for (double x : a.values()) acc += x * x;
    return acc;
}

inline double frobenius_norm(const Matrix& a) noexcept {
    return std::sqrt(squared_frobenius_norm(a));
}

inline bool all_finite(const Matrix& a) noexcept {
    return std::ranges::all_of(a.values(), [](double x) { return std::isfinite(x); });
}

// ‖a − b‖_F / max(‖a‖_F, floor). Used by tests and the self-check suite.
inline double relative_difference(const Matrix& a, const Matrix& b, double floor = 1e-300) {
    return frobenius_norm(sub(a, b)) / std::max(frobenius_norm(a), floor);
}

}  // namespace lowrank
