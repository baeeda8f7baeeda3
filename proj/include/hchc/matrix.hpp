#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hchc {

/// Row-major dense matrix of doubles.
///
/// The single carrier type for data, activations, gradients, adjacency and
/// similarity matrices. Storage is contiguous and `values().size()` is
/// always `rows() * cols()`.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols_, cols_};
    }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    bool all_finite() const noexcept;
    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// Rows selected by index, in the given order.
    DenseMatrix gather_rows(std::span<const std::size_t> indices) const;
    DenseMatrix transposed() const;

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double scale) noexcept;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator*(DenseMatrix lhs, double scale);

// Products. All throw InputError on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T

/// Squared Euclidean distances between all rows of `points` (n x n).
DenseMatrix pairwise_squared_distances(const DenseMatrix& points);

double frobenius_squared(const DenseMatrix& m) noexcept;

}  // namespace hchc
