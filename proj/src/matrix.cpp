#include "hchc/matrix.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "hchc/errors.hpp"

namespace hchc {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const DenseMatrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

MutMap view(DenseMatrix& m) {
    return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

std::string shape(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw InputError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw InputError("DenseMatrix: " + std::to_string(values_.size()) + " values for shape " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw InputError("DenseMatrix: ragged initializer");
        values_.insert(values_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool DenseMatrix::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

DenseMatrix DenseMatrix::gather_rows(std::span<const std::size_t> indices) const {
    DenseMatrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw InputError("gather_rows: index out of range");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) noexcept {
    for (double& v : values_) v *= scale;
    return *this;
}

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs += rhs; }
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs -= rhs; }
DenseMatrix operator*(DenseMatrix lhs, double scale) { return lhs *= scale; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw InputError("matmul: " + shape(a) + " * " + shape(b));
    DenseMatrix out(a.rows(), b.cols());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b);
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw InputError("matmul_tn: " + shape(a) + "^T * " + shape(b));
    DenseMatrix out(a.cols(), b.cols());
    if (a.rows() == 0) return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw InputError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
    DenseMatrix out(a.rows(), b.rows());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

DenseMatrix pairwise_squared_distances(const DenseMatrix& points) {
    const std::size_t n = points.rows();
    DenseMatrix out(n, n);
    // Direct differences rather than the |a|^2 + |b|^2 - 2ab expansion, so
    // identical points give exactly zero.
    for (std::size_t i = 0; i < n; ++i) {
        auto pi = points.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            auto pj = points.row(j);
            double d = 0.0;
            for (std::size_t k = 0; k < pi.size(); ++k) {
                const double diff = pi[k] - pj[k];
                d += diff * diff;
            }
            out(i, j) = d;
            out(j, i) = d;
        }
    }
    return out;
}

double frobenius_squared(const DenseMatrix& m) noexcept {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
}

}  // namespace hchc
