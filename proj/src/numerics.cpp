#include "dcm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dcm {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DataError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DataError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DataError("matmul dimension mismatch: " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " times " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DataError("matvec dimension mismatch: matrix has " + std::to_string(a.cols()) +
                        " columns, vector has " + std::to_string(x.size()) + " entries");
    }
    Vector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) {
        throw DataError("matvec_transposed dimension mismatch");
    }
    Vector out(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += xi * r[j];
    }
    return out;
}

Vector vecmat(std::span<const double> x, const Matrix& a) { return matvec_transposed(a, x); }

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DataError("dot product dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    // Scaled accumulation keeps tiny and huge entries from under/overflowing.
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return 0.0;
    double acc = 0.0;
    for (double x : v) {
        const double y = x / scale;
        acc += y * y;
    }
    return scale * std::sqrt(acc);
}

double frobenius_norm(const Matrix& a) { return l2_norm(a.span()); }

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("subtract shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Vector l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > kNormEpsilon)) {
        throw NearZeroNormError("cannot normalize vector with norm " + std::to_string(n));
    }
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (!(nu > kNormEpsilon) || !(nv > kNormEpsilon)) {
        throw NearZeroNormError("cosine of a near-zero vector");
    }
    // Normalizing each side first makes the result symmetric in (u, v) bit for bit.
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += (u[i] / nu) * (v[i] / nv);
    return std::clamp(acc, -1.0, 1.0);
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::uint64_t Rng::mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi)) {
        throw UsageError("uniform range requires lo < hi, got [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + ")");
    }
    const double x = lo + (hi - lo) * uniform01();
    return x < hi ? x : lo;
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw UsageError("Rng::index requires n > 0");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix(key_ ^ mix(stream + 0xd1b54a32d192ed03ULL)), Keyed{});
}

} // namespace dcm
