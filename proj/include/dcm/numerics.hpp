#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "dcm/error.hpp"

namespace dcm {

/// Guard below which a vector norm is treated as zero.
inline constexpr double kNormEpsilon = 1e-12;

/// Dense vector of doubles.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    Vector(std::initializer_list<double> values) : data_(values) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    const std::vector<double>& values() const { return data_; }

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<double> data_;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    const std::vector<double>& values() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
/// a · x
Vector matvec(const Matrix& a, std::span<const double> x);
/// aᵀ · x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
/// Row vector times matrix: xᵀ · a.
Vector vecmat(std::span<const double> x, const Matrix& a);

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);
double frobenius_norm(const Matrix& a);
Matrix subtract(const Matrix& a, const Matrix& b);

/// Scales v to unit L2 norm. Throws NearZeroNormError when ‖v‖ ≤ kNormEpsilon.
Vector l2_normalize(std::span<const double> v);

/// Cosine similarity. Throws NearZeroNormError when either norm is ≤ kNormEpsilon.
double cosine(std::span<const double> u, std::span<const double> v);

bool all_finite(std::span<const double> v);

struct Svd {
    Matrix u;  ///< m×k, orthonormal columns
    Vector s;  ///< k singular values, descending
    Matrix v;  ///< n×k, orthonormal columns
};

/// Thin SVD a = U·diag(S)·Vᵀ with k = min(m, n), computed by one-sided Jacobi.
/// Throws NumericalError if rotations have not converged after `max_sweeps`.
Svd svd(const Matrix& a, int max_sweeps = 100);

/// Deterministic counter-based generator (SplitMix64 finalizer over a keyed counter).
///
/// Independent streams are derived with split(); a stream never depends on how many
/// values other streams have drawn.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    std::uint64_t seed_key() const { return key_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform01();
    /// Uniform in [lo, hi). Throws UsageError unless lo < hi.
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n);
    /// Standard normal draw (Box-Muller, both halves used).
    double normal();

    /// Child stream keyed by (this stream's key, stream id). Does not advance this stream.
    Rng split(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    struct Keyed {};
    Rng(std::uint64_t key, Keyed) : key_(key) {}
    static std::uint64_t mix(std::uint64_t z);

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

} // namespace dcm
