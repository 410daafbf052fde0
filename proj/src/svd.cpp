// One-sided (Hestenes) Jacobi SVD.
//
// Orthogonalizes the columns of a working copy of A by plane rotations, accumulating the
// same rotations into V. On convergence the column norms are the singular values and the
// normalized columns are the left singular vectors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dcm/numerics.hpp"

namespace dcm {
namespace {

Svd jacobi_tall(const Matrix& a, int max_sweeps) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    // Column-major working copies make the rotations contiguous.
    std::vector<std::vector<double>> u(n, std::vector<double>(m));
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) u[j][i] = a(i, j);
        v[j][j] = 1.0;
    }

    const double eps = std::numeric_limits<double>::epsilon();
    bool converged = n < 2;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += u[p][i] * u[p][i];
                    beta += u[q][i] * u[q][i];
                    gamma += u[p][i] * u[q][i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double up = u[p][i];
                    const double uq = u[q][i];
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v[p][i];
                    const double vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw NumericalError("Jacobi SVD did not converge within " + std::to_string(max_sweeps) +
                             " sweeps");
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = l2_norm(u[j]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double smax = n > 0 ? sigma[order[0]] : 0.0;
    const double tiny = smax * static_cast<double>(std::max(m, n)) * eps;

    Svd out{Matrix(m, n), Vector(n), Matrix(n, n)};
    std::vector<bool> filled(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.s[k] = sigma[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j][i];
        if (sigma[j] > tiny && sigma[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, k) = u[j][i] / sigma[j];
            filled[k] = true;
        }
    }

    // Rank-deficient input: complete U with unit vectors orthogonal to the filled columns.
    std::size_t basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (filled[k]) continue;
        out.s[k] = 0.0;
        while (basis < m) {
            std::vector<double> cand(m, 0.0);
            cand[basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (!filled[c]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) proj += out.u(i, c) * cand[i];
                    for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * out.u(i, c);
                }
            }
            const double norm = l2_norm(cand);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < m; ++i) out.u(i, k) = cand[i] / norm;
                filled[k] = true;
                break;
            }
        }
    }
    return out;
}

} // namespace

Svd svd(const Matrix& a, int max_sweeps) {
    if (a.rows() > 1024 || a.cols() > 1024) {
        throw UsageError("svd supports matrices up to 1024x1024");
    }
    if (!all_finite(a.span())) throw NumericalError("svd input contains non-finite entries");
    if (a.rows() >= a.cols()) return jacobi_tall(a, max_sweeps);
    Svd t = jacobi_tall(transpose(a), max_sweeps);
    return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

} // namespace dcm
