#pragma once

// Rank-r truncated SVD by one-sided (Hestenes) Jacobi.
//
// The tall orientation A (p×q, p ≥ q) is first reduced by Householder QR with
// column pivoting, A·P = Q·R. Jacobi then orthogonalizes the rows of the small
// triangular R, which converges in far fewer sweeps than working on A itself.
// At convergence each row is σ times a right singular vector of A (up to P);
// the matching left vector is A·v/σ. Rows are contiguous so dot products and
// rotations stream memory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowrank/matrix.hpp"

namespace lowrank {

struct SvdResult {
    Matrix left;                  // M×r, orthonormal columns
    std::vector<double> singular; // r values, non-increasing
    Matrix right;                 // N×r, orthonormal columns
};

class SvdConvergenceError : public std::runtime_error {
public:
    explicit SvdConvergenceError(std::size_t sweeps)
        : std::runtime_error("truncated_svd: no convergence after " + std::to_string(sweeps) +
                             " Jacobi sweeps"),
          sweeps_{sweeps} {}
    [[nodiscard]] std::size_t sweeps() const noexcept { return sweeps_; }

private:
    std::size_t sweeps_;
};

namespace detail {

// Four partial sums let the compiler vectorize without reassociation flags.
inline double dot(std::span<const double> x, std::span<const double> y) noexcept {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    const std::size_t n = x.size();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        a0 += x[k] * y[k];
        a1 += x[k + 1] * y[k + 1];
        a2 += x[k + 2] * y[k + 2];
        a3 += x[k + 3] * y[k + 3];
    }
    for (; k < n; ++k) a0 += x[k] * y[k];
    return (a0 + a1) + (a2 + a3);
}

inline void orthonormalize_rows(std::vector<std::vector<double>>& rows) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& v = rows[k];
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < k; ++j) {
                const double proj = dot(rows[j], v);
                for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * rows[j][i];
            }
        const double norm = std::sqrt(dot(v, v));
        for (double& x : v) x /= norm;
    }
}

inline void rotate(std::span<double> x, std::span<double> y, double c, double s) noexcept {
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xi = x[k];
        const double yi = y[k];
        x[k] = c * xi - s * yi;
        y[k] = s * xi + c * yi;
    }
}

// Extends `basis` (rows are orthonormal vectors) with unit-vector Gram–Schmidt
// until it has `target` rows.
inline void complete_orthonormal_rows(std::vector<std::vector<double>>& basis,
                                      std::size_t length, std::size_t target) {
    for (std::size_t k = 0; k < length && basis.size() < target; ++k) {
        std::vector<double> v(length, 0.0);
        v[k] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                const double proj = dot(b, v);
                for (std::size_t i = 0; i < length; ++i) v[i] -= proj * b[i];
            }
        }
        const double norm = std::sqrt(dot(v, v));
        if (norm < 1e-6) continue;
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
}

// Householder QR with column pivoting on A, given as its columns (rows of
// `cols`, each of length p ≥ q). Returns R (q×q, upper triangular) and fills
// `perm` so that column k of A·P is column perm[k] of A.
inline Matrix pivoted_qr_r(Matrix cols, std::vector<std::size_t>& perm) {
    const std::size_t q = cols.rows();
    const std::size_t p = cols.cols();
    perm.resize(q);
    std::iota(perm.begin(), perm.end(), 0);
    Matrix r(q, q);
    std::vector<double> h(p);
    for (std::size_t k = 0; k < q; ++k) {
        // pivot: the remaining column with the largest trailing norm
        std::size_t best = k;
        double best_norm = -1.0;
        for (std::size_t j = k; j < q; ++j) {
            const auto tail = cols.row(j).subspan(k);
            const double nrm = dot(tail, tail);
            if (nrm > best_norm) best_norm = nrm, best = j;
        }
        if (best != k) {
            std::swap_ranges(cols.row(k).begin(), cols.row(k).end(), cols.row(best).begin());
            std::swap(perm[k], perm[best]);
            for (std::size_t i = 0; i < k; ++i) std::swap(r(i, k), r(i, best));
        }

        auto x = cols.row(k).subspan(k);
        const double alpha = std::sqrt(dot(x, x));
        if (alpha == 0.0) continue;  // remaining columns are all zero
        const double beta = x[0] >= 0.0 ? -alpha : alpha;
        // h = x − β·e₁, reflector I − 2hhᵀ/‖h‖²
        std::copy(x.begin(), x.end(), h.begin());
        h[0] -= beta;
        const std::span<const double> hv(h.data(), x.size());
        const double hh = dot(hv, hv);
        r(k, k) = beta;
        for (std::size_t j = k + 1; j < q; ++j) {
            auto y = cols.row(j).subspan(k);
            const double f = 2.0 * dot(hv, y) / hh;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] -= f * hv[i];
            r(k, j) = y[0];
        }
    }
    return r;
}

// One-sided Jacobi on the q columns (given as rows of `cols`, each of length p).
// On return `cols` holds A·V column-wise for the implied orthogonal V.
inline void hestenes_jacobi(Matrix& cols, std::size_t max_sweeps) {
    const std::size_t q = cols.rows();
    const std::size_t p = cols.cols();
    const double tol =
        std::max(1e-15, static_cast<double>(p) * std::numeric_limits<double>::epsilon());
    std::vector<double> norms(q);

    for (std::size_t sweep = 0;; ++sweep) {
        if (sweep == max_sweeps) throw SvdConvergenceError(sweep);
        for (std::size_t i = 0; i < q; ++i) norms[i] = dot(cols.row(i), cols.row(i));

        bool rotated = false;
        for (std::size_t i = 0; i + 1 < q; ++i) {
            for (std::size_t j = i + 1; j < q; ++j) {
                const double alpha = norms[i];
                const double beta = norms[j];
                if (alpha == 0.0 || beta == 0.0) continue;
                const double gamma = dot(cols.row(i), cols.row(j));
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(cols.row(i), cols.row(j), c, s);
                norms[i] = alpha - t * gamma;
                norms[j] = beta + t * gamma;
            }
        }
        if (!rotated) return;
    }
}

}  // namespace detail

// Best rank-r approximation factors of g. Requires 1 ≤ r ≤ min(rows, cols).
// Sweeps are capped at 10·min(rows, cols); exceeding the cap throws
// SvdConvergenceError. Equal singular values keep their column order.
inline SvdResult truncated_svd(const Matrix& g, std::size_t r) {
    const std::size_t m = g.rows();
    const std::size_t n = g.cols();
    if (r < 1 || r > std::min(m, n))
        throw std::invalid_argument("truncated_svd: rank " + std::to_string(r) +
                                    " outside [1, " + std::to_string(std::min(m, n)) + "]");
    if (!all_finite(g)) throw std::invalid_argument("truncated_svd: non-finite input");

    // Work on the tall orientation: A is p×q with p ≥ q.
    const bool tall = m >= n;
    const std::size_t q = tall ? n : m;
    const std::size_t p = tall ? m : n;
    auto a_times = [&](std::span<const double> v) {  // A·v, length p
        std::vector<double> out(p, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (tall) out[i] += g(i, j) * v[j];
                else out[j] += g(i, j) * v[i];
            }
        return out;
    };

    std::vector<std::size_t> perm;
    Matrix rows = detail::pivoted_qr_r(tall ? transpose(g) : g, perm);
    detail::hestenes_jacobi(rows, std::max<std::size_t>(10 * q, 10));

    std::vector<double> sigma(q);
    for (std::size_t i = 0; i < q; ++i) sigma[i] = std::sqrt(detail::dot(rows.row(i), rows.row(i)));
    std::vector<std::size_t> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    const double sigma_max = sigma[order[0]];
    const double negligible = sigma_max * static_cast<double>(p) * std::numeric_limits<double>::epsilon();

    // Right vectors of A (length q) from the Jacobi rows, left vectors (length
    // p) as A·v/σ; numerically-zero directions get an orthonormal completion.
    std::vector<std::vector<double>> right_dirs;
    std::vector<std::vector<double>> left_dirs;
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t i = order[k];
        if (sigma[i] <= negligible || sigma[i] == 0.0) break;
        std::vector<double> v(q);
        for (std::size_t j = 0; j < q; ++j) v[perm[j]] = rows(i, j) / sigma[i];
        std::vector<double> u = a_times(v);
        for (double& x : u) x /= sigma[i];
        right_dirs.push_back(std::move(v));
        left_dirs.push_back(std::move(u));
    }
    const std::size_t usable = right_dirs.size();
    detail::orthonormalize_rows(left_dirs);
    detail::complete_orthonormal_rows(left_dirs, p, r);
    detail::complete_orthonormal_rows(right_dirs, q, r);

    Matrix col_side(p, r);
    Matrix row_side(q, r);
    SvdResult out;
    out.singular.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        out.singular[k] = k < usable ? sigma[order[k]] : 0.0;
        for (std::size_t i = 0; i < p; ++i) col_side(i, k) = left_dirs[k][i];
        for (std::size_t i = 0; i < q; ++i) row_side(i, k) = right_dirs[k][i];
    }
    if (tall) {
        out.left = std::move(col_side);
        out.right = std::move(row_side);
    } else {
        out.left = std::move(row_side);
        out.right = std::move(col_side);
    }
    return out;
}

}  // namespace lowrank
