#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace peformer {

using cxd = std::complex<double>;

/// Complex matrix stored as two equal-shape real matrices.
struct ComplexMatrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> re;
    std::vector<double> im;

    ComplexMatrix() = default;
    ComplexMatrix(std::int64_t r, std::int64_t c)
        : rows(r), cols(c), re(static_cast<std::size_t>(r * c), 0.0), im(static_cast<std::size_t>(r * c), 0.0) {}

    bool empty() const { return rows == 0 || cols == 0; }

    cxd at(std::int64_t r, std::int64_t c) const {
        const auto i = static_cast<std::size_t>(r * cols + c);
        return {re[i], im[i]};
    }
    void set(std::int64_t r, std::int64_t c, cxd v) {
        const auto i = static_cast<std::size_t>(r * cols + c);
        re[i] = v.real();
        im[i] = v.imag();
    }
    void add(std::int64_t r, std::int64_t c, cxd v) {
        const auto i = static_cast<std::size_t>(r * cols + c);
        re[i] += v.real();
        im[i] += v.imag();
    }

    ComplexMatrix block(std::int64_t r0, std::int64_t c0, std::int64_t nr, std::int64_t nc) const {
        if (r0 < 0 || c0 < 0 || r0 + nr > rows || c0 + nc > cols)
            throw std::invalid_argument("ComplexMatrix::block: window outside matrix");
        ComplexMatrix b(nr, nc);
        for (std::int64_t r = 0; r < nr; ++r)
            for (std::int64_t c = 0; c < nc; ++c) b.set(r, c, at(r0 + r, c0 + c));
        return b;
    }

    void set_block(std::int64_t r0, std::int64_t c0, const ComplexMatrix& b) {
        for (std::int64_t r = 0; r < b.rows; ++r)
            for (std::int64_t c = 0; c < b.cols; ++c) set(r0 + r, c0 + c, b.at(r, c));
    }

    ComplexMatrix column(std::int64_t c) const { return block(0, c, rows, 1); }
};

inline ComplexMatrix cx_identity(std::int64_t n) {
    ComplexMatrix m(n, n);
    for (std::int64_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
}

inline ComplexMatrix cx_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("cx_matmul: dimension mismatch");
    ComplexMatrix out(a.rows, b.cols);
    for (std::int64_t i = 0; i < a.rows; ++i)
        for (std::int64_t k = 0; k < a.cols; ++k) {
            const cxd v = a.at(i, k);
            if (v == cxd{}) continue;
            for (std::int64_t j = 0; j < b.cols; ++j) out.add(i, j, v * b.at(k, j));
        }
    return out;
}

inline ComplexMatrix cx_herm(const ComplexMatrix& a) {
    ComplexMatrix out(a.cols, a.rows);
    for (std::int64_t r = 0; r < a.rows; ++r)
        for (std::int64_t c = 0; c < a.cols; ++c) out.set(c, r, std::conj(a.at(r, c)));
    return out;
}

inline ComplexMatrix cx_scale(const ComplexMatrix& a, cxd s) {
    ComplexMatrix out = a;
    for (std::size_t i = 0; i < out.re.size(); ++i) {
        const cxd v = cxd{a.re[i], a.im[i]} * s;
        out.re[i] = v.real();
        out.im[i] = v.imag();
    }
    return out;
}

inline ComplexMatrix cx_add(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("cx_add: shape mismatch");
    ComplexMatrix out = a;
    for (std::size_t i = 0; i < out.re.size(); ++i) {
        out.re[i] += b.re[i];
        out.im[i] += b.im[i];
    }
    return out;
}

inline double cx_fro_norm_sq(const ComplexMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.re.size(); ++i) s += a.re[i] * a.re[i] + a.im[i] * a.im[i];
    return s;
}

inline double cx_herm_defect(const ComplexMatrix& a) {
    if (a.rows != a.cols) return 1e300;
    double worst = 0.0;
    for (std::int64_t r = 0; r < a.rows; ++r)
        for (std::int64_t c = 0; c < a.cols; ++c) worst = std::max(worst, std::abs(a.at(r, c) - std::conj(a.at(c, r))));
    return worst;
}

/// X with A*X = B, via partially pivoted Gaussian elimination on the real
/// embedding [[Re,-Im],[Im,Re]]. The condition estimate is the ratio of the
/// largest to the smallest pivot magnitude; systems estimated worse than
/// 1e12 are rejected.
inline ComplexMatrix complex_solve(const ComplexMatrix& a, const ComplexMatrix& b,
                                   double cond_limit = 1e12) {
    if (a.rows != a.cols) throw std::invalid_argument("complex_solve: A must be square");
    if (a.rows != b.rows) throw std::invalid_argument("complex_solve: A and B row counts differ");
    const std::int64_t n = a.rows, m = b.cols, n2 = 2 * n, m2 = 2 * m;

    // Real embedding of A and B; columns of B embed as [Re; Im] pairs.
    std::vector<double> e(static_cast<std::size_t>(n2 * n2));
    std::vector<double> rhs(static_cast<std::size_t>(n2 * m2));
    auto eat = [&](std::int64_t r, std::int64_t c) -> double& { return e[static_cast<std::size_t>(r * n2 + c)]; };
    auto rat = [&](std::int64_t r, std::int64_t c) -> double& { return rhs[static_cast<std::size_t>(r * m2 + c)]; };
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < n; ++c) {
            const cxd v = a.at(r, c);
            eat(r, c) = v.real();
            eat(r, n + c) = -v.imag();
            eat(n + r, c) = v.imag();
            eat(n + r, n + c) = v.real();
        }
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < m; ++c) {
            const cxd v = b.at(r, c);
            rat(r, c) = v.real();
            rat(n + r, c) = v.imag();
            rat(r, m + c) = -v.imag();
            rat(n + r, m + c) = v.real();
        }

    double max_pivot = 0.0, min_pivot = 1e300;
    for (std::int64_t col = 0; col < n2; ++col) {
        std::int64_t piv = col;
        for (std::int64_t r = col + 1; r < n2; ++r)
            if (std::abs(eat(r, col)) > std::abs(eat(piv, col))) piv = r;
        if (piv != col) {
            for (std::int64_t c = 0; c < n2; ++c) std::swap(eat(col, c), eat(piv, c));
            for (std::int64_t c = 0; c < m2; ++c) std::swap(rat(col, c), rat(piv, c));
        }
        const double p = eat(col, col);
        max_pivot = std::max(max_pivot, std::abs(p));
        min_pivot = std::min(min_pivot, std::abs(p));
        if (std::abs(p) == 0.0 || max_pivot / min_pivot > cond_limit)
            throw std::invalid_argument("complex_solve: matrix singular or ill-conditioned, condition estimate " +
                                        std::to_string(std::abs(p) == 0.0 ? 1e300 : max_pivot / min_pivot));
        for (std::int64_t r = col + 1; r < n2; ++r) {
            const double f = eat(r, col) / p;
            if (f == 0.0) continue;
            for (std::int64_t c = col; c < n2; ++c) eat(r, c) -= f * eat(col, c);
            for (std::int64_t c = 0; c < m2; ++c) rat(r, c) -= f * rat(col, c);
        }
    }
    // Back substitution.
    for (std::int64_t col = n2 - 1; col >= 0; --col) {
        for (std::int64_t c = 0; c < m2; ++c) {
            double acc = rat(col, c);
            for (std::int64_t k = col + 1; k < n2; ++k) acc -= eat(col, k) * rat(k, c);
            rat(col, c) = acc / eat(col, col);
        }
    }
    ComplexMatrix x(n, m);
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < m; ++c) x.set(r, c, {rat(r, c), rat(n + r, c)});
    return x;
}

/// log det of a Hermitian positive definite matrix via complex Cholesky.
inline double logdet_hermitian_pd(const ComplexMatrix& a, double herm_tol = 1e-9) {
    if (a.rows != a.cols) throw std::invalid_argument("logdet_hermitian_pd: matrix not square");
    if (cx_herm_defect(a) > herm_tol)
        throw std::invalid_argument("logdet_hermitian_pd: matrix is not Hermitian within tolerance");
    const std::int64_t n = a.rows;
    std::vector<cxd> l(static_cast<std::size_t>(n * n), cxd{});
    auto lat = [&](std::int64_t r, std::int64_t c) -> cxd& { return l[static_cast<std::size_t>(r * n + c)]; };
    double logdet = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        cxd s = a.at(j, j);
        for (std::int64_t k = 0; k < j; ++k) s -= lat(j, k) * std::conj(lat(j, k));
        const double d = s.real();
        if (d <= 0.0) throw std::invalid_argument("logdet_hermitian_pd: matrix is not positive definite");
        const double ljj = std::sqrt(d);
        lat(j, j) = ljj;
        logdet += 2.0 * std::log(ljj);
        for (std::int64_t i = j + 1; i < n; ++i) {
            cxd v = a.at(i, j);
            for (std::int64_t k = 0; k < j; ++k) v -= lat(i, k) * std::conj(lat(j, k));
            lat(i, j) = v / ljj;
        }
    }
    return logdet;
}

/// log det of a real symmetric positive definite matrix (plain doubles).
inline double logdet_real_spd(const std::vector<double>& a, std::int64_t n) {
    std::vector<double> l(static_cast<std::size_t>(n * n), 0.0);
    auto lat = [&](std::int64_t r, std::int64_t c) -> double& { return l[static_cast<std::size_t>(r * n + c)]; };
    auto aat = [&](std::int64_t r, std::int64_t c) { return a[static_cast<std::size_t>(r * n + c)]; };
    double logdet = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        double s = aat(j, j);
        for (std::int64_t k = 0; k < j; ++k) s -= lat(j, k) * lat(j, k);
        if (s <= 0.0) throw std::invalid_argument("logdet_real_spd: matrix is not positive definite");
        const double ljj = std::sqrt(s);
        lat(j, j) = ljj;
        logdet += 2.0 * std::log(ljj);
        for (std::int64_t i = j + 1; i < n; ++i) {
            double v = aat(i, j);
            for (std::int64_t k = 0; k < j; ++k) v -= lat(i, k) * lat(j, k);
            lat(i, j) = v / ljj;
        }
    }
    return logdet;
}

/// Solve A X = B for Hermitian positive definite A via complex Cholesky.
inline ComplexMatrix hermitian_solve(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows != a.cols || a.rows != b.rows) throw std::invalid_argument("hermitian_solve: shape mismatch");
    const std::int64_t n = a.rows, m = b.cols;
    std::vector<cxd> l(static_cast<std::size_t>(n * n), cxd{});
    auto lat = [&](std::int64_t r, std::int64_t c) -> cxd& { return l[static_cast<std::size_t>(r * n + c)]; };
    for (std::int64_t j = 0; j < n; ++j) {
        cxd s = a.at(j, j);
        for (std::int64_t k = 0; k < j; ++k) s -= lat(j, k) * std::conj(lat(j, k));
        if (s.real() <= 0.0) throw std::invalid_argument("hermitian_solve: matrix is not positive definite");
        const double ljj = std::sqrt(s.real());
        lat(j, j) = ljj;
        for (std::int64_t i = j + 1; i < n; ++i) {
            cxd v = a.at(i, j);
            for (std::int64_t k = 0; k < j; ++k) v -= lat(i, k) * std::conj(lat(j, k));
            lat(i, j) = v / ljj;
        }
    }
    // Forward then backward substitution per column.
    ComplexMatrix x(n, m);
    for (std::int64_t c = 0; c < m; ++c) {
        std::vector<cxd> y(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            cxd v = b.at(i, c);
            for (std::int64_t k = 0; k < i; ++k) v -= lat(i, k) * y[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = v / lat(i, i);
        }
        for (std::int64_t i = n - 1; i >= 0; --i) {
            cxd v = y[static_cast<std::size_t>(i)];
            for (std::int64_t k = i + 1; k < n; ++k) v -= std::conj(lat(k, i)) * x.at(k, c);
            x.set(i, c, v / lat(i, i));
        }
    }
    return x;
}

/// Unit-norm zero-forcing directions W = H (H^H H)^{-1}, columns normalized.
inline ComplexMatrix zf_directions(const ComplexMatrix& h) {
    if (h.cols > h.rows)
        throw std::invalid_argument("zf_directions: needs at least as many rows (antennas) as columns (users)");
    const ComplexMatrix gram = cx_matmul(cx_herm(h), h);
    const ComplexMatrix inv = complex_solve(gram, cx_identity(h.cols));
    ComplexMatrix w = cx_matmul(h, inv);
    for (std::int64_t c = 0; c < w.cols; ++c) {
        double nrm = 0.0;
        for (std::int64_t r = 0; r < w.rows; ++r) nrm += std::norm(w.at(r, c));
        nrm = std::sqrt(nrm);
        for (std::int64_t r = 0; r < w.rows; ++r) w.set(r, c, w.at(r, c) / nrm);
    }
    return w;
}

}  // namespace peformer
