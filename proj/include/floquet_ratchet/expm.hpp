#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "core.hpp"

namespace ratchet {

// Dense exponential: scaling and squaring with Pade approximants.
inline CMatrix expm(const CMatrix& A)
{
    if (A.rows() != A.cols()) throw SizeMismatch("expm needs a square matrix");
    CMatrix E = A.exp();
    if (!E.allFinite()) throw NonFinite("matrix exponential overflowed");
    return E;
}

/* Operator with nonzero diagonals at offsets -Bw..Bw, each stored in a
   length-N vector. For d > 0 entry i holds A(i, i + d), for d < 0 entry j
   holds A(j - d, j). Trailing entries are unused. */
template <int Bw>
struct BandedOperator {
    static constexpr int bandwidth = Bw;
    Eigen::Index n = 0;
    std::array<CVector, 2 * Bw + 1> diag;

    explicit BandedOperator(Eigen::Index size = 0) : n(size)
    {
        for (auto& d : diag) d = CVector::Zero(size);
    }

    CVector& offset(int d) { return diag[Bw + d]; }
    const CVector& offset(int d) const { return diag[Bw + d]; }

    template <class In, class Out>
    void apply(const In& X, Out& Y) const
    {
        Y.noalias() = offset(0).asDiagonal() * X;
        for (int d = 1; d <= Bw; ++d) {
            const Eigen::Index len = n - d;
            if (len <= 0) continue;
            Y.topRows(len).noalias() += offset(d).head(len).asDiagonal() * X.bottomRows(len);
            Y.bottomRows(len).noalias() += offset(-d).head(len).asDiagonal() * X.topRows(len);
        }
    }

    CMatrix dense() const
    {
        CMatrix A = CMatrix::Zero(n, n);
        A.diagonal() = offset(0);
        for (int d = 1; d <= Bw; ++d) {
            if (n - d <= 0) continue;
            A.diagonal(d) = offset(d).head(n - d);
            A.diagonal(-d) = offset(-d).head(n - d);
        }
        return A;
    }

    // max column sum, an upper bound for the induced 1-norm
    double norm1() const
    {
        RVector col = RVector::Zero(n);
        col += offset(0).cwiseAbs();
        for (int d = 1; d <= Bw; ++d) {
            const Eigen::Index len = n - d;
            if (len <= 0) continue;
            col.tail(len) += offset(d).head(len).cwiseAbs();
            col.head(len) += offset(-d).head(len).cwiseAbs();
        }
        return col.size() ? col.maxCoeff() : 0.0;
    }
};

namespace detail {

/* out = f * A * in and X += out in a single sweep over each column;
   returns max(|Re|, |Im|) over out. All three are column-major with
   contiguous columns of length A.n. */
template <int Bw>
double fused_taylor_term(const BandedOperator<Bw>& A, const cplx* in, cplx* out, cplx* X, Eigen::Index cols,
                         double f)
{
    const Eigen::Index n = A.n;
    const double* dr[2 * Bw + 1];
    for (int d = -Bw; d <= Bw; ++d) dr[Bw + d] = reinterpret_cast<const double*>(A.offset(d).data());
    double mx = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double* t = reinterpret_cast<const double*>(in + j * n);
        double* o = reinterpret_cast<double*>(out + j * n);
        double* x = reinterpret_cast<double*>(X + j * n);
        auto row = [&](Eigen::Index i, bool edge) {
            double vr = dr[Bw][2 * i] * t[2 * i] - dr[Bw][2 * i + 1] * t[2 * i + 1];
            double vi = dr[Bw][2 * i] * t[2 * i + 1] + dr[Bw][2 * i + 1] * t[2 * i];
            for (int d = 1; d <= Bw; ++d) {
                if (!edge || i + d < n) {
                    const double* a = dr[Bw + d] + 2 * i;
                    const double* b = t + 2 * (i + d);
                    vr += a[0] * b[0] - a[1] * b[1];
                    vi += a[0] * b[1] + a[1] * b[0];
                }
                if (!edge || i - d >= 0) {
                    const double* a = dr[Bw - d] + 2 * (i - d);
                    const double* b = t + 2 * (i - d);
                    vr += a[0] * b[0] - a[1] * b[1];
                    vi += a[0] * b[1] + a[1] * b[0];
                }
            }
            vr *= f;
            vi *= f;
            o[2 * i] = vr;
            o[2 * i + 1] = vi;
            x[2 * i] += vr;
            x[2 * i + 1] += vi;
            mx = std::max(mx, std::max(std::abs(vr), std::abs(vi)));
        };
        const Eigen::Index lo = std::min<Eigen::Index>(Bw, n);
        const Eigen::Index hi = std::max<Eigen::Index>(lo, n - Bw);
        for (Eigen::Index i = 0; i < lo; ++i) row(i, true);
        for (Eigen::Index i = lo; i < hi; ++i) row(i, false);
        for (Eigen::Index i = hi; i < n; ++i) row(i, true);
    }
    return mx;
}

}  // namespace detail

/* exp(A) X by truncated Taylor series, with substeps so that each substep
   has ||A/s||_1 <= 1/2. X must be a plain column-major vector or matrix. */
template <int Bw, class Mat>
void apply_exp_inplace(const BandedOperator<Bw>& A, Mat& X, double tol = 1e-17, int max_terms = 60)
{
    const double nrm = A.norm1();
    if (nrm == 0.0) return;
    const int sub = std::max(1, static_cast<int>(std::ceil(2.0 * nrm)));
    const double scale = 1.0 / sub;
    using Plain = typename Mat::PlainObject;
    Plain a(X.rows(), X.cols());
    Plain b(X.rows(), X.cols());
    for (int s = 0; s < sub; ++s) {
        a = X;
        const double ref = std::max(1.0, X.cwiseAbs().maxCoeff());
        cplx* cur = a.data();
        cplx* nxt = b.data();
        for (int k = 1; k <= max_terms; ++k) {
            const double m = detail::fused_taylor_term(A, cur, nxt, X.data(), X.cols(), scale / k);
            std::swap(cur, nxt);
            if (m <= tol * ref) break;
        }
    }
}

}  // namespace ratchet
