#pragma once

#include <cmath>
#include <cstdlib>

#include "core.hpp"

namespace ratchet {

struct DriveParams {
    double K = 0.0;
    double lambda = 0.0;
    double omega = 1.0;
    double phi = 0.0;
    double g = 0.0;

    double period() const { return two_pi / omega; }

    void validate() const
    {
        require(std::isfinite(K) && K >= 0.0, "K must be finite and >= 0");
        require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
        require(std::isfinite(omega) && omega > 0.0, "omega must be finite and > 0");
        require(std::isfinite(phi), "phi must be finite");
        require(std::isfinite(g), "g must be finite");
    }
};

struct CouplingPair {
    double lambda_plus;
    double lambda_minus;

    explicit CouplingPair(double lambda) : lambda_plus(lambda + 1.0), lambda_minus(lambda - 1.0) {}
};

struct MomentumState {
    CVector amplitudes;
    int truncation = 1;
    double time = 0.0;

    MomentumState() = default;
    MomentumState(CVector amps, int M, double t = 0.0) : amplitudes(std::move(amps)), truncation(M), time(t)
    {
        require(M >= 1, "truncation M must be >= 1");
        if (amplitudes.size() != 2 * M + 1) throw SizeMismatch("momentum state dimension must be 2M+1");
    }

    int dim() const { return 2 * truncation + 1; }
    cplx& at(int n) { return amplitudes(n + truncation); }
    cplx at(int n) const { return amplitudes(n + truncation); }
};

inline int ladder_dim(int M) { return 2 * M + 1; }

// n^2/2 for n in [-M, M]
inline RVector free_energies(int M)
{
    RVector E(ladder_dim(M));
    for (int k = 0; k < E.size(); ++k) {
        double n = k - M;
        E(k) = 0.5 * n * n;
    }
    return E;
}

inline RVector momentum_grid(int M)
{
    return RVector::LinSpaced(ladder_dim(M), -M, M);
}

inline cplx drive_factor(const DriveParams& p, double t)
{
    return I_unit * (0.5 * p.K * std::sin(p.omega * t + p.phi));
}

inline CMatrix hamiltonian_matrix(const DriveParams& p, double t, int M)
{
    require(M >= 1, "truncation M must be >= 1");
    const int N = ladder_dim(M);
    const CouplingPair lam(p.lambda);
    const cplx f = drive_factor(p, t);
    CMatrix H = CMatrix::Zero(N, N);
    H.diagonal() = free_energies(M).cast<cplx>();
    H.diagonal(1).setConstant(f * lam.lambda_plus);
    H.diagonal(-1).setConstant(f * lam.lambda_minus);
    return H;
}

inline CVector apply_hamiltonian(const MomentumState& s, const DriveParams& p, double t)
{
    const int N = s.dim();
    if (s.amplitudes.size() != N) throw SizeMismatch("state dimension inconsistent with truncation");
    const CouplingPair lam(p.lambda);
    const cplx f = drive_factor(p, t);
    const CVector& c = s.amplitudes;
    CVector out = free_energies(s.truncation).cast<cplx>().cwiseProduct(c);
    out.head(N - 1) += (f * lam.lambda_plus) * c.tail(N - 1);
    out.tail(N - 1) += (f * lam.lambda_minus) * c.head(N - 1);
    return out;
}

inline MomentumState initial_state_zero_momentum(int M)
{
    require(M >= 1, "truncation M must be >= 1");
    CVector c = CVector::Zero(ladder_dim(M));
    c(M) = 1.0;
    return MomentumState(std::move(c), M, 0.0);
}

inline MomentumState basis_state(int n, int M)
{
    require(std::abs(n) <= M, "basis index outside the ladder");
    MomentumState s = initial_state_zero_momentum(M);
    s.amplitudes.setZero();
    s.at(n) = 1.0;
    return s;
}

// population fraction on |n| in {M-1, M}
inline double boundary_fraction(const CVector& c)
{
    const Eigen::Index N = c.size();
    double total = c.squaredNorm();
    if (total == 0.0) return 0.0;
    double edge = std::norm(c(0)) + std::norm(c(N - 1));
    if (N >= 5) edge += std::norm(c(1)) + std::norm(c(N - 2));
    return edge / total;
}

inline constexpr double default_boundary_tolerance = 1e-8;

}  // namespace ratchet
