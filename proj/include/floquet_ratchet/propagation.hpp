#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "expm.hpp"
#include "model.hpp"
#include "time_series.hpp"

namespace ratchet {

enum class Scheme {
    magnus2,                // interaction-picture Magnus, first term only
    magnus4,                // interaction-picture Magnus with the commutator correction
    midpoint_exponential,   // dense exp(-i h H(t + h/2))
    commutator_free4        // dense two-exponential commutator-free scheme
};

inline const char* scheme_name(Scheme s)
{
    switch (s) {
    case Scheme::magnus2: return "magnus2";
    case Scheme::magnus4: return "magnus4";
    case Scheme::midpoint_exponential: return "midpoint";
    case Scheme::commutator_free4: return "cf4";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s)
{
    if (s == "magnus2") return Scheme::magnus2;
    if (s == "magnus4") return Scheme::magnus4;
    if (s == "midpoint" || s == "midpoint-exponential") return Scheme::midpoint_exponential;
    if (s == "cf4" || s == "fourth-order-commutator-free") return Scheme::commutator_free4;
    throw ValidationError("unknown scheme: " + s);
}

inline int scheme_order(Scheme s)
{
    return (s == Scheme::magnus2 || s == Scheme::midpoint_exponential) ? 2 : 4;
}

struct PropagatorConfig {
    int steps_per_period = 256;
    Scheme scheme = Scheme::magnus4;
    bool renormalize_each_step = false;
    bool convergence_check = false;
    double boundary_tolerance = default_boundary_tolerance;

    void validate() const
    {
        require(steps_per_period >= 8, "steps_per_period must be >= 8");
        require(boundary_tolerance > 0.0, "boundary_tolerance must be > 0");
    }
};

namespace detail {

// (e^z - 1)/z
inline cplx phi1(cplx z)
{
    if (std::abs(z) < 1.0) {
        cplx sum = 0.0, p = 1.0;
        double fact = 1.0;
        for (int k = 0; k < 25; ++k) {
            fact *= (k + 1);
            sum += p / fact;
            p *= z;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

// int_0^1 s e^{zs} ds
inline cplx phi_s(cplx z)
{
    if (std::abs(z) < 1.0) {
        cplx sum = 0.0, p = 1.0;
        double fact = 1.0;
        for (int k = 0; k < 25; ++k) {
            if (k > 0) fact *= k;
            sum += p / (fact * (k + 2));
            p *= z;
        }
        return sum;
    }
    return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

}  // namespace detail

/* One-step map for the drive. The magnus schemes work in the interaction
   picture of the diagonal kinetic term:
     psi(t+h) = e^{-iEh} exp(Omega) psi(t),
   with Omega built from the exact moments of e^{iEs} V(t+s) e^{-iEs}. */
class Stepper {
public:
    Stepper(const DriveParams& p, int M, double h, Scheme scheme)
        : p_(p), M_(M), N_(ladder_dim(M)), h_(h), scheme_(scheme), lam_(p.lambda)
    {
        p.validate();
        require(M >= 1, "truncation M must be >= 1");
        require(h > 0.0 && std::isfinite(h), "step size must be positive");
        const RVector E = free_energies(M);
        phase_ = (E.cast<cplx>() * cplx(0.0, -h)).array().exp().matrix();
        if (scheme_ == Scheme::magnus2 || scheme_ == Scheme::magnus4) build_kernels(E);
    }

    double step_size() const { return h_; }
    int truncation() const { return M_; }

    template <class Mat>
    void step(double t, Mat& X) const
    {
        switch (scheme_) {
        case Scheme::magnus2: {
            BandedOperator<1> A(N_);
            magnus_terms(t, A.offset(1), A.offset(-1), nullptr, nullptr);
            apply_exp_inplace(A, X);
            X = phase_.asDiagonal() * X;
            break;
        }
        case Scheme::magnus4: {
            BandedOperator<2> A(N_);
            CVector s1(N_), b1(N_);
            magnus_terms(t, A.offset(1), A.offset(-1), &s1, &b1);
            add_commutator(A, s1, b1);
            apply_exp_inplace(A, X);
            X = phase_.asDiagonal() * X;
            break;
        }
        case Scheme::midpoint_exponential: {
            CMatrix H = hamiltonian_matrix(p_, t + 0.5 * h_, M_);
            X = expm(cplx(0.0, -h_) * H) * X;
            break;
        }
        case Scheme::commutator_free4: {
            const double r = std::sqrt(3.0) / 6.0;
            const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
            const double a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
            CMatrix H1 = hamiltonian_matrix(p_, t + (0.5 - r) * h_, M_);
            CMatrix H2 = hamiltonian_matrix(p_, t + (0.5 + r) * h_, M_);
            const cplx mh(0.0, -h_);
            X = expm(mh * (a2 * H1 + a1 * H2)) * X;
            X = expm(mh * (a1 * H1 + a2 * H2)) * X;
            break;
        }
        }
    }

    /* Banded Magnus generator of the step starting at t (magnus schemes
       only); exposed for the dense consistency tests. */
    CMatrix generator(double t) const
    {
        require(scheme_ == Scheme::magnus2 || scheme_ == Scheme::magnus4, "generator needs a magnus scheme");
        BandedOperator<2> A(N_);
        CVector s1(N_), b1(N_);
        magnus_terms(t, A.offset(1), A.offset(-1), &s1, &b1);
        if (scheme_ == Scheme::magnus4) add_commutator(A, s1, b1);
        return A.dense();
    }

    const CVector& free_phase() const { return phase_; }

private:
    struct Kernel {
        CVector p0, m0, p1, m1;
    };

    void build_kernels(const RVector& E)
    {
        auto make = [&](int sign) {
            Kernel k{CVector::Zero(N_), CVector::Zero(N_), CVector::Zero(N_), CVector::Zero(N_)};
            for (int i = 0; i + 1 < N_; ++i) {
                const double delta = sign * (E(i) - E(i + 1));
                const cplx zp(0.0, (delta + p_.omega) * h_);
                const cplx zm(0.0, (delta - p_.omega) * h_);
                const cplx fp = detail::phi1(zp), fm = detail::phi1(zm);
                k.p0(i) = h_ * fp;
                k.m0(i) = h_ * fm;
                k.p1(i) = h_ * (detail::phi_s(zp) - 0.5 * fp);
                k.m1(i) = h_ * (detail::phi_s(zm) - 0.5 * fm);
            }
            return k;
        };
        sup_ = make(+1);
        sub_ = make(-1);
    }

    /* B0 = -i int_0^h A(s) ds and B1 = -(i/h) int_0^h (s - h/2) A(s) ds on
       the first off-diagonals; A(s) is the interaction-picture drive. */
    void magnus_terms(double t, CVector& s0, CVector& b0, CVector* s1, CVector* b1) const
    {
        const double theta = p_.omega * t + p_.phi;
        const cplx e = std::polar(1.0, theta);
        const cplx ec = std::conj(e);
        const cplx inv2i(0.0, -0.5);
        // -i * (i K lambda_pm / 2) = K lambda_pm / 2
        const double cs = 0.5 * p_.K * lam_.lambda_plus;
        const double cb = 0.5 * p_.K * lam_.lambda_minus;
        s0 = (cs * inv2i) * (e * sup_.p0 - ec * sup_.m0);
        b0 = (cb * inv2i) * (e * sub_.p0 - ec * sub_.m0);
        if (s1) *s1 = (cs * inv2i) * (e * sup_.p1 - ec * sup_.m1);
        if (b1) *b1 = (cb * inv2i) * (e * sub_.p1 - ec * sub_.m1);
    }

    // A += [B1, B0] where both have zero diagonal
    void add_commutator(BandedOperator<2>& A, const CVector& s1, const CVector& b1) const
    {
        const CVector& s0 = A.offset(1);
        const CVector& b0 = A.offset(-1);
        CVector& d0 = A.offset(0);
        CVector& u2 = A.offset(2);
        CVector& l2 = A.offset(-2);
        const int N = N_;
        for (int n = 0; n < N; ++n) {
            cplx v = 0.0;
            if (n + 1 < N) v += s1(n) * b0(n) - s0(n) * b1(n);
            if (n >= 1) v += b1(n - 1) * s0(n - 1) - b0(n - 1) * s1(n - 1);
            d0(n) = v;
        }
        for (int n = 0; n + 2 < N; ++n) {
            u2(n) = s1(n) * s0(n + 1) - s0(n) * s1(n + 1);
            l2(n) = b1(n + 1) * b0(n) - b0(n + 1) * b1(n);
        }
    }

    DriveParams p_;
    int M_;
    int N_;
    double h_;
    Scheme scheme_;
    CouplingPair lam_;
    CVector phase_;
    Kernel sup_, sub_;
};

struct Propagated {
    MomentumState state;
    double log_norm = 0.0;       // ln of the squared norm gained over the interval
    double boundary_max = 0.0;
    bool truncation_safe = true;
    double convergence_delta = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline int steps_for(double span, double T, int spp)
{
    const double x = span / T * spp;
    return std::max(1, static_cast<int>(std::ceil(x - 1e-9)));
}

inline Propagated propagate_fixed(const MomentumState& s, const DriveParams& p, double t0, double t1,
                                  const PropagatorConfig& cfg, int nsteps)
{
    DenormalGuard guard;
    const double h = (t1 - t0) / nsteps;
    Stepper st(p, s.truncation, h, cfg.scheme);
    CVector x = s.amplitudes;
    double log_norm = 0.0;
    double bmax = boundary_fraction(x);
    for (int k = 0; k < nsteps; ++k) {
        st.step(t0 + k * h, x);
        if (cfg.renormalize_each_step) {
            const double nn = x.squaredNorm();
            if (!std::isfinite(nn) || nn <= 0.0) throw NonFinite("norm became non-finite or zero during propagation");
            x /= std::sqrt(nn);
            log_norm += std::log(nn);
        }
        bmax = std::max(bmax, boundary_fraction(x));
    }
    if (!x.allFinite()) throw NonFinite("amplitudes became non-finite; enable renormalization");
    const double n0 = s.amplitudes.squaredNorm();
    if (cfg.renormalize_each_step)
        log_norm -= std::log(n0);
    else
        log_norm = std::log(x.squaredNorm()) - std::log(n0);
    Propagated out{MomentumState(std::move(x), s.truncation, t1), log_norm, bmax, bmax < cfg.boundary_tolerance};
    return out;
}

}  // namespace detail

inline Propagated propagate(const MomentumState& s, const DriveParams& p, double t0, double t1,
                            const PropagatorConfig& cfg = {})
{
    cfg.validate();
    p.validate();
    require(t1 > t0, "propagate needs t1 > t0");
    if (s.amplitudes.size() != s.dim()) throw SizeMismatch("state dimension inconsistent with truncation");
    if (!(s.amplitudes.squaredNorm() > 0.0)) throw ZeroNorm("initial state has zero norm");
    const int nsteps = detail::steps_for(t1 - t0, p.period(), cfg.steps_per_period);
    Propagated out = detail::propagate_fixed(s, p, t0, t1, cfg, nsteps);
    if (cfg.convergence_check) {
        Propagated fine = detail::propagate_fixed(s, p, t0, t1, cfg, 2 * nsteps);
        out.convergence_delta = (fine.state.amplitudes - out.state.amplitudes).cwiseAbs().maxCoeff();
    }
    return out;
}

namespace detail {

// rows with odd n negated: Z = diag((-1)^n)
inline void apply_parity(CMatrix& X, int M)
{
    for (int k = 0; k < X.rows(); ++k)
        if ((k - M) % 2 != 0) X.row(k) *= -1.0;
}

inline CMatrix period_matrix(const DriveParams& p, int M, int spp, Scheme scheme)
{
    DenormalGuard guard;
    const int N = ladder_dim(M);
    const double T = p.period();
    const double h = T / spp;
    Stepper st(p, M, h, scheme);
    CMatrix X = CMatrix::Identity(N, N);
    if (spp % 2 == 0) {
        // H(t + T/2) = Z H(t) Z, so U(T,0) = Z B Z B with B = U(T/2, 0)
        for (int k = 0; k < spp / 2; ++k) st.step(k * h, X);
        CMatrix W = X;
        apply_parity(W, M);
        CMatrix U = W * W;
        if (!U.allFinite()) throw NonFinite("one-period propagator is not finite");
        return U;
    }
    for (int k = 0; k < spp; ++k) st.step(k * h, X);
    if (!X.allFinite()) throw NonFinite("one-period propagator is not finite");
    return X;
}

}  // namespace detail

struct FloquetOperator {
    CMatrix U;
    double convergence_delta = std::numeric_limits<double>::quiet_NaN();
};

inline FloquetOperator one_period_operator(const DriveParams& p, int M, const PropagatorConfig& cfg = {})
{
    cfg.validate();
    p.validate();
    require(M >= 1, "truncation M must be >= 1");
    FloquetOperator out{detail::period_matrix(p, M, cfg.steps_per_period, cfg.scheme)};
    if (cfg.convergence_check) {
        CMatrix fine = detail::period_matrix(p, M, 2 * cfg.steps_per_period, cfg.scheme);
        out.convergence_delta = (fine - out.U).cwiseAbs().maxCoeff();
    }
    return out;
}

inline CMatrix one_period_propagator(const DriveParams& p, int M, const PropagatorConfig& cfg = {})
{
    return one_period_operator(p, M, cfg).U;
}

// U(T,0) by stepping every column straight through the period
inline CMatrix one_period_propagator_direct(const DriveParams& p, int M, const PropagatorConfig& cfg = {})
{
    cfg.validate();
    DenormalGuard guard;
    const int N = ladder_dim(M);
    const double h = p.period() / cfg.steps_per_period;
    Stepper st(p, M, h, cfg.scheme);
    CMatrix X = CMatrix::Identity(N, N);
    for (int k = 0; k < cfg.steps_per_period; ++k) st.step(k * h, X);
    if (!X.allFinite()) throw NonFinite("one-period propagator is not finite");
    return X;
}

inline TimeSeries evolve_with_observables(const MomentumState& s0, const DriveParams& p, double t_max,
                                          int samples_per_period, const PropagatorConfig& cfg = {},
                                          bool record_populations = false)
{
    cfg.validate();
    p.validate();
    require(t_max > 0.0, "t_max must be > 0");
    require(samples_per_period >= 1, "samples_per_period must be >= 1");
    require(cfg.steps_per_period % samples_per_period == 0,
            "samples_per_period must divide steps_per_period");
    if (s0.amplitudes.size() != s0.dim()) throw SizeMismatch("state dimension inconsistent with truncation");

    const int M = s0.truncation;
    const int N = s0.dim();
    const double T = p.period();
    const double h = T / cfg.steps_per_period;
    const int stride = cfg.steps_per_period / samples_per_period;
    const long nsteps = std::max(1L, static_cast<long>(std::ceil(t_max / h - 1e-9)));
    const long nsamples = nsteps / stride + 1 + (nsteps % stride ? 1 : 0);
    const RVector n = momentum_grid(M);
    const double t0 = s0.time;

    DenormalGuard guard;
    Stepper st(p, M, h, cfg.scheme);
    CVector x = s0.amplitudes;
    const double n0 = x.squaredNorm();
    if (!(n0 > 0.0)) throw ZeroNorm("initial state has zero norm");
    double log_acc = 0.0;

    TimeSeries ts;
    ts.truncation = M;
    ts.period = T;
    ts.times.reserve(nsamples);
    ts.current.reserve(nsamples);
    ts.log_norm.reserve(nsamples);
    std::vector<RVector> pops;
    double bmax = 0.0;

    auto sample = [&](double t) {
        const RVector prob = x.cwiseAbs2();
        const double s = prob.sum();
        if (!std::isfinite(s) || !x.allFinite()) throw NonFinite("amplitudes became non-finite; enable renormalization");
        if (s <= 0.0) throw ZeroNorm("state norm vanished");
        ts.times.push_back(t);
        ts.current.push_back(n.dot(prob) / s);
        ts.log_norm.push_back(log_acc + std::log(s) - std::log(n0));
        if (record_populations) pops.push_back(prob / s);
        bmax = std::max(bmax, boundary_fraction(x));
    };

    sample(t0);
    for (long k = 0; k < nsteps; ++k) {
        st.step(t0 + k * h, x);
        if (cfg.renormalize_each_step) {
            const double nn = x.squaredNorm();
            if (!std::isfinite(nn) || nn <= 0.0) throw NonFinite("norm became non-finite or zero during propagation");
            x /= std::sqrt(nn);
            log_acc += std::log(nn);
        }
        if ((k + 1) % stride == 0 || k + 1 == nsteps) sample(t0 + (k + 1) * h);
    }

    if (record_populations) {
        RMatrix P(static_cast<Eigen::Index>(pops.size()), N);
        for (std::size_t i = 0; i < pops.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = pops[i].transpose();
        ts.populations = std::move(P);
    }
    ts.boundary_max = bmax;
    ts.truncation_safe = bmax < cfg.boundary_tolerance;
    return ts;
}

}  // namespace ratchet
