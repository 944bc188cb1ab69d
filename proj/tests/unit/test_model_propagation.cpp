#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <floquet_ratchet/floquet_ratchet.hpp>

using namespace ratchet;

namespace {

CVector random_vector(int n, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    CVector v(n);
    for (int k = 0; k < n; ++k) v(k) = cplx(d(rng), d(rng));
    return v;
}

CMatrix random_matrix(int n, unsigned seed, double norm)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    CMatrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = cplx(d(rng), d(rng));
    return A * (norm / A.cwiseAbs().colwise().sum().maxCoeff());
}

// plain Taylor series with scaling and squaring, summed in long double
CMatrix series_exp(const CMatrix& A)
{
    using LC = std::complex<long double>;
    using LM = Eigen::Matrix<LC, Eigen::Dynamic, Eigen::Dynamic>;
    const double nrm = A.cwiseAbs().colwise().sum().maxCoeff();
    int sq = 0;
    while (std::ldexp(nrm, -sq) > 0.25) ++sq;
    LM B = A.cast<LC>() * LC(std::ldexp(1.0L, -sq));
    LM term = LM::Identity(A.rows(), A.cols()), sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * B / LC(static_cast<long double>(k));
        sum += term;
    }
    for (int s = 0; s < sq; ++s) sum = sum * sum;
    return sum.cast<cplx>();
}

double max_abs(const CMatrix& A) { return A.cwiseAbs().maxCoeff(); }

DriveParams params(double K, double lambda, double omega)
{
    DriveParams p;
    p.K = K;
    p.lambda = lambda;
    p.omega = omega;
    return p;
}

}  // namespace

TEST(DriveParams, ValidatesRanges)
{
    EXPECT_THROW(params(-1.0, 0.0, 1.0).validate(), ValidationError);
    EXPECT_THROW(params(1.0, -0.1, 1.0).validate(), ValidationError);
    EXPECT_THROW(params(1.0, 0.1, 0.0).validate(), ValidationError);
    EXPECT_NO_THROW(params(0.0, 0.0, 0.5).validate());
    EXPECT_DOUBLE_EQ(params(1.0, 0.0, 0.5).period(), 4.0 * std::numbers::pi);
}

TEST(CouplingPair, DifferenceIsTwo)
{
    for (double l : {0.0, 0.3, 1.0, 6.34}) {
        const CouplingPair c(l);
        EXPECT_EQ(c.lambda_plus - c.lambda_minus, 2.0);
    }
}

TEST(Hamiltonian, ZeroDriveIsFreeDiagonal)
{
    const CMatrix H = hamiltonian_matrix(params(0.0, 0.7, 1.0), 0.3, 4);
    CMatrix D = CMatrix::Zero(9, 9);
    for (int n = -4; n <= 4; ++n) D(n + 4, n + 4) = 0.5 * n * n;
    EXPECT_EQ(max_abs(H - D), 0.0);
}

TEST(Hamiltonian, HermitianAtLambdaZero)
{
    const DriveParams p = params(0.8, 0.0, 1.3);
    for (double t : {0.0, 0.4, 1.7, 3.9}) {
        const CMatrix H = hamiltonian_matrix(p, t, 6);
        EXPECT_LT(max_abs(H - H.adjoint()), 1e-15);
        const cplx f = I_unit * (0.5 * p.K * std::sin(p.omega * t));
        EXPECT_LT(std::abs(H(2, 3) - f), 1e-15);
        EXPECT_LT(std::abs(H(3, 2) + f), 1e-15);
    }
}

TEST(Hamiltonian, ExceptionalPointTruncation)
{
    const DriveParams p = params(0.01, 1.0, 0.5);
    const double t = 0.9;
    const CMatrix H = hamiltonian_matrix(p, t, 1);
    const cplx f = I_unit * (0.01 * std::sin(0.5 * t));
    EXPECT_EQ(H(1, 0), cplx(0.0));
    EXPECT_EQ(H(2, 1), cplx(0.0));
    EXPECT_LT(std::abs(H(0, 1) - f), 1e-16);
    EXPECT_LT(std::abs(H(1, 2) - f), 1e-16);
    EXPECT_EQ(H(0, 0), cplx(0.5));
    EXPECT_EQ(H(1, 1), cplx(0.0));
    EXPECT_EQ(H(2, 2), cplx(0.5));
}

TEST(Hamiltonian, ApplyMatchesDenseProduct)
{
    const DriveParams p = params(1.3, 0.6, 0.8);
    for (int M : {1, 5, 31}) {
        MomentumState s(random_vector(2 * M + 1, 11u + M), M, 0.0);
        const double t = 0.37 * M;
        const CVector ref = hamiltonian_matrix(p, t, M) * s.amplitudes;
        EXPECT_LT((apply_hamiltonian(s, p, t) - ref).norm(), 1e-13 * ref.norm());
    }
}

TEST(Hamiltonian, ApplyOnZeroMomentum)
{
    MomentumState s = initial_state_zero_momentum(3);
    EXPECT_EQ(apply_hamiltonian(s, params(0.0, 0.5, 1.0), 1.0).norm(), 0.0);
    const CVector out = apply_hamiltonian(s, params(0.2, 1.0, 1.0), 1.0);
    for (int n = -3; n <= 3; ++n)
        if (n != -1) EXPECT_EQ(std::abs(out(n + 3)), 0.0) << n;
    EXPECT_GT(std::abs(out(2)), 0.0);
}

TEST(Hamiltonian, DriveHasZeroMeanOverPeriod)
{
    const DriveParams p = params(0.9, 0.4, 1.7);
    const int M = 4, q = 2000;
    const double T = p.period();
    CMatrix acc = CMatrix::Zero(9, 9);
    for (int k = 0; k < q; ++k) {
        CMatrix H = hamiltonian_matrix(p, (k + 0.5) * T / q, M);
        H.diagonal().setZero();
        acc += H * (T / q);
    }
    EXPECT_LT(max_abs(acc), 1e-10);
}

TEST(Hamiltonian, TimeReversalIsComplexConjugation)
{
    for (double lam : {0.0, 0.5, 1.0, 2.0}) {
        const DriveParams p = params(0.7, lam, 1.1);
        for (double t : {0.3, 1.9}) {
            const CMatrix Hp = hamiltonian_matrix(p, t, 5);
            const CMatrix Hm = hamiltonian_matrix(p, -t, 5);
            EXPECT_LT(max_abs(Hm - Hp.conjugate()), 1e-15);
        }
    }
}

TEST(Hamiltonian, ReflectedTimeReversalDoesNotHold)
{
    const DriveParams p = params(0.7, 0.5, 1.1);
    const int M = 5;
    const double t = 0.3;
    const CMatrix Hp = hamiltonian_matrix(p, t, M);
    const CMatrix Hm = hamiltonian_matrix(p, -t, M);
    CMatrix R = CMatrix::Zero(2 * M + 1, 2 * M + 1);
    for (int k = 0; k <= 2 * M; ++k) R(k, 2 * M - k) = 1.0;
    EXPECT_GT(max_abs(R * Hm * R - Hp.conjugate()), 0.1);
}

TEST(MomentumState, ZeroMomentumState)
{
    const MomentumState s = initial_state_zero_momentum(2);
    EXPECT_EQ(s.dim(), 5);
    EXPECT_EQ(s.amplitudes, (CVector(5) << 0, 0, 1, 0, 0).finished());
    EXPECT_EQ(initial_state_zero_momentum(1).amplitudes, (CVector(3) << 0, 1, 0).finished());
    for (int M : {1, 7, 255}) EXPECT_EQ(initial_state_zero_momentum(M).amplitudes.norm(), 1.0);
}

TEST(MomentumState, WrongLengthIsRejected)
{
    EXPECT_THROW(MomentumState(CVector::Zero(4), 2, 0.0), SizeMismatch);
}

TEST(Expm, MatchesSeriesOracle)
{
    for (int n : {3, 5, 17, 65}) {
        for (double nrm : {0.1, 1.0, 5.0}) {
            const CMatrix A = random_matrix(n, 7u * n, nrm);
            const CMatrix ref = series_exp(A);
            EXPECT_LT(max_abs(expm(A) - ref) / max_abs(ref), 1e-11) << n << " " << nrm;
        }
    }
}

TEST(Expm, InverseOnLargeInputs)
{
    for (int n : {257, 1025}) {
        const CMatrix A = random_matrix(n, 3u, 2.0);
        const CMatrix P = expm(A) * expm(-A);
        EXPECT_LT(max_abs(P - CMatrix::Identity(n, n)), 1e-11) << n;
    }
}

TEST(Expm, BandedTaylorMatchesDense)
{
    for (int n : {3, 9, 129, 513}) {
        BandedOperator<2> A(n);
        std::mt19937 rng(n);
        std::normal_distribution<double> d;
        for (int o = -2; o <= 2; ++o)
            for (int k = 0; k < n; ++k) A.offset(o)(k) = cplx(d(rng), d(rng)) * 0.4;
        CMatrix X = random_matrix(n, 5u, 1.0).leftCols(std::min(n, 7));
        const CMatrix ref = expm(A.dense()) * X;
        apply_exp_inplace(A, X);
        EXPECT_LT(max_abs(X - ref) / max_abs(ref), 1e-12) << n;
    }
}

TEST(Expm, BandedApplyMatchesDense)
{
    BandedOperator<2> A(11);
    for (int o = -2; o <= 2; ++o)
        for (int k = 0; k < 11; ++k) A.offset(o)(k) = cplx(o + 0.1 * k, 0.3 * o - k);
    const CMatrix X = random_matrix(11, 9u, 1.0);
    CMatrix Y(11, 11);
    A.apply(X, Y);
    EXPECT_LT(max_abs(Y - A.dense() * X), 1e-12);
    EXPECT_NEAR(A.norm1(), A.dense().cwiseAbs().colwise().sum().maxCoeff(), 1e-12);
}

TEST(Propagation, FreeEvolutionKeepsZeroMomentum)
{
    const DriveParams p = params(0.0, 0.7, 1.0);
    const MomentumState s = initial_state_zero_momentum(4);
    const Propagated r = propagate(s, p, 0.0, 37.5);
    EXPECT_EQ(r.state.amplitudes, s.amplitudes);
    EXPECT_EQ(r.log_norm, 0.0);
}

TEST(Propagation, FreePropagatorIsDiagonalPhase)
{
    const DriveParams p = params(0.0, 0.3, 1.0);
    const int M = 6;
    const CMatrix U = one_period_propagator(p, M);
    CMatrix ref = CMatrix::Zero(2 * M + 1, 2 * M + 1);
    for (int n = -M; n <= M; ++n) ref(n + M, n + M) = std::exp(cplx(0.0, -0.5 * n * n * p.period()));
    EXPECT_LT(max_abs(U - ref), 1e-12);
}

TEST(Propagation, UnitaryAtLambdaZero)
{
    const DriveParams p = params(1.0, 0.0, 1.0);
    for (Scheme sc : {Scheme::magnus2, Scheme::magnus4, Scheme::midpoint_exponential, Scheme::commutator_free4}) {
        PropagatorConfig cfg;
        cfg.scheme = sc;
        cfg.steps_per_period = 64;
        const CMatrix U = one_period_propagator(p, 12, cfg);
        EXPECT_LT(max_abs(U.adjoint() * U - CMatrix::Identity(25, 25)), 1e-9) << scheme_name(sc);
    }
}

TEST(Propagation, NormDriftAtLambdaZeroOverHundredPeriods)
{
    const DriveParams p = params(1.0, 0.0, 1.0);
    MomentumState s(random_vector(33, 4u), 16, 0.0);
    s.amplitudes.normalize();
    const Propagated r = propagate(s, p, 0.0, 100.0 * p.period());
    EXPECT_LT(std::abs(r.state.amplitudes.squaredNorm() - 1.0), 1e-10);
}

TEST(Propagation, HalfPeriodSymmetryMatchesDirectStepping)
{
    for (Scheme sc : {Scheme::magnus4, Scheme::commutator_free4}) {
        PropagatorConfig cfg;
        cfg.scheme = sc;
        cfg.steps_per_period = 128;
        const DriveParams p = params(1.0, 0.5, 1.0);
        const CMatrix a = one_period_propagator(p, 16, cfg);
        const CMatrix b = one_period_propagator_direct(p, 16, cfg);
        EXPECT_LT(max_abs(a - b), 1e-12 * std::max(1.0, max_abs(b))) << scheme_name(sc);
    }
}

TEST(Propagation, CompositionOfIntervals)
{
    const DriveParams p = params(0.8, 0.4, 1.3);
    const MomentumState s = initial_state_zero_momentum(12);
    const double T = p.period();
    const Propagated ab = propagate(s, p, 0.0, 3.0 * T);
    const Propagated a = propagate(s, p, 0.0, 1.0 * T);
    const Propagated b = propagate(a.state, p, 1.0 * T, 3.0 * T);
    EXPECT_LT((ab.state.amplitudes - b.state.amplitudes).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(ab.log_norm, a.log_norm + b.log_norm, 1e-12);
}

TEST(Propagation, PropagatorMatchesStateEvolution)
{
    const DriveParams p = params(0.8, 0.4, 1.3);
    const int M = 10;
    const MomentumState s = initial_state_zero_momentum(M);
    const Propagated r = propagate(s, p, 0.0, p.period());
    const CVector ref = one_period_propagator(p, M) * s.amplitudes;
    EXPECT_LT((r.state.amplitudes - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagation, RenormalizedRunMatchesRawRun)
{
    const DriveParams p = params(0.1, 1.2, 0.5);
    const MomentumState s = initial_state_zero_momentum(12);
    PropagatorConfig raw, ren;
    ren.renormalize_each_step = true;
    const TimeSeries a = evolve_with_observables(s, p, 60.0 * p.period(), 8, raw);
    const TimeSeries b = evolve_with_observables(s, p, 60.0 * p.period(), 8, ren);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_NEAR(a.current[k], b.current[k], 1e-12);
        EXPECT_NEAR(a.log_norm[k], b.log_norm[k], 1e-10 * std::max(1.0, std::abs(a.log_norm[k])));
    }
    EXPECT_GT(a.log_norm.back(), 1.0);
}

TEST(Propagation, TimeSeriesLayout)
{
    const DriveParams p = params(0.5, 0.2, 1.0);
    const TimeSeries ts = evolve_with_observables(initial_state_zero_momentum(6), p, 2.0 * p.period(), 4, {}, true);
    ASSERT_TRUE(ts.consistent());
    EXPECT_EQ(ts.size(), 9u);
    EXPECT_EQ(ts.log_norm[0], 0.0);
    EXPECT_NEAR(ts.times.back(), 2.0 * p.period(), 1e-12);
    ASSERT_TRUE(ts.populations.has_value());
    EXPECT_EQ(ts.populations->cols(), 13);
    for (Eigen::Index k = 0; k < ts.populations->rows(); ++k) EXPECT_NEAR(ts.populations->row(k).sum(), 1.0, 1e-12);
}

TEST(Propagation, RejectsBadConfig)
{
    PropagatorConfig cfg;
    cfg.steps_per_period = 4;
    EXPECT_THROW(one_period_propagator(params(1.0, 0.1, 1.0), 4, cfg), ValidationError);
    cfg.steps_per_period = 256;
    EXPECT_THROW(evolve_with_observables(initial_state_zero_momentum(4), params(1.0, 0.1, 1.0), 10.0, 3, cfg),
                 ValidationError);
    EXPECT_THROW(propagate(MomentumState(CVector::Zero(9), 4, 0.0), params(1.0, 0.1, 1.0), 0.0, 1.0), ZeroNorm);
}

TEST(Propagation, BoundaryGuardFlagsSpreading)
{
    const DriveParams p = params(1.0, 1.5, 3.0);
    PropagatorConfig cfg;
    cfg.renormalize_each_step = true;
    const TimeSeries narrow = evolve_with_observables(initial_state_zero_momentum(4), p, 30.0 * p.period(), 8, cfg);
    EXPECT_FALSE(narrow.truncation_safe);
    const TimeSeries calm = evolve_with_observables(initial_state_zero_momentum(12), params(0.05, 0.0, 1.0),
                                                    10.0 * two_pi, 8, cfg);
    EXPECT_TRUE(calm.truncation_safe);
}

TEST(Propagation, ExceptionalPointNormGrowth)
{
    const DriveParams p = params(0.01, 1.0, 0.5);
    const TimeSeries ts = evolve_with_observables(initial_state_zero_momentum(8), p, 1000.0, 1);
    const double n2 = std::exp(ts.log_norm.back());
    EXPECT_NEAR(ts.times.back(), 1000.0, p.period());
    const double t = ts.times.back();
    EXPECT_NEAR(n2, 1.0 + p.K * p.K * t * t / 4.0, 0.02 * 26.0);
}

namespace {

double period_error(const DriveParams& p, int M, Scheme sc, int steps, const CMatrix& ref)
{
    PropagatorConfig cfg;
    cfg.scheme = sc;
    cfg.steps_per_period = steps;
    return max_abs(one_period_propagator(p, M, cfg) - ref);
}

}  // namespace

TEST(Propagation, ConvergenceOrderOfSchemes)
{
    const DriveParams p = params(1.0, 0.5, 1.0);
    const int M = 6;
    PropagatorConfig fine;
    fine.steps_per_period = 8192;
    const CMatrix ref = one_period_propagator(p, M, fine);
    for (Scheme sc : {Scheme::magnus2, Scheme::magnus4, Scheme::midpoint_exponential, Scheme::commutator_free4}) {
        const double e1 = period_error(p, M, sc, 256, ref);
        const double e2 = period_error(p, M, sc, 512, ref);
        const double order = std::log2(e1 / e2);
        EXPECT_GT(order, scheme_order(sc) - 0.3) << scheme_name(sc) << " e1=" << e1 << " e2=" << e2;
    }
}

TEST(Propagation, SelfConvergenceOfDefaultScheme)
{
    const DriveParams p = params(1.0, 0.5, 1.0);
    PropagatorConfig a, b;
    a.steps_per_period = 4096;
    b.steps_per_period = 8192;
    const CMatrix Ua = one_period_propagator(p, 64, a);
    const CMatrix Ub = one_period_propagator(p, 64, b);
    EXPECT_LT(max_abs(Ua - Ub), 1e-8);
}

TEST(Propagation, ConvergenceCheckReportsDelta)
{
    PropagatorConfig cfg;
    cfg.convergence_check = true;
    const FloquetOperator op = one_period_operator(params(1.0, 0.5, 1.0), 8, cfg);
    EXPECT_TRUE(std::isfinite(op.convergence_delta));
    EXPECT_LT(op.convergence_delta, 1e-6);
}

TEST(Propagation, SchemeNamesRoundTrip)
{
    for (Scheme sc : {Scheme::magnus2, Scheme::magnus4, Scheme::midpoint_exponential, Scheme::commutator_free4})
        EXPECT_EQ(parse_scheme(scheme_name(sc)), sc);
    EXPECT_THROW(parse_scheme("euler"), ValidationError);
}
