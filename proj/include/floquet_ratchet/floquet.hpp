#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "observables.hpp"
#include "propagation.hpp"

namespace ratchet {

// fold into [-omega/2, omega/2)
inline double fold_quasienergy(double e, double omega)
{
    double r = e - omega * std::floor(e / omega + 0.5);
    if (r >= 0.5 * omega * (1.0 - 1e-12)) r = std::max(r - omega, -0.5 * omega);
    return r;
}

struct FloquetSpectrum {
    CVector quasienergies;   // eps_r + i eps_i
    CVector multipliers;     // eigenvalues mu of U
    CMatrix modes;           // unit-norm right eigenvectors, empty if not requested
    double omega = 1.0;
    int truncation = 0;
    double condition = std::numeric_limits<double>::quiet_NaN();
    // orthonormal Schur vectors ordered like the eigenvalues, filled when condition > 1e8
    std::optional<CMatrix> schur_vectors;

    Eigen::Index size() const { return quasienergies.size(); }
    bool has_modes() const { return modes.size() > 0; }
    double period() const { return two_pi / omega; }
};

struct SpectrumOptions {
    bool vectors = true;
    bool condition = true;
    double schur_condition = 1e8;
};

inline cplx quasienergy_from_multiplier(cplx mu, double omega)
{
    const double T = two_pi / omega;
    if (mu == cplx(0.0)) throw EigenFailure("zero Floquet multiplier");
    const double re = fold_quasienergy(-std::arg(mu) / T, omega);
    const double im = std::log(std::abs(mu)) / T;
    return {re, im};
}

inline FloquetSpectrum floquet_spectrum(const CMatrix& U, double omega, const SpectrumOptions& opt = {})
{
    if (U.rows() != U.cols()) throw SizeMismatch("Floquet operator must be square");
    require(omega > 0.0, "omega must be > 0");
    DenormalGuard guard;
    FloquetSpectrum s;
    s.omega = omega;
    s.truncation = static_cast<int>((U.rows() - 1) / 2);
    Eigen::ComplexEigenSolver<CMatrix> es(U, opt.vectors);
    if (es.info() != Eigen::Success) throw EigenFailure("eigensolver did not converge");
    s.multipliers = es.eigenvalues();
    s.quasienergies.resize(U.rows());
    for (Eigen::Index k = 0; k < U.rows(); ++k) s.quasienergies(k) = quasienergy_from_multiplier(s.multipliers(k), omega);
    if (opt.vectors) {
        s.modes = es.eigenvectors();
        for (Eigen::Index k = 0; k < s.modes.cols(); ++k) s.modes.col(k).normalize();
        if (opt.condition) {
            Eigen::BDCSVD<CMatrix> svd(s.modes);
            const RVector& sv = svd.singularValues();
            const double smin = sv(sv.size() - 1);
            s.condition = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
            if (s.condition > opt.schur_condition) {
                Eigen::ComplexSchur<CMatrix> schur(U);
                if (schur.info() != Eigen::Success) throw EigenFailure("Schur decomposition did not converge");
                const CMatrix& T = schur.matrixT();
                const CMatrix& Q = schur.matrixU();
                CMatrix ordered(U.rows(), U.cols());
                std::vector<bool> used(U.rows(), false);
                for (Eigen::Index k = 0; k < U.rows(); ++k) {
                    Eigen::Index best = -1;
                    double bd = std::numeric_limits<double>::infinity();
                    for (Eigen::Index j = 0; j < U.rows(); ++j) {
                        if (used[j]) continue;
                        const double d = std::abs(T(j, j) - s.multipliers(k));
                        if (d < bd) {
                            bd = d;
                            best = j;
                        }
                    }
                    used[best] = true;
                    ordered.col(k) = Q.col(best);
                }
                s.schur_vectors = std::move(ordered);
            }
        }
    }
    return s;
}

inline double imag_sum_xi(const FloquetSpectrum& s) { return s.quasienergies.imag().cwiseAbs().sum(); }

inline FloquetSpectrum spectrum_at(const DriveParams& p, int M, const PropagatorConfig& cfg = {},
                                   const SpectrumOptions& opt = {})
{
    return floquet_spectrum(one_period_propagator(p, M, cfg), p.omega, opt);
}

inline double xi_at(const DriveParams& p, int M, const PropagatorConfig& cfg = {})
{
    SpectrumOptions opt;
    opt.vectors = false;
    return imag_sum_xi(spectrum_at(p, M, cfg, opt));
}

struct ThresholdOptions {
    double xi_tol = 1e-6;
    double resolution = 1e-3;
    double scan_step = 0.5;   // <= 0 disables the coarse scan
    int truncation = 255;
};

struct ThresholdResult {
    double value = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int evaluations = 0;
};

namespace detail {

/* Smallest x in [lo, hi] where indicator(x) turns true, assuming
   indicator(lo) is false and indicator(hi) is true. A coarse scan locates
   the first crossing, bisection refines it. */
inline ThresholdResult first_crossing(const std::function<bool(double)>& indicator, double lo, double hi,
                                      double scan_step, double resolution, const char* what)
{
    require(hi > lo, "empty search range");
    require(resolution > 0.0, "resolution must be > 0");
    ThresholdResult r;
    auto eval = [&](double x) {
        ++r.evaluations;
        return indicator(x);
    };
    if (eval(lo)) throw BracketFailure(std::string(what) + ": indicator already set at the lower end");
    double a = lo, b = hi;
    bool found = false;
    if (scan_step > 0.0) {
        for (double x = lo + scan_step; x < hi - 1e-12; x += scan_step) {
            if (eval(x)) {
                b = x;
                found = true;
                break;
            }
            a = x;
        }
    }
    if (!found && !eval(hi)) throw BracketFailure(std::string(what) + ": indicator not set at the upper end");
    while (b - a > resolution) {
        const double m = 0.5 * (a + b);
        if (eval(m))
            b = m;
        else
            a = m;
    }
    r.value = 0.5 * (a + b);
    r.bracket_lo = a;
    r.bracket_hi = b;
    return r;
}

}  // namespace detail

inline ThresholdResult pt_threshold(const DriveParams& base, double lambda_lo, double lambda_hi,
                                    const ThresholdOptions& opt = {}, const PropagatorConfig& cfg = {})
{
    base.validate();
    require(lambda_lo >= 0.0, "lambda range must be non-negative");
    auto broken = [&](double lam) {
        DriveParams p = base;
        p.lambda = lam;
        return xi_at(p, opt.truncation, cfg) > opt.xi_tol;
    };
    return detail::first_crossing(broken, lambda_lo, lambda_hi, opt.scan_step, opt.resolution, "pt_threshold");
}

enum class StateTag {
    degenerate_same_distribution,
    degenerate_symmetric_pair,
    degenerate_other,
    nondegenerate_asymmetric,
    nondegenerate_symmetric
};

inline const char* tag_name(StateTag t)
{
    switch (t) {
    case StateTag::degenerate_same_distribution: return "degenerate-same-distribution";
    case StateTag::degenerate_symmetric_pair: return "degenerate-symmetric-pair";
    case StateTag::degenerate_other: return "degenerate-other";
    case StateTag::nondegenerate_asymmetric: return "nondegenerate-asymmetric";
    case StateTag::nondegenerate_symmetric: return "nondegenerate-symmetric";
    }
    return "?";
}

inline bool is_degenerate(StateTag t)
{
    return t == StateTag::degenerate_same_distribution || t == StateTag::degenerate_symmetric_pair ||
           t == StateTag::degenerate_other;
}

struct StateClass {
    StateTag tag = StateTag::nondegenerate_symmetric;
    std::optional<Eigen::Index> partner_index;
    double mean_momentum = 0.0;
    double overlap = 0.0;   // |<phi_a|psi>| with unit-norm phi_a
};

// distance between quasienergies with the real part taken on the circle of length omega
inline double quasienergy_distance(cplx a, cplx b, double omega)
{
    double dr = std::abs(a.real() - b.real());
    dr = std::min(dr, omega - dr);
    return std::hypot(dr, a.imag() - b.imag());
}

inline double l1_distance(const RVector& a, const RVector& b) { return (a - b).cwiseAbs().sum(); }

struct ClassifyOptions {
    double degeneracy_tol = 1e-6;
    double profile_tol = 1e-6;
    double asymmetry_tol = 1e-8;
};

inline std::vector<StateClass> classify_floquet_states(const FloquetSpectrum& s, const MomentumState& overlap_state,
                                                       const ClassifyOptions& opt = {})
{
    require(s.has_modes(), "classification needs Floquet modes");
    if (overlap_state.amplitudes.size() != s.modes.rows()) throw SizeMismatch("overlap state has the wrong dimension");
    const CMatrix& vecs = s.schur_vectors ? *s.schur_vectors : s.modes;
    const Eigen::Index N = s.size();
    std::vector<RVector> prof(N), refl(N);
    for (Eigen::Index a = 0; a < N; ++a) {
        prof[a] = momentum_distribution(vecs.col(a));
        refl[a] = prof[a].reverse();
    }
    const CVector psi = overlap_state.amplitudes / overlap_state.amplitudes.norm();
    std::vector<StateClass> out(N);
    for (Eigen::Index a = 0; a < N; ++a) {
        StateClass& c = out[a];
        c.mean_momentum = mean_momentum(vecs.col(a));
        c.overlap = std::abs(s.modes.col(a).dot(psi));
        Eigen::Index partner = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index b = 0; b < N; ++b) {
            if (b == a) continue;
            const double d = quasienergy_distance(s.quasienergies(a), s.quasienergies(b), s.omega);
            if (d < opt.degeneracy_tol && d < best) {
                best = d;
                partner = b;
            }
        }
        if (partner >= 0) {
            c.partner_index = partner;
            if (l1_distance(prof[a], prof[partner]) < opt.profile_tol)
                c.tag = StateTag::degenerate_same_distribution;
            else if (l1_distance(prof[a], refl[partner]) < opt.profile_tol)
                c.tag = StateTag::degenerate_symmetric_pair;
            else
                c.tag = StateTag::degenerate_other;
        } else {
            c.tag = std::abs(c.mean_momentum) > opt.asymmetry_tol ? StateTag::nondegenerate_asymmetric
                                                                  : StateTag::nondegenerate_symmetric;
        }
    }
    return out;
}

enum class ProjectionMode { plain, biorthogonal };

// plain: C = Phi^dagger psi; biorthogonal: C = Phi^{-1} psi
inline CVector expansion_coefficients(const FloquetSpectrum& s, const CVector& psi,
                                      ProjectionMode mode = ProjectionMode::plain)
{
    require(s.has_modes(), "expansion needs Floquet modes");
    if (psi.size() != s.modes.rows()) throw SizeMismatch("state has the wrong dimension");
    if (mode == ProjectionMode::plain) return s.modes.adjoint() * psi;
    return s.modes.partialPivLu().solve(psi);
}

struct EPPair {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    cplx quasienergy;   // pair mean
    double gap = 0.0;
    double overlap = 0.0;
};

struct EPEvidence {
    double eigenvalue_gap = std::numeric_limits<double>::infinity();
    double eigenvector_overlap = 0.0;
    bool is_ep = false;
    EPPair closest;
    // best-overlap pair in each cluster of mutually close quasienergies
    std::vector<EPPair> clusters;
};

inline EPEvidence ep_evidence(const FloquetSpectrum& s, double tol = 1e-3)
{
    require(s.has_modes(), "EP analysis needs Floquet modes");
    const Eigen::Index N = s.size();
    EPEvidence ev;
    auto pair_of = [&](Eigen::Index i, Eigen::Index j) {
        EPPair p;
        p.i = i;
        p.j = j;
        p.gap = quasienergy_distance(s.quasienergies(i), s.quasienergies(j), s.omega);
        p.overlap = std::abs(s.modes.col(i).dot(s.modes.col(j)));
        cplx a = s.quasienergies(i), b = s.quasienergies(j);
        if (b.real() - a.real() > 0.5 * s.omega) b -= s.omega;
        if (a.real() - b.real() > 0.5 * s.omega) b += s.omega;
        p.quasienergy = cplx(fold_quasienergy(0.5 * (a.real() + b.real()), s.omega), 0.5 * (a.imag() + b.imag()));
        return p;
    };

    // union-find over pairs closer than tol
    std::vector<Eigen::Index> root(N);
    std::iota(root.begin(), root.end(), Eigen::Index{0});
    std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
        while (root[x] != x) x = root[x] = root[root[x]];
        return x;
    };
    std::vector<EPPair> close;
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = i + 1; j < N; ++j) {
            const double d = quasienergy_distance(s.quasienergies(i), s.quasienergies(j), s.omega);
            if (ev.closest.i < 0 || d < ev.closest.gap) ev.closest = pair_of(i, j);
            if (d < tol) {
                close.push_back(pair_of(i, j));
                root[find(i)] = find(j);
            }
        }
    }
    for (const EPPair& p : close)
        if (p.gap <= ev.closest.gap && p.overlap > ev.closest.overlap) ev.closest = p;

    std::vector<Eigen::Index> best(N, -1);
    for (std::size_t k = 0; k < close.size(); ++k) {
        const Eigen::Index r = find(close[k].i);
        if (best[r] < 0 || close[k].overlap > close[best[r]].overlap) best[r] = static_cast<Eigen::Index>(k);
    }
    for (Eigen::Index r = 0; r < N; ++r)
        if (best[r] >= 0) ev.clusters.push_back(close[best[r]]);
    std::sort(ev.clusters.begin(), ev.clusters.end(),
              [](const EPPair& a, const EPPair& b) { return a.quasienergy.real() < b.quasienergy.real(); });

    ev.eigenvalue_gap = ev.closest.gap;
    ev.eigenvector_overlap = ev.closest.overlap;
    ev.is_ep = ev.eigenvalue_gap < tol && ev.eigenvector_overlap > 1.0 - tol;
    return ev;
}

inline EPEvidence detect_ep(const DriveParams& p, int M, const PropagatorConfig& cfg = {}, double tol = 1e-3)
{
    SpectrumOptions opt;
    opt.condition = false;
    return ep_evidence(spectrum_at(p, M, cfg, opt), tol);
}

struct DominantStates {
    std::vector<Eigen::Index> indices;
    double max_imag = 0.0;
    bool broken = false;   // false flags an unbroken spectrum
};

inline DominantStates dominant_floquet_state(const FloquetSpectrum& s, double degeneracy_tol = 1e-6,
                                             double broken_floor = 1e-8)
{
    DominantStates d;
    const RVector im = s.quasienergies.imag();
    d.max_imag = im.maxCoeff();
    d.broken = d.max_imag > broken_floor;
    for (Eigen::Index k = 0; k < im.size(); ++k)
        if (im(k) >= d.max_imag - degeneracy_tol) d.indices.push_back(k);
    std::sort(d.indices.begin(), d.indices.end(), [&](Eigen::Index a, Eigen::Index b) { return im(a) > im(b); });
    return d;
}

// L1 distance between the normalized distributions of the two states with largest eps_i
inline double dominant_pair_separation(const FloquetSpectrum& s)
{
    require(s.has_modes() && s.size() >= 2, "separation needs at least two Floquet modes");
    const RVector im = s.quasienergies.imag();
    std::vector<Eigen::Index> idx(im.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::partial_sort(idx.begin(), idx.begin() + 2, idx.end(), [&](Eigen::Index a, Eigen::Index b) { return im(a) > im(b); });
    return l1_distance(momentum_distribution(s.modes.col(idx[0])), momentum_distribution(s.modes.col(idx[1])));
}

struct OmegaCOptions {
    double s_tol = 0.1;
    double resolution = 0.02;
    double scan_step = 0.5;
    int truncation = 64;
};

inline double separation_at(const DriveParams& p, int M, const PropagatorConfig& cfg = {})
{
    SpectrumOptions opt;
    opt.condition = false;
    return dominant_pair_separation(spectrum_at(p, M, cfg, opt));
}

inline ThresholdResult separation_threshold_omega_c(double K, double lambda, double omega_lo, double omega_hi,
                                                    const OmegaCOptions& opt = {}, const PropagatorConfig& cfg = {})
{
    require(omega_lo > 0.0, "omega range must be positive");
    auto separated = [&](double w) {
        DriveParams p{K, lambda, w};
        return separation_at(p, opt.truncation, cfg) > opt.s_tol;
    };
    return detail::first_crossing(separated, omega_lo, omega_hi, opt.scan_step, opt.resolution,
                                  "separation_threshold_omega_c");
}

}  // namespace ratchet
