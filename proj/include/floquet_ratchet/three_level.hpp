#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "model.hpp"
#include "observables.hpp"
#include "time_series.hpp"

namespace ratchet {

enum class Resonance { half, one };

enum class CouplingOrder { first, second };

struct EffectiveCouplings {
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;
    cplx rabi;
    CouplingOrder order = CouplingOrder::second;
};

inline EffectiveCouplings effective_couplings(double K, double lambda, Resonance r)
{
    EffectiveCouplings c;
    const CouplingPair lam(lambda);
    if (r == Resonance::one) {
        c.order = CouplingOrder::second;
        c.gamma_plus = K * K * lam.lambda_plus * lam.lambda_plus / 8.0;
        c.gamma_minus = K * K * lam.lambda_minus * lam.lambda_minus / 8.0;
    } else {
        c.order = CouplingOrder::first;
        c.gamma_plus = K * (1.0 + lambda) / 4.0;
        c.gamma_minus = K * (1.0 - lambda) / 4.0;
    }
    c.rabi = std::sqrt(cplx(2.0 * c.gamma_minus * c.gamma_plus, 0.0));
    return c;
}

// momenta of the basis {|n_hi>, |0>, |-n_hi>} used by the effective models
inline std::array<double, 3> basis_momenta(Resonance r)
{
    const double n = r == Resonance::one ? 2.0 : 1.0;
    return {n, 0.0, -n};
}

inline Eigen::Matrix3cd build_t_matrix(double K, double lambda, Resonance r)
{
    const EffectiveCouplings c = effective_couplings(K, lambda, r);
    Eigen::Matrix3cd T = Eigen::Matrix3cd::Zero();
    if (r == Resonance::one) {
        T(0, 1) = c.gamma_minus;
        T(1, 0) = c.gamma_plus;
        T(1, 2) = c.gamma_minus;
        T(2, 1) = c.gamma_plus;
    } else {
        T(0, 1) = -c.gamma_minus;
        T(1, 0) = -c.gamma_plus;
        T(1, 2) = c.gamma_minus;
        T(2, 1) = c.gamma_plus;
    }
    return T;
}

struct ExtendedFloquetIndex {
    int n = 0;
    int m = 0;

    double epsilon0(double omega) const { return 0.5 * n * n - m * omega; }
    bool resonant(double omega, double tol = 1e-12) const { return std::abs(epsilon0(omega)) < tol; }
    bool operator==(const ExtendedFloquetIndex&) const = default;
};

inline std::array<ExtendedFloquetIndex, 3> resonant_basis(Resonance r)
{
    if (r == Resonance::one) return {{{2, 2}, {0, 0}, {-2, 2}}};
    return {{{1, 1}, {0, 0}, {-1, 1}}};
}

inline double resonance_omega(Resonance r) { return r == Resonance::one ? 1.0 : 0.5; }

// <row| V |col> in the extended space
inline double v_element(const ExtendedFloquetIndex& row, const ExtendedFloquetIndex& col, double K, double lambda)
{
    const CouplingPair lam(lambda);
    const double a = 0.25 * K * lam.lambda_minus;
    const double b = 0.25 * K * lam.lambda_plus;
    const int dn = row.n - col.n;
    const int dm = row.m - col.m;
    if (dn == 1 && dm == 1) return a;
    if (dn == 1 && dm == -1) return -a;
    if (dn == -1 && dm == 1) return b;
    if (dn == -1 && dm == -1) return -b;
    return 0.0;
}

struct PerturbativeOptions {
    int n_max = 8;
    bool second_order = true;
    // states treated exactly (excluded from the intermediate sum); row and col are always included
    std::vector<ExtendedFloquetIndex> model_space;
    double degeneracy_tol = 1e-12;
};

inline double perturbative_t_element(const ExtendedFloquetIndex& row, const ExtendedFloquetIndex& col, double K,
                                     double lambda, double omega, const PerturbativeOptions& opt = {})
{
    require(omega > 0.0, "omega must be > 0");
    double t = v_element(row, col, K, lambda);
    if (!opt.second_order) return t;
    auto in_model = [&](const ExtendedFloquetIndex& k) {
        if (k == row || k == col) return true;
        for (const auto& s : opt.model_space)
            if (s == k) return true;
        return false;
    };
    static constexpr int moves[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (const auto& mv : moves) {
        const ExtendedFloquetIndex k{col.n + mv[0], col.m + mv[1]};
        if (std::abs(k.n) > opt.n_max) continue;
        if (in_model(k)) continue;
        const double e0 = k.epsilon0(omega);
        if (std::abs(e0) < opt.degeneracy_tol)
            throw DegenerateIntermediate("intermediate state |" + std::to_string(k.n) + "," + std::to_string(k.m) +
                                         "> is resonant");
        t += v_element(row, k, K, lambda) * v_element(k, col, K, lambda) / (-e0);
    }
    return t;
}

// T matrix on the resonant basis from the perturbative builder, diagonal shifts included
inline Eigen::Matrix3cd perturbative_t_matrix(double K, double lambda, Resonance r, int n_max = 8)
{
    const auto basis = resonant_basis(r);
    PerturbativeOptions opt;
    opt.n_max = n_max;
    opt.model_space.assign(basis.begin(), basis.end());
    Eigen::Matrix3cd T;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) T(i, j) = perturbative_t_element(basis[i], basis[j], K, lambda, resonance_omega(r), opt);
    return T;
}

namespace detail {

// (z cos z / sin z)^2 / t^2 = |Omega cot(Omega t)|^2 for real Omega, series near z = 0
inline double omega_cot_sq(cplx omega, double t)
{
    const cplx z = omega * t;
    cplx zc;
    if (std::abs(z) < 1e-4) {
        const cplx z2 = z * z;
        zc = 1.0 - z2 / 3.0;   // z cot z
    } else {
        zc = z * std::cos(z) / std::sin(z);
    }
    return std::norm(zc) / (t * t);
}

// (sin z / z)^2 with the series near z = 0
inline double sinc_sq(double z)
{
    if (std::abs(z) < 1e-4) {
        const double s = 1.0 - z * z / 6.0;
        return s * s;
    }
    const double s = std::sin(z) / z;
    return s * s;
}

}  // namespace detail

inline std::array<double, 3> analytic_populations_w1(double K, double lambda, double t)
{
    require(lambda >= 0.0, "lambda must be >= 0");
    const EffectiveCouplings c = effective_couplings(K, lambda, Resonance::one);
    const double w = c.rabi.real();
    const double s2t2 = detail::sinc_sq(w * t) * t * t;   // sin^2(w t) / w^2
    const double cs = std::cos(w * t);
    return {c.gamma_minus * c.gamma_minus * s2t2, cs * cs, c.gamma_plus * c.gamma_plus * s2t2};
}

inline double analytic_current_w1(double K, double lambda, double t)
{
    if (t == 0.0) return 0.0;
    const EffectiveCouplings c = effective_couplings(K, lambda, Resonance::one);
    const double gp2 = c.gamma_plus * c.gamma_plus, gm2 = c.gamma_minus * c.gamma_minus;
    const double w = c.rabi.real();
    const double z = w * t;
    if (std::abs(z) >= 1e-4 && std::abs(std::sin(z)) < 1e-300) return 0.0;
    const double num = -2.0 * (gp2 - gm2);
    if (std::abs(z) >= 1e-4) {
        // multiplied through by sin^2 so the cot poles are harmless
        const double s2 = std::sin(z) * std::sin(z), c2 = std::cos(z) * std::cos(z);
        return num * s2 / ((gp2 + gm2) * s2 + w * w * c2);
    }
    return num / ((gp2 + gm2) + detail::omega_cot_sq(cplx(w, 0.0), t));
}

inline double analytic_current_w05(double K, double lambda, double t)
{
    require(lambda >= 0.0, "lambda must be >= 0");
    if (t == 0.0) return 0.0;
    const EffectiveCouplings c = effective_couplings(K, lambda, Resonance::half);
    const double gp2 = c.gamma_plus * c.gamma_plus, gm2 = c.gamma_minus * c.gamma_minus;
    const cplx w = c.rabi;
    const cplx z = w * t;
    const double num = -(gp2 - gm2);
    if (std::abs(z) >= 1e-4) {
        const cplx tz = std::tan(z);   // stays finite where sin and cos overflow
        if (tz == cplx(0.0)) return 0.0;
        return num / ((gp2 + gm2) + std::norm(w) / std::norm(tz));
    }
    return num / ((gp2 + gm2) + detail::omega_cot_sq(w, t));
}

inline double analytic_current(Resonance r, double K, double lambda, double t)
{
    return r == Resonance::one ? analytic_current_w1(K, lambda, t) : analytic_current_w05(K, lambda, t);
}

// pi/|Omega|: the period of the populations and of the current
inline double rabi_time(Resonance r, double K, double lambda)
{
    const double w = std::abs(effective_couplings(K, lambda, r).rabi);
    return w > 0.0 ? std::numbers::pi / w : std::numeric_limits<double>::infinity();
}

// trapezoidal mean of the closed-form current over [0, t_end]
inline double analytic_tac(Resonance r, double K, double lambda, double t_end, int samples = 20001)
{
    require(t_end > 0.0 && samples >= 2, "analytic_tac needs t_end > 0 and two samples");
    std::vector<double> t(samples), f(samples);
    for (int k = 0; k < samples; ++k) {
        t[k] = t_end * k / (samples - 1);
        f[k] = analytic_current(r, K, lambda, t[k]);
    }
    return trapezoid_mean(t, f);
}

struct EPAnalytic {
    cplx c_minus1;
    cplx c0;
    cplx c1;
    double norm_squared = 1.0;         // 1 + K^2 t^2 / 4
    double norm_squared_exact = 1.0;   // sum of |c|^2 of the amplitudes above
    double current = 0.0;              // -1 / (1 + 4 / (K^2 t^2))
};

inline EPAnalytic ep_analytic_solution(double K, double t)
{
    const double w = 0.5;
    EPAnalytic s;
    s.c_minus1 = I_unit * (0.5 * K * t) * std::exp(cplx(0.0, -0.5 * t)) - I_unit * (K * std::sin(w * t));
    s.c0 = 1.0;
    s.c1 = 0.0;
    s.norm_squared = 1.0 + K * K * t * t / 4.0;
    s.norm_squared_exact = std::norm(s.c_minus1) + 1.0;
    s.current = t == 0.0 ? 0.0 : -1.0 / (1.0 + 4.0 / (K * K * t * t));
    return s;
}

/* i da/dt = T a from a = (0, 1, 0). Populations are stored with columns
   ordered by ascending momentum, (-n, 0, n). */
inline TimeSeries three_level_ode_evolve(const Eigen::Matrix3cd& T, double t_max, double dt,
                                         Resonance r = Resonance::one)
{
    require(t_max > 0.0 && dt > 0.0, "three_level_ode_evolve needs t_max > 0 and dt > 0");
    const auto p = basis_momenta(r);
    const long steps = std::max(1L, static_cast<long>(std::ceil(t_max / dt - 1e-9)));
    const double h = t_max / steps;
    const Eigen::Matrix3cd step = (cplx(0.0, -h) * T).exp();
    Eigen::Vector3cd a(0.0, 1.0, 0.0);
    TimeSeries ts;
    ts.truncation = 1;
    RMatrix pops(steps + 1, 3);
    double log_acc = 0.0;
    for (long k = 0; k <= steps; ++k) {
        if (k > 0) {
            a = step * a;
            const double nn = a.squaredNorm();
            if (!std::isfinite(nn) || !a.allFinite()) throw NonFinite("three-level amplitudes became non-finite");
            a /= std::sqrt(nn);
            log_acc += std::log(nn);
        }
        const Eigen::Vector3d prob = a.cwiseAbs2();
        const double s = prob.sum();
        ts.times.push_back(k * h);
        ts.current.push_back((p[0] * prob(0) + p[1] * prob(1) + p[2] * prob(2)) / s);
        ts.log_norm.push_back(log_acc + std::log(s));
        pops(k, 0) = prob(2) / s;
        pops(k, 1) = prob(1) / s;
        pops(k, 2) = prob(0) / s;
    }
    ts.populations = std::move(pops);
    ts.population_momenta = {static_cast<int>(p[2]), 0, static_cast<int>(p[0])};
    return ts;
}

}  // namespace ratchet
