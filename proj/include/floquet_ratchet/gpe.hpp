#pragma once

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "model.hpp"
#include "time_series.hpp"

namespace ratchet {

struct GridState {
    CVector values;   // psi(x_j), x_j = 2 pi j / N_g
    int grid_size = 0;
    double time = 0.0;

    GridState() = default;
    GridState(CVector v, double t = 0.0) : values(std::move(v)), grid_size(static_cast<int>(values.size())), time(t)
    {
        require(grid_size >= 4 && (grid_size & (grid_size - 1)) == 0, "grid size must be a power of two >= 4");
    }
};

namespace detail {

// FFT bin of momentum n on an N-point grid
inline int bin_of(int n, int N) { return n >= 0 ? n : n + N; }
inline int momentum_of_bin(int k, int N) { return k < N / 2 ? k : k - N; }

class SpectralTransform {
public:
    explicit SpectralTransform(int N) : fwd_scale_(std::sqrt(two_pi) / N), inv_scale_(1.0 / std::sqrt(two_pi))
    {
        fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    }

    // c_k = sqrt(2 pi)/N sum_j psi_j e^{-i n_k x_j}
    void to_momentum(const std::vector<cplx>& psi, std::vector<cplx>& c)
    {
        fft_.fwd(c, psi);
        for (auto& v : c) v *= fwd_scale_;
    }

    // psi_j = sum_k c_k e^{i n_k x_j} / sqrt(2 pi)
    void to_grid(const std::vector<cplx>& c, std::vector<cplx>& psi)
    {
        fft_.inv(psi, c);
        for (auto& v : psi) v *= inv_scale_;
    }

private:
    double fwd_scale_;
    double inv_scale_;
    Eigen::FFT<double> fft_;
};

}  // namespace detail

inline GridState momentum_to_grid(const MomentumState& s, int grid_size)
{
    require(grid_size >= 4 && (grid_size & (grid_size - 1)) == 0, "grid size must be a power of two >= 4");
    if (s.truncation >= grid_size / 2) throw SizeMismatch("ladder does not fit on the grid: need M < N_g/2");
    std::vector<cplx> c(grid_size, 0.0), psi(grid_size);
    for (int n = -s.truncation; n <= s.truncation; ++n) c[detail::bin_of(n, grid_size)] = s.at(n);
    detail::SpectralTransform tr(grid_size);
    tr.to_grid(c, psi);
    return GridState(Eigen::Map<CVector>(psi.data(), grid_size), s.time);
}

// ladder with M = N_g/2 - 1; the Nyquist bin is dropped
inline MomentumState grid_to_momentum(const GridState& g)
{
    if (g.values.size() != g.grid_size) throw SizeMismatch("grid values do not match grid_size");
    const int N = g.grid_size;
    std::vector<cplx> psi(g.values.data(), g.values.data() + N), c(N);
    detail::SpectralTransform tr(N);
    tr.to_momentum(psi, c);
    const int M = N / 2 - 1;
    CVector amps(2 * M + 1);
    for (int n = -M; n <= M; ++n) amps(n + M) = c[detail::bin_of(n, N)];
    return MomentumState(std::move(amps), M, g.time);
}

inline GridState grid_zero_momentum(int grid_size)
{
    return momentum_to_grid(initial_state_zero_momentum(1), grid_size);
}

struct GpeOptions {
    bool record_populations = false;
    double boundary_tolerance = default_boundary_tolerance;
};

/* Strang splitting: half kinetic step, exact pointwise step with V at the
   step midpoint and the instantaneous density, half kinetic step. */
inline TimeSeries gpe_evolve(const GridState& state0, const DriveParams& p, double t_max, double dt,
                             int samples_per_period, const GpeOptions& opt = {})
{
    p.validate();
    require(t_max > 0.0, "t_max must be > 0");
    require(dt > 0.0 && dt <= p.period() / 256.0 * (1.0 + 1e-12), "dt must satisfy 0 < dt <= T/256");
    require(samples_per_period >= 1, "samples_per_period must be >= 1");
    if (state0.values.size() != state0.grid_size) throw SizeMismatch("grid values do not match grid_size");

    DenormalGuard guard;
    const int N = state0.grid_size;
    const int M = N / 2 - 1;
    const double T = p.period();
    const long nsteps = std::max(1L, static_cast<long>(std::ceil(t_max / dt - 1e-9)));
    const long stride = std::max(1L, std::lround(T / dt / samples_per_period));

    std::vector<double> x(N), sx(N), cx(N), nk(N);
    std::vector<cplx> kin(N);
    for (int j = 0; j < N; ++j) {
        x[j] = two_pi * j / N;
        sx[j] = std::sin(x[j]);
        cx[j] = std::cos(x[j]);
        nk[j] = detail::momentum_of_bin(j, N);
        kin[j] = std::exp(cplx(0.0, -0.25 * nk[j] * nk[j] * dt));
    }

    detail::SpectralTransform tr(N);
    std::vector<cplx> psi(state0.values.data(), state0.values.data() + N), c(N);
    tr.to_momentum(psi, c);

    TimeSeries ts;
    ts.truncation = M;
    ts.period = T;
    std::vector<RVector> pops;
    double n0 = 0.0;
    for (const auto& v : c) n0 += std::norm(v);
    if (!(n0 > 0.0)) throw ZeroNorm("initial grid state has zero norm");
    double bmax = 0.0;

    auto sample = [&](double t) {
        double s = 0.0, mom = 0.0;
        for (int k = 0; k < N; ++k) {
            const double pk = std::norm(c[k]);
            s += pk;
            mom += nk[k] * pk;
        }
        if (!std::isfinite(s)) throw NonFinite("GP amplitudes became non-finite");
        if (s <= 0.0) throw ZeroNorm("GP state norm vanished");
        ts.times.push_back(t);
        ts.current.push_back(mom / s);
        ts.log_norm.push_back(std::log(s) - std::log(n0));
        double edge = 0.0;
        for (int n : {-M, -M + 1, M - 1, M, -M - 1}) edge += std::norm(c[detail::bin_of(n, N)]);
        bmax = std::max(bmax, edge / s);
        if (opt.record_populations) {
            RVector row(2 * M + 1);
            for (int n = -M; n <= M; ++n) row(n + M) = std::norm(c[detail::bin_of(n, N)]) / s;
            pops.push_back(std::move(row));
        }
    };

    const double t0 = state0.time;
    sample(t0);
    for (long k = 0; k < nsteps; ++k) {
        for (int j = 0; j < N; ++j) c[j] *= kin[j];
        tr.to_grid(c, psi);
        const double tm = t0 + (k + 0.5) * dt;
        const double drive = p.K * std::sin(p.omega * tm + p.phi);
        for (int j = 0; j < N; ++j) {
            const double vr = drive * sx[j];
            const double vi = drive * p.lambda * cx[j];
            const double rho = std::norm(psi[j]);
            const double grow = 2.0 * vi * dt;
            // int_0^dt e^{2 vi s} ds
            const double w = std::abs(grow) > 1e-12 ? std::expm1(grow) / (2.0 * vi) : dt * (1.0 + 0.5 * grow);
            const double phase = -vr * dt - p.g * rho * w;
            psi[j] *= std::exp(cplx(vi * dt, phase));
        }
        tr.to_momentum(psi, c);
        for (int j = 0; j < N; ++j) c[j] *= kin[j];
        if ((k + 1) % stride == 0 || k + 1 == nsteps) sample(t0 + (k + 1) * dt);
    }

    if (opt.record_populations) {
        RMatrix P(static_cast<Eigen::Index>(pops.size()), 2 * M + 1);
        for (std::size_t i = 0; i < pops.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = pops[i].transpose();
        ts.populations = std::move(P);
    }
    ts.boundary_max = bmax;
    ts.truncation_safe = bmax < opt.boundary_tolerance;
    return ts;
}

}  // namespace ratchet
