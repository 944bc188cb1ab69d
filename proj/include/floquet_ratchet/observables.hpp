#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "model.hpp"
#include "time_series.hpp"

namespace ratchet {

inline int truncation_of(const CVector& c)
{
    if (c.size() < 3 || c.size() % 2 == 0) throw SizeMismatch("ladder vectors have odd length 2M+1 >= 3");
    return static_cast<int>((c.size() - 1) / 2);
}

inline double norm_squared(const MomentumState& s) { return s.amplitudes.squaredNorm(); }

inline double mean_momentum(const CVector& mode)
{
    const int M = truncation_of(mode);
    const RVector prob = mode.cwiseAbs2();
    const double total = prob.sum();
    if (!(total > 0.0)) throw ZeroNorm("mean momentum of a zero vector");
    return momentum_grid(M).dot(prob) / total;
}

inline double current(const MomentumState& s) { return mean_momentum(s.amplitudes); }

inline RVector momentum_distribution(const CVector& mode)
{
    RVector prob = mode.cwiseAbs2();
    const double total = prob.sum();
    if (!(total > 0.0)) throw ZeroNorm("distribution of a zero vector");
    return prob / total;
}

inline int momentum_cutoff(const MomentumState& s, double frac = 1e-4)
{
    require(frac > 0.0 && frac < 1.0, "cutoff fraction must lie in (0, 1)");
    const RVector prob = s.amplitudes.cwiseAbs2();
    const double peak = prob.maxCoeff();
    if (!(peak > 0.0)) throw ZeroNorm("cutoff of a zero state");
    const int M = s.truncation;
    for (int k = 0; k <= M; ++k)
        if (prob(k) / peak >= frac) return k - M;
    return 0;
}

struct CurrentStats {
    double tac = 0.0;
    std::optional<double> asymptotic;
    bool plateau_detected = false;
    bool converged = false;
    double half_window_delta = 0.0;
    double tail_std = 0.0;
    double tail_mean = 0.0;
};

inline CurrentStats time_averaged_current(const TimeSeries& ts, double t_transient = 0.0, double min_periods = 20.0)
{
    require(ts.consistent(), "inconsistent time series");
    require(ts.size() >= 2, "time series needs at least two samples");
    const double t_end = ts.times.back();
    if (ts.period > 0.0 && t_end - t_transient < min_periods * ts.period - 1e-9)
        throw TooShort("series must span at least 20 driving periods beyond t_transient");
    if (t_end <= t_transient) throw TooShort("series ends before t_transient");

    std::size_t first = 0;
    while (first < ts.size() && ts.times[first] < t_transient) ++first;
    if (ts.size() - first < 2) throw TooShort("fewer than two samples beyond t_transient");

    auto trapezoid = [&](std::size_t a, std::size_t b) {
        double acc = 0.0;
        for (std::size_t k = a; k + 1 <= b; ++k)
            acc += 0.5 * (ts.current[k] + ts.current[k + 1]) * (ts.times[k + 1] - ts.times[k]);
        return acc;
    };

    CurrentStats out;
    const std::size_t last = ts.size() - 1;
    const double span = ts.times[last] - ts.times[first];
    out.tac = trapezoid(first, last) / span;

    const std::size_t mid = first + (last - first) / 2;
    if (mid > first && last > mid) {
        const double a = trapezoid(first, mid) / (ts.times[mid] - ts.times[first]);
        const double b = trapezoid(mid, last) / (ts.times[last] - ts.times[mid]);
        out.half_window_delta = std::abs(a - b);
        const double scale = std::max(std::abs(a), std::abs(b));
        out.converged = out.half_window_delta <= 0.02 * scale || scale < 1e-6;
    }

    const std::size_t count = ts.size() - first;
    const std::size_t tail = std::max<std::size_t>(2, count / 10);
    double mean = 0.0;
    for (std::size_t k = ts.size() - tail; k < ts.size(); ++k) mean += ts.current[k];
    mean /= static_cast<double>(tail);
    double var = 0.0;
    for (std::size_t k = ts.size() - tail; k < ts.size(); ++k) var += (ts.current[k] - mean) * (ts.current[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(tail));
    out.tail_mean = mean;
    out.tail_std = sd;
    const bool near_zero = std::abs(mean) < 1e-2;
    out.plateau_detected = near_zero ? sd < 1e-4 : sd < 0.01 * std::abs(mean);
    if (out.plateau_detected) out.asymptotic = mean;
    return out;
}

// trapezoidal mean of samples (t_k, f_k)
inline double trapezoid_mean(const std::vector<double>& t, const std::vector<double>& f)
{
    require(t.size() == f.size() && t.size() >= 2, "trapezoid_mean needs matching samples");
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) acc += 0.5 * (f[k] + f[k + 1]) * (t[k + 1] - t[k]);
    return acc / (t.back() - t.front());
}

}  // namespace ratchet
