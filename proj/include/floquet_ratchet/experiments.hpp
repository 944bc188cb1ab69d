#pragma once

#include <cmath>

#include "floquet.hpp"
#include "observables.hpp"
#include "propagation.hpp"
#include "three_level.hpp"

namespace ratchet {

struct RunSettings {
    int truncation = 48;
    int samples_per_period = 16;
    PropagatorConfig cfg;
};

inline TimeSeries run_from_zero(const DriveParams& p, double t_max, const RunSettings& rs, bool populations = false)
{
    return evolve_with_observables(initial_state_zero_momentum(rs.truncation), p, t_max, rs.samples_per_period, rs.cfg,
                                   populations);
}

inline bool near(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

// averaging window: 40 Rabi periods at the two resonances, 200 driving periods elsewhere
inline double default_tac_window(const DriveParams& p, double rabi_periods = 40.0, double drive_periods = 200.0)
{
    for (Resonance r : {Resonance::half, Resonance::one}) {
        if (near(p.omega, resonance_omega(r))) {
            const double tr = rabi_time(r, p.K, p.lambda);
            if (std::isfinite(tr)) return std::max(rabi_periods * tr, drive_periods * p.period());
        }
    }
    return drive_periods * p.period();
}

// window shared by the numeric and analytic TAC of a resonant lambda scan
inline double resonant_tac_window(Resonance r, double K, double lambda, double rabi_periods = 40.0,
                                  double drive_periods = 200.0)
{
    const double tr = rabi_time(r, K, lambda);
    const double T = two_pi / resonance_omega(r);
    return std::isfinite(tr) ? rabi_periods * tr : drive_periods * T;
}

inline CurrentStats tac_at(const DriveParams& p, double t_max, const RunSettings& rs)
{
    return time_averaged_current(run_from_zero(p, t_max, rs), 0.0);
}

}  // namespace ratchet
