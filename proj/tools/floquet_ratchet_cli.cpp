// floquet-ratchet: command-line front end for spectra, thresholds, current scans and runs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <floquet_ratchet/floquet_ratchet.hpp>

namespace fs = std::filesystem;
using namespace ratchet;

namespace {

struct Common {
    double K = 0.1;
    double lambda = 0.0;
    double omega = 1.0;
    double phi = 0.0;
    double g = 0.0;
    int modes = 255;
    int steps = 256;
    std::string scheme = "magnus4";
    bool renormalize = false;
    int workers = 0;
    std::string out = "out";

    DriveParams params() const
    {
        DriveParams p{K, lambda, omega, phi, g};
        p.validate();
        return p;
    }
    PropagatorConfig cfg() const
    {
        PropagatorConfig c;
        c.steps_per_period = steps;
        c.scheme = parse_scheme(scheme);
        c.renormalize_each_step = renormalize;
        c.validate();
        return c;
    }
    std::string path(const std::string& name) const
    {
        fs::create_directories(out);
        return (fs::path(out) / name).string();
    }
};

void add_physics(CLI::App* sub, Common& c, bool with_lambda = true, bool with_omega = true)
{
    sub->add_option("--K", c.K, "driving strength")->capture_default_str();
    if (with_lambda) sub->add_option("--lambda", c.lambda, "non-Hermitian strength")->capture_default_str();
    if (with_omega) sub->add_option("--omega", c.omega, "driving frequency")->capture_default_str();
    sub->add_option("--phi", c.phi, "initial drive phase")->capture_default_str();
}

void add_numerics(CLI::App* sub, Common& c, int default_modes)
{
    c.modes = default_modes;
    sub->add_option("--modes", c.modes, "truncation M, ladder n in [-M, M]")->capture_default_str();
    sub->add_option("--steps", c.steps, "steps per driving period")->capture_default_str();
    sub->add_option("--scheme", c.scheme, "magnus4, magnus2, midpoint or cf4")->capture_default_str();
    sub->add_flag("--renormalize", c.renormalize, "renormalize after every step");
    sub->add_option("--workers", c.workers, "sweep workers (default: FLOQUET_RATCHET_WORKERS or all cores)");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

std::vector<double> grid(double lo, double hi, double step)
{
    require(step > 0.0 && hi >= lo, "grid needs step > 0 and max >= min");
    std::vector<double> v;
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) v.push_back(lo + k * step);
    return v;
}

void print_record_failures(const std::vector<ScanRecord>& recs)
{
    for (const auto& r : recs)
        if (!r.ok) std::cerr << "point " << r.key << " failed: " << r.error << "\n";
}

/* key = value lines; '#' starts a comment. Keys are long flag names. Values
   from the file are inserted only for flags absent from the command line. */
std::vector<std::string> merge_config(const std::vector<std::string>& args)
{
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return rest;
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path);
    std::set<std::string> given;
    for (const auto& a : rest) {
        if (a.rfind("--", 0) != 0) continue;
        given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    }
    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError(path + ":" + std::to_string(lineno) + ": empty key");
        if (given.count(key)) continue;
        if (val == "true" || val == "yes" || val == "on") {
            extra.push_back("--" + key);
        } else if (val == "false" || val == "no" || val == "off") {
            continue;
        } else {
            extra.push_back("--" + key);
            extra.push_back(val);
        }
    }
    // options go after the subcommand name, which is the first non-option argument
    auto it = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    if (it == rest.end()) throw ValidationError("a subcommand is required");
    rest.insert(it + 1, extra.begin(), extra.end());
    return rest;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Floquet spectra, PT thresholds and ratchet currents of a driven non-Hermitian rotor"};
    app.require_subcommand(1);

    // spectrum
    Common spec_c;
    double spec_degtol = 1e-6;
    auto* spectrum = app.add_subcommand("spectrum", "Floquet spectrum with state classes");
    add_physics(spectrum, spec_c);
    add_numerics(spectrum, spec_c, 255);
    spectrum->add_option("--degeneracy-tol", spec_degtol)->capture_default_str();

    // threshold
    Common thr_c;
    double thr_lo = 0.0, thr_hi = 8.0, thr_tol = 1e-6, thr_res = 1e-3, thr_scan = 0.5, thr_xi_step = 0.0;
    auto* threshold = app.add_subcommand("threshold", "PT-breaking threshold lambda_c");
    add_physics(threshold, thr_c, false);
    add_numerics(threshold, thr_c, 255);
    threshold->add_option("--lambda-min", thr_lo)->capture_default_str();
    threshold->add_option("--lambda-max", thr_hi)->capture_default_str();
    threshold->add_option("--xi-tol", thr_tol)->capture_default_str();
    threshold->add_option("--resolution", thr_res)->capture_default_str();
    threshold->add_option("--scan-step", thr_scan)->capture_default_str();
    threshold->add_option("--xi-step", thr_xi_step, "also write xi(lambda) on this grid to scan.csv");

    // threshold-map
    Common map_c;
    double map_wlo = 0.5, map_whi = 2.0, map_wstep = 0.25, map_lo = 0.0, map_hi = 8.0, map_scan = 0.5;
    auto* tmap = app.add_subcommand("threshold-map", "K * lambda_c versus omega");
    add_physics(tmap, map_c, false, false);
    add_numerics(tmap, map_c, 255);
    tmap->add_option("--omega-min", map_wlo)->capture_default_str();
    tmap->add_option("--omega-max", map_whi)->capture_default_str();
    tmap->add_option("--omega-step", map_wstep)->capture_default_str();
    tmap->add_option("--lambda-min", map_lo)->capture_default_str();
    tmap->add_option("--lambda-max", map_hi)->capture_default_str();
    tmap->add_option("--scan-step", map_scan)->capture_default_str();

    // tac-scan
    Common tac_c;
    double tac_wlo = 0.25, tac_whi = 2.0, tac_wstep = 0.05, tac_tmax = 0.0, tac_periods = 200.0;
    int tac_samples = 16;
    auto* tacscan = app.add_subcommand("tac-scan", "time-averaged current versus omega");
    add_physics(tacscan, tac_c, true, false);
    add_numerics(tacscan, tac_c, 24);
    tacscan->add_option("--omega-min", tac_wlo)->capture_default_str();
    tacscan->add_option("--omega-max", tac_whi)->capture_default_str();
    tacscan->add_option("--omega-step", tac_wstep)->capture_default_str();
    tacscan->add_option("--t-max", tac_tmax, "common averaging window (default: --periods driving periods)");
    tacscan->add_option("--periods", tac_periods)->capture_default_str();
    tacscan->add_option("--samples", tac_samples, "samples per period")->capture_default_str();

    // tac-vs-lambda
    Common tvl_c;
    double tvl_lo = 0.2, tvl_hi = 1.5, tvl_step = 0.1, tvl_rabi = 40.0;
    int tvl_samples = 16;
    auto* tacl = app.add_subcommand("tac-vs-lambda", "time-averaged current versus lambda with the analytic model");
    add_physics(tacl, tvl_c, false);
    add_numerics(tacl, tvl_c, 16);
    tacl->add_option("--lambda-min", tvl_lo)->capture_default_str();
    tacl->add_option("--lambda-max", tvl_hi)->capture_default_str();
    tacl->add_option("--lambda-step", tvl_step)->capture_default_str();
    tacl->add_option("--rabi-periods", tvl_rabi)->capture_default_str();
    tacl->add_option("--samples", tvl_samples, "samples per period")->capture_default_str();

    // evolve
    Common ev_c;
    double ev_tmax = 1000.0;
    int ev_samples = 16;
    bool ev_pops = false;
    auto* evolve = app.add_subcommand("evolve", "time evolution from |0>");
    add_physics(evolve, ev_c);
    add_numerics(evolve, ev_c, 48);
    evolve->add_option("--t-max", ev_tmax)->capture_default_str();
    evolve->add_option("--samples", ev_samples, "samples per period")->capture_default_str();
    evolve->add_flag("--populations", ev_pops, "write p_n columns");

    // ep-analyze
    Common ep_c;
    double ep_tol = 1e-3, ep_tmax = 2000.0, ep_frac = 1e-4;
    std::vector<double> ep_omegas;
    auto* ep = app.add_subcommand("ep-analyze", "exceptional-point evidence, asymptotic currents and cutoffs");
    ep_c.lambda = 1.0;
    add_physics(ep, ep_c);
    add_numerics(ep, ep_c, 255);
    ep->add_option("--tol", ep_tol)->capture_default_str();
    ep->add_option("--omega-list", ep_omegas, "also run from |0> at these omegas")->delimiter(',');
    ep->add_option("--t-max", ep_tmax)->capture_default_str();
    ep->add_option("--cutoff-frac", ep_frac)->capture_default_str();

    // omega-c
    Common wc_c;
    std::vector<double> wc_Ks;
    double wc_lo = 4.0, wc_hi = 15.0, wc_tol = 0.1, wc_res = 0.02, wc_scan = 0.5;
    auto* omc = app.add_subcommand("omega-c", "separation threshold omega_c of the dominant Floquet pair");
    wc_c.lambda = 2.0;
    omc->add_option("--K", wc_Ks, "one or more K values")->delimiter(',')->required();
    omc->add_option("--lambda", wc_c.lambda)->capture_default_str();
    add_numerics(omc, wc_c, 64);
    omc->add_option("--omega-min", wc_lo)->capture_default_str();
    omc->add_option("--omega-max", wc_hi)->capture_default_str();
    omc->add_option("--s-tol", wc_tol)->capture_default_str();
    omc->add_option("--resolution", wc_res)->capture_default_str();
    omc->add_option("--scan-step", wc_scan)->capture_default_str();

    // gpe-evolve
    Common gp_c;
    double gp_tmax = 1000.0;
    int gp_grid = 256, gp_div = 1024, gp_samples = 16;
    bool gp_pops = false;
    auto* gpe = app.add_subcommand("gpe-evolve", "split-step Gross-Pitaevskii evolution from |0>");
    add_physics(gpe, gp_c);
    gpe->add_option("--g", gp_c.g, "nonlinear strength")->capture_default_str();
    gpe->add_option("--t-max", gp_tmax)->capture_default_str();
    gpe->add_option("--grid", gp_grid, "grid points N_g")->capture_default_str();
    gpe->add_option("--dt-div", gp_div, "time steps per driving period")->capture_default_str();
    gpe->add_option("--samples", gp_samples, "samples per period")->capture_default_str();
    gpe->add_flag("--populations", gp_pops, "write p_n columns");
    gpe->add_option("--out", gp_c.out, "output directory")->capture_default_str();

    // threelevel
    double tl_K = 0.1, tl_lambda = 0.5, tl_tmax = 0.0, tl_dt = 1.0;
    std::string tl_res = "one", tl_source = "closed-form", tl_out = "out";
    auto* tl = app.add_subcommand("threelevel", "effective three-level model curves");
    tl->add_option("--K", tl_K)->capture_default_str();
    tl->add_option("--lambda", tl_lambda)->capture_default_str();
    tl->add_option("--resonance", tl_res, "one (omega = 1) or half (omega = 0.5)")->capture_default_str();
    tl->add_option("--t-max", tl_tmax, "default: one Rabi period");
    tl->add_option("--dt", tl_dt)->capture_default_str();
    tl->add_option("--source", tl_source, "closed-form or ode")->capture_default_str();
    tl->add_option("--out", tl_out, "output directory")->capture_default_str();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*spectrum) {
            const DriveParams p = spec_c.params();
            const FloquetSpectrum s = spectrum_at(p, spec_c.modes, spec_c.cfg());
            ClassifyOptions co;
            co.degeneracy_tol = spec_degtol;
            const auto cls = classify_floquet_states(s, initial_state_zero_momentum(spec_c.modes), co);
            write_spectrum_csv(spec_c.path("spectrum.csv"), s, cls);
            const EPEvidence ev = ep_evidence(s);
            std::cout << "xi = " << format_real(imag_sum_xi(s)) << "\n";
            for (const auto& c : ev.clusters)
                if (c.overlap > 1.0 - 1e-3)
                    std::cout << "coalescent pair at eps = " << format_real(c.quasienergy.real())
                              << " gap = " << format_real(c.gap) << " overlap = " << format_real(c.overlap) << "\n";
        } else if (*threshold) {
            const DriveParams p = thr_c.params();
            ThresholdOptions o;
            o.xi_tol = thr_tol;
            o.resolution = thr_res;
            o.scan_step = thr_scan;
            o.truncation = thr_c.modes;
            const PropagatorConfig cfg = thr_c.cfg();
            const ThresholdResult r = pt_threshold(p, thr_lo, thr_hi, o, cfg);
            CsvWriter w(thr_c.path("threshold.csv"), {"K", "omega", "lambda_c", "converged"});
            w.row({format_real(p.K), format_real(p.omega), format_real(r.value), "1"});
            std::cout << "lambda_c = " << format_real(r.value) << " (bracket " << format_real(r.bracket_lo) << ", "
                      << format_real(r.bracket_hi) << ")\n";
            if (thr_xi_step > 0.0) {
                std::vector<DriveParams> pts;
                for (double l : grid(thr_lo, thr_hi, thr_xi_step)) {
                    DriveParams q = p;
                    q.lambda = l;
                    pts.push_back(q);
                }
                auto recs = run_sweep(pts, ResultKind::xi,
                                      [&](const DriveParams& q, Diagnostics&) { return xi_at(q, thr_c.modes, cfg); },
                                      thr_c.workers);
                write_scan_csv(thr_c.path("scan.csv"), "lambda", recs);
                print_record_failures(recs);
            }
        } else if (*tmap) {
            const PropagatorConfig cfg = map_c.cfg();
            std::vector<DriveParams> pts;
            for (double w : grid(map_wlo, map_whi, map_wstep)) pts.push_back(DriveParams{map_c.K, 0.0, w, map_c.phi});
            ThresholdOptions o;
            o.truncation = map_c.modes;
            o.scan_step = map_scan;
            auto recs = run_sweep(pts, ResultKind::lambda_c,
                                  [&](const DriveParams& q, Diagnostics& d) {
                                      const ThresholdResult r = pt_threshold(q, map_lo, map_hi, o, cfg);
                                      d["lambda_c"] = r.value;
                                      return q.K * r.value;
                                  },
                                  map_c.workers);
            write_scan_csv(map_c.path("scan.csv"), "omega", recs);
            print_record_failures(recs);
        } else if (*tacscan) {
            RunSettings rs;
            rs.truncation = tac_c.modes;
            rs.samples_per_period = tac_samples;
            rs.cfg = tac_c.cfg();
            std::vector<DriveParams> pts;
            for (double w : grid(tac_wlo, tac_whi, tac_wstep)) pts.push_back(DriveParams{tac_c.K, tac_c.lambda, w, tac_c.phi});
            auto recs = run_sweep(pts, ResultKind::tac,
                                  [&](const DriveParams& q, Diagnostics& d) {
                                      const double tmax = tac_tmax > 0.0 ? tac_tmax : tac_periods * q.period();
                                      const TimeSeries ts = run_from_zero(q, tmax, rs);
                                      const CurrentStats st = time_averaged_current(ts, 0.0);
                                      d["converged"] = st.converged ? 1.0 : 0.0;
                                      d["half_window_delta"] = st.half_window_delta;
                                      d["boundary_max"] = ts.boundary_max;
                                      return st.tac;
                                  },
                                  tac_c.workers);
            write_scan_csv(tac_c.path("scan.csv"), "omega", recs);
            print_record_failures(recs);
        } else if (*tacl) {
            const Resonance r = near(tvl_c.omega, 1.0) ? Resonance::one : Resonance::half;
            require(near(tvl_c.omega, 1.0) || near(tvl_c.omega, 0.5), "tac-vs-lambda needs omega = 1 or 0.5");
            RunSettings rs;
            rs.truncation = tvl_c.modes;
            rs.samples_per_period = tvl_samples;
            rs.cfg = tvl_c.cfg();
            rs.cfg.renormalize_each_step = true;
            std::vector<DriveParams> pts;
            for (double l : grid(tvl_lo, tvl_hi, tvl_step)) pts.push_back(DriveParams{tvl_c.K, l, tvl_c.omega, tvl_c.phi});
            auto window = [&](const DriveParams& q) { return resonant_tac_window(r, q.K, q.lambda, tvl_rabi); };
            auto recs = run_sweep(pts, ResultKind::tac,
                                  [&](const DriveParams& q, Diagnostics& d) {
                                      const CurrentStats st = time_averaged_current(run_from_zero(q, window(q), rs), 0.0);
                                      d["converged"] = st.converged ? 1.0 : 0.0;
                                      return st.tac;
                                  },
                                  tvl_c.workers);
            write_scan_csv(tvl_c.path("scan.csv"), "lambda", recs);
            auto ana = run_sweep(pts, ResultKind::tac,
                                 [&](const DriveParams& q, Diagnostics&) {
                                     return analytic_tac(r, q.K, q.lambda, window(q));
                                 },
                                 tvl_c.workers);
            write_scan_csv(tvl_c.path("scan_analytic.csv"), "lambda", ana);
            print_record_failures(recs);
        } else if (*evolve) {
            RunSettings rs;
            rs.truncation = ev_c.modes;
            rs.samples_per_period = ev_samples;
            rs.cfg = ev_c.cfg();
            const TimeSeries ts = run_from_zero(ev_c.params(), ev_tmax, rs, ev_pops);
            write_timeseries_csv(ev_c.path("timeseries.csv"), ts, ev_pops);
            if (!ts.truncation_safe)
                std::cerr << "warning: boundary population reached " << format_real(ts.boundary_max) << "\n";
        } else if (*ep) {
            const DriveParams p = ep_c.params();
            const FloquetSpectrum s = spectrum_at(p, ep_c.modes, ep_c.cfg(), SpectrumOptions{true, false});
            const EPEvidence ev = ep_evidence(s, ep_tol);
            CsvWriter w(ep_c.path("ep_pairs.csv"), {"i", "j", "re_eps", "im_eps", "gap", "overlap"});
            for (const auto& c : ev.clusters)
                w.row({std::to_string(c.i), std::to_string(c.j), format_real(c.quasienergy.real()),
                       format_real(c.quasienergy.imag()), format_real(c.gap), format_real(c.overlap)});
            std::cout << "closest gap = " << format_real(ev.eigenvalue_gap)
                      << " overlap = " << format_real(ev.eigenvector_overlap) << " ep = " << (ev.is_ep ? 1 : 0) << "\n";
            if (!ep_omegas.empty()) {
                RunSettings rs;
                rs.truncation = ep_c.modes;
                rs.cfg = ep_c.cfg();
                rs.cfg.renormalize_each_step = true;
                std::vector<DriveParams> pts;
                for (double wv : ep_omegas) pts.push_back(DriveParams{p.K, p.lambda, wv, p.phi});
                auto states = run_sweep(pts, ResultKind::asymptotic_current,
                                        [&](const DriveParams& q, Diagnostics& d) {
                                            const TimeSeries ts = run_from_zero(q, ep_tmax, rs);
                                            d["converged"] = ts.truncation_safe ? 1.0 : 0.0;
                                            return ts.current.back();
                                        },
                                        ep_c.workers);
                write_scan_csv(ep_c.path("scan.csv"), "omega", states);
                auto cut = run_sweep(pts, ResultKind::cutoff,
                                     [&](const DriveParams& q, Diagnostics& d) {
                                         const Propagated r =
                                             propagate(initial_state_zero_momentum(rs.truncation), q, 0.0, ep_tmax, rs.cfg);
                                         d["converged"] = r.truncation_safe ? 1.0 : 0.0;
                                         return static_cast<double>(momentum_cutoff(r.state, ep_frac));
                                     },
                                     ep_c.workers);
                write_scan_csv(ep_c.path("cutoff.csv"), "omega", cut);
                print_record_failures(states);
                print_record_failures(cut);
            }
        } else if (*omc) {
            OmegaCOptions o;
            o.s_tol = wc_tol;
            o.resolution = wc_res;
            o.scan_step = wc_scan;
            o.truncation = wc_c.modes;
            const PropagatorConfig cfg = wc_c.cfg();
            std::vector<DriveParams> pts;
            for (double K : wc_Ks) pts.push_back(DriveParams{K, wc_c.lambda, 1.0});
            auto recs = run_sweep(pts, ResultKind::omega_c,
                                  [&](const DriveParams& q, Diagnostics&) {
                                      return separation_threshold_omega_c(q.K, q.lambda, wc_lo, wc_hi, o, cfg).value;
                                  },
                                  wc_c.workers);
            write_scan_csv(wc_c.path("scan.csv"), "K", recs);
            print_record_failures(recs);
        } else if (*gpe) {
            const DriveParams p = gp_c.params();
            require(gp_div >= 256, "--dt-div must be >= 256");
            GpeOptions o;
            o.record_populations = gp_pops;
            const TimeSeries ts = gpe_evolve(grid_zero_momentum(gp_grid), p, gp_tmax, p.period() / gp_div, gp_samples, o);
            write_timeseries_csv(gp_c.path("timeseries.csv"), ts, gp_pops);
        } else if (*tl) {
            Resonance r;
            if (tl_res == "one")
                r = Resonance::one;
            else if (tl_res == "half")
                r = Resonance::half;
            else
                throw ValidationError("--resonance must be one or half");
            require(tl_source == "closed-form" || tl_source == "ode", "--source must be closed-form or ode");
            double tmax = tl_tmax;
            if (tmax <= 0.0) tmax = rabi_time(r, tl_K, tl_lambda);
            require(std::isfinite(tmax), "pass --t-max when the Rabi time is infinite");
            TimeSeries ts = three_level_ode_evolve(build_t_matrix(tl_K, tl_lambda, r), tmax, tl_dt, r);
            if (tl_source == "closed-form")
                for (std::size_t k = 0; k < ts.size(); ++k) ts.current[k] = analytic_current(r, tl_K, tl_lambda, ts.times[k]);
            fs::create_directories(tl_out);
            write_timeseries_csv((fs::path(tl_out) / "timeseries.csv").string(), ts, true);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
