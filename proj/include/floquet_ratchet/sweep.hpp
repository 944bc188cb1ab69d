#pragma once

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "floquet.hpp"
#include "model.hpp"
#include "time_series.hpp"

namespace ratchet {

enum class ResultKind { tac, lambda_c, omega_c, asymptotic_current, xi, cutoff };

inline const char* kind_name(ResultKind k)
{
    switch (k) {
    case ResultKind::tac: return "tac";
    case ResultKind::lambda_c: return "lambda_c";
    case ResultKind::omega_c: return "omega_c";
    case ResultKind::asymptotic_current: return "asymptotic_current";
    case ResultKind::xi: return "xi";
    case ResultKind::cutoff: return "cutoff";
    }
    return "?";
}

using Diagnostics = std::map<std::string, double>;

struct ScanRecord {
    DriveParams params;
    std::string key;
    ResultKind result_kind = ResultKind::tac;
    double value = std::numeric_limits<double>::quiet_NaN();
    Diagnostics diagnostics;
    bool ok = false;
    std::string error;
};

// 17 significant digits, enough to round-trip any double
inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string param_key(const DriveParams& p, ResultKind k)
{
    const std::string text = format_real(p.K) + "|" + format_real(p.lambda) + "|" + format_real(p.omega) + "|" +
                             format_real(p.phi) + "|" + format_real(p.g) + "|" + kind_name(k);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

inline int default_workers()
{
    if (const char* env = std::getenv("FLOQUET_RATCHET_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        throw ValidationError("FLOQUET_RATCHET_WORKERS must be a positive integer");
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

using SweepJob = std::function<double(const DriveParams&, Diagnostics&)>;

/* One record per grid point, in grid order. Points are claimed from a shared
   counter and each result lands in its own slot, so the output does not
   depend on the worker count. Failures are recorded, not rethrown. */
inline std::vector<ScanRecord> run_sweep(const std::vector<DriveParams>& grid, ResultKind kind, const SweepJob& job,
                                         int workers = 0)
{
    require(!grid.empty(), "sweep grid is empty");
    if (workers <= 0) workers = default_workers();
    workers = std::min<int>(workers, static_cast<int>(grid.size()));
    std::vector<ScanRecord> out(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            ScanRecord& r = out[i];
            r.params = grid[i];
            r.result_kind = kind;
            r.key = param_key(grid[i], kind);
            try {
                r.value = job(grid[i], r.diagnostics);
                r.ok = std::isfinite(r.value);
                if (!r.ok) r.error = "non-finite result";
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = e.what();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path)
    {
        if (!out_) throw Error("cannot open " + path + " for writing");
        row(header);
    }

    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out_ << ',';
            out_ << cells[k];
        }
        out_ << '\n';
        if (!out_) throw Error("write failed");
    }

private:
    std::ofstream out_;
};

inline void write_timeseries_csv(const std::string& path, const TimeSeries& ts, bool with_populations = false)
{
    require(ts.consistent(), "inconsistent time series");
    std::vector<std::string> header{"t", "current", "log_norm"};
    const bool pops = with_populations && ts.populations.has_value();
    if (pops) {
        if (!ts.population_momenta.empty()) {
            for (int n : ts.population_momenta) header.push_back("p_" + std::to_string(n));
        } else {
            const int half = static_cast<int>(ts.populations->cols() - 1) / 2;
            for (int n = -half; n <= half; ++n) header.push_back("p_" + std::to_string(n));
        }
    }
    CsvWriter w(path, header);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        std::vector<std::string> cells{format_real(ts.times[k]), format_real(ts.current[k]), format_real(ts.log_norm[k])};
        if (pops)
            for (Eigen::Index c = 0; c < ts.populations->cols(); ++c)
                cells.push_back(format_real((*ts.populations)(static_cast<Eigen::Index>(k), c)));
        w.row(cells);
    }
}

inline void write_spectrum_csv(const std::string& path, const FloquetSpectrum& s, const std::vector<StateClass>& cls)
{
    require(static_cast<Eigen::Index>(cls.size()) == s.size(), "one class per Floquet state");
    CsvWriter w(path, {"index", "re_eps", "im_eps", "mean_p", "class", "overlap0"});
    for (Eigen::Index a = 0; a < s.size(); ++a)
        w.row({std::to_string(a), format_real(s.quasienergies(a).real()), format_real(s.quasienergies(a).imag()),
               format_real(cls[a].mean_momentum), tag_name(cls[a].tag), format_real(cls[a].overlap)});
}

inline double swept_value(const DriveParams& p, const std::string& name)
{
    if (name == "K") return p.K;
    if (name == "lambda") return p.lambda;
    if (name == "omega") return p.omega;
    if (name == "phi") return p.phi;
    if (name == "g") return p.g;
    throw ValidationError("unknown swept parameter: " + name);
}

inline void write_scan_csv(const std::string& path, const std::string& swept, const std::vector<ScanRecord>& recs)
{
    CsvWriter w(path, {swept, "value", "converged"});
    for (const ScanRecord& r : recs) {
        auto it = r.diagnostics.find("converged");
        const bool conv = r.ok && (it == r.diagnostics.end() || it->second != 0.0);
        w.row({format_real(swept_value(r.params, swept)), format_real(r.value), conv ? "1" : "0"});
    }
}

}  // namespace ratchet
