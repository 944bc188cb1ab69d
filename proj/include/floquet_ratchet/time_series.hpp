#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "core.hpp"

namespace ratchet {

struct TimeSeries {
    std::vector<double> times;
    std::vector<double> current;
    std::vector<double> log_norm;
    // one row per sample, columns ordered n = -M..M unless population_momenta says otherwise
    std::optional<RMatrix> populations;
    std::vector<int> population_momenta;
    int truncation = 0;
    double period = 0.0;
    double boundary_max = 0.0;
    bool truncation_safe = true;

    std::size_t size() const { return times.size(); }
    bool consistent() const
    {
        const std::size_t n = times.size();
        if (current.size() != n || log_norm.size() != n) return false;
        if (populations && static_cast<std::size_t>(populations->rows()) != n) return false;
        if (populations && !population_momenta.empty() &&
            static_cast<Eigen::Index>(population_momenta.size()) != populations->cols())
            return false;
        return true;
    }
};

}  // namespace ratchet
