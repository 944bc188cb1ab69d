#pragma once

#include "core.hpp"
#include "model.hpp"
#include "expm.hpp"
#include "time_series.hpp"
#include "propagation.hpp"
#include "observables.hpp"
#include "floquet.hpp"
#include "three_level.hpp"
#include "gpe.hpp"
#include "experiments.hpp"
#include "sweep.hpp"
