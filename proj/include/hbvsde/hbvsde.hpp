#pragma once

#include "hbvsde/core.hpp"
#include "hbvsde/random.hpp"
#include "hbvsde/stats.hpp"
#include "hbvsde/sde.hpp"
#include "hbvsde/hbv.hpp"
#include "hbvsde/parallel.hpp"
#include "hbvsde/stability.hpp"
#include "hbvsde/ergodicity.hpp"
#include "hbvsde/lyapunov.hpp"
#include "hbvsde/ensemble.hpp"
#include "hbvsde/martingale.hpp"
#include "hbvsde/coupling.hpp"
#include "hbvsde/convergence.hpp"
