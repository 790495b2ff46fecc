#pragma once

#include "higgsloc/analytic.hpp"
#include "higgsloc/choquard.hpp"
#include "higgsloc/config.hpp"
#include "higgsloc/core.hpp"
#include "higgsloc/diagnostics.hpp"
#include "higgsloc/evolution.hpp"
#include "higgsloc/residual.hpp"
#include "higgsloc/scenarios.hpp"
#include "higgsloc/spectral.hpp"
