#pragma once

#include "symflow/bump.hpp"
#include "symflow/config.hpp"
#include "symflow/core.hpp"
#include "symflow/fields.hpp"
#include "symflow/flow.hpp"
#include "symflow/grid.hpp"
#include "symflow/noise.hpp"
#include "symflow/quadrature.hpp"
#include "symflow/report.hpp"
#include "symflow/rng.hpp"
#include "symflow/scenario.hpp"
#include "symflow/symint.hpp"
#include "symflow/transport.hpp"
#include "symflow/uniqueness.hpp"
