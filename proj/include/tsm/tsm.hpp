#pragma once

#include "tsm/closed_form.hpp"
#include "tsm/experiments.hpp"
#include "tsm/io.hpp"
#include "tsm/market.hpp"
#include "tsm/solver.hpp"
#include "tsm/types.hpp"
