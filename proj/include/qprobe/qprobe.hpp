#pragma once
#include "core.hpp"
#include "grid.hpp"
#include "models.hpp"
#include "probe.hpp"
#include "rates.hpp"
#include "reconstruct.hpp"
#include "correlations.hpp"
#include "lindblad.hpp"
#include "oracle.hpp"
#include "io.hpp"
