#pragma once

// Umbrella header for the TAPP scheduling library.

#include "tapp/allotment.hpp"
#include "tapp/ast.hpp"
#include "tapp/config.hpp"
#include "tapp/markup.hpp"
#include "tapp/metrics.hpp"
#include "tapp/parser.hpp"
#include "tapp/rng.hpp"
#include "tapp/scheduler.hpp"
#include "tapp/simulator.hpp"
#include "tapp/topology.hpp"
#include "tapp/validate.hpp"
#include "tapp/watcher.hpp"
