#pragma once

#include "swapsim/config.hpp"
#include "swapsim/error.hpp"
#include "swapsim/io.hpp"
#include "swapsim/quadrature.hpp"
#include "swapsim/quantum_core.hpp"
#include "swapsim/seed.hpp"
#include "swapsim/source_model.hpp"
#include "swapsim/swap_engine.hpp"
#include "swapsim/timetag.hpp"
#include "swapsim/tomography.hpp"
