#pragma once

// Umbrella header for the numerical core. Serialization lives in
// iontrap/io.hpp and additionally needs nlohmann/json.

#include "iontrap/constants.hpp"
#include "iontrap/dynamics.hpp"
#include "iontrap/equilibrium.hpp"
#include "iontrap/error.hpp"
#include "iontrap/impurity.hpp"
#include "iontrap/linalg.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/optimize.hpp"
#include "iontrap/spectral.hpp"
#include "iontrap/trap.hpp"
