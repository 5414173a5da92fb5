#pragma once

// Umbrella header for the library. io.hpp and experiment.hpp are separate:
// they pull in JSON and OpenSSL.

#include "whomog/error.hpp"
#include "whomog/functions.hpp"
#include "whomog/parallel.hpp"
#include "whomog/quadrature.hpp"
#include "whomog/w_measure.hpp"
#include "whomog/mesh.hpp"
#include "whomog/elliptic.hpp"
#include "whomog/interp.hpp"
#include "whomog/homogenize.hpp"
#include "whomog/exclusion.hpp"
