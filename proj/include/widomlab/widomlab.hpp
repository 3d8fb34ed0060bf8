#pragma once

// Everything in one include.

#include "widomlab/error.hpp"
#include "widomlab/realsets.hpp"
#include "widomlab/quadrature.hpp"
#include "widomlab/polynomial.hpp"
#include "widomlab/preimage.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/weights.hpp"
#include "widomlab/chebyshev.hpp"
#include "widomlab/orthopoly.hpp"
#include "widomlab/cantor.hpp"
#include "widomlab/harness.hpp"
