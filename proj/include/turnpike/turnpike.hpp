#pragma once

#include "turnpike/duality.hpp"
#include "turnpike/eigen.hpp"
#include "turnpike/errors.hpp"
#include "turnpike/expr.hpp"
#include "turnpike/grid.hpp"
#include "turnpike/io.hpp"
#include "turnpike/model.hpp"
#include "turnpike/model_file.hpp"
#include "turnpike/pde.hpp"
#include "turnpike/quadrature.hpp"
#include "turnpike/rng.hpp"
#include "turnpike/simulate.hpp"
#include "turnpike/tridiagonal.hpp"
#include "turnpike/wellposed.hpp"
