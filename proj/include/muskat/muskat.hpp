#ifndef MUSKAT_MUSKAT_HPP
#define MUSKAT_MUSKAT_HPP

#include "muskat/errors.hpp"
#include "muskat/grid.hpp"
#include "muskat/functionals.hpp"
#include "muskat/simplex.hpp"
#include "muskat/test_functions.hpp"
#include "muskat/transport1d.hpp"
#include "muskat/jko.hpp"
#include "muskat/pde_ref.hpp"
#include "muskat/diagnostics.hpp"
#include "muskat/scenario.hpp"

#endif  // MUSKAT_MUSKAT_HPP
