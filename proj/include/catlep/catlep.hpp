#ifndef CATLEP_CATLEP_HPP
#define CATLEP_CATLEP_HPP

#include "catlep/contours.hpp"
#include "catlep/ep_locator.hpp"
#include "catlep/error.hpp"
#include "catlep/fock_engine.hpp"
#include "catlep/logical_liouvillian.hpp"
#include "catlep/numeric_spectrum.hpp"
#include "catlep/params.hpp"
#include "catlep/resultant_topology.hpp"
#include "catlep/sampling.hpp"

#endif  // CATLEP_CATLEP_HPP
