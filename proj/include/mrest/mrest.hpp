#ifndef MREST_MREST_HPP
#define MREST_MREST_HPP

#include "mrest/config.hpp"
#include "mrest/data.hpp"
#include "mrest/elweights.hpp"
#include "mrest/error.hpp"
#include "mrest/estimators.hpp"
#include "mrest/glm.hpp"
#include "mrest/gps.hpp"
#include "mrest/report.hpp"
#include "mrest/rng.hpp"
#include "mrest/sim.hpp"

#endif  // MREST_MREST_HPP
