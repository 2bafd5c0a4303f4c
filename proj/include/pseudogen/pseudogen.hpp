#pragma once

#include "boltzmann.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "manifest.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "quadrature.hpp"
#include "reaction.hpp"
#include "rng.hpp"
#include "sde.hpp"
#include "smooth.hpp"
#include "spectral.hpp"
#include "stats.hpp"
