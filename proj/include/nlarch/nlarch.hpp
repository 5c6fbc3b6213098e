#pragma once

#include "nlarch/errors.hpp"
#include "nlarch/quadrature.hpp"
#include "nlarch/random.hpp"
#include "nlarch/parallel.hpp"
#include "nlarch/distributions.hpp"
#include "nlarch/model.hpp"
#include "nlarch/simulation.hpp"
#include "nlarch/stability.hpp"
#include "nlarch/optimize.hpp"
#include "nlarch/estimation.hpp"
#include "nlarch/io.hpp"
