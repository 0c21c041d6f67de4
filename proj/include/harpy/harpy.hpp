#pragma once

#include "harpy/types.hpp"
#include "harpy/linalg.hpp"
#include "harpy/model.hpp"
#include "harpy/ground.hpp"
#include "harpy/controller.hpp"
#include "harpy/observer.hpp"
#include "harpy/integrator.hpp"
#include "harpy/simulator.hpp"
#include "harpy/config.hpp"
#include "harpy/evaluation.hpp"
#include "harpy/svg_plot.hpp"
#include "harpy/fixtures.hpp"
#include "harpy/verification.hpp"
