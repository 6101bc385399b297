#pragma once

#include "reflect/errors.hpp"
#include "reflect/geometry.hpp"
#include "reflect/costbounds.hpp"
#include "reflect/grid.hpp"
#include "reflect/discretize.hpp"
#include "reflect/spectral.hpp"
#include "reflect/transfer.hpp"
#include "reflect/quadrature.hpp"
#include "reflect/control.hpp"
#include "reflect/io.hpp"
#include "reflect/experiment.hpp"
