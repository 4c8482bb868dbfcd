#pragma once

#include "roitomo/error.hpp"
#include "roitomo/grid.hpp"
#include "roitomo/spectral.hpp"
#include "roitomo/phantom.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/xray.hpp"
#include "roitomo/fraclap.hpp"
#include "roitomo/polyop.hpp"
#include "roitomo/pdo.hpp"
#include "roitomo/vector_ops.hpp"
#include "roitomo/solver.hpp"
#include "roitomo/verify.hpp"
#include "roitomo/io.hpp"
#include "roitomo/config.hpp"
