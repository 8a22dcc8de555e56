#pragma once

#include "fullerkit/config.hpp"
#include "fullerkit/continuation.hpp"
#include "fullerkit/correspondence.hpp"
#include "fullerkit/error.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/gallery.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/index.hpp"
#include "fullerkit/json_io.hpp"
#include "fullerkit/orbits.hpp"
#include "fullerkit/parallel.hpp"
#include "fullerkit/rational.hpp"
#include "fullerkit/reeb.hpp"
#include "fullerkit/scenarios.hpp"
