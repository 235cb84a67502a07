// Apache License, Version 2.0, refer to LICENSE.txt
//
// Umbrella header for the whole library.

#pragma once

#include "elastica/bayes.hpp"
#include "elastica/dp.hpp"
#include "elastica/error.hpp"
#include "elastica/export.hpp"
#include "elastica/ingest.hpp"
#include "elastica/parallel.hpp"
#include "elastica/procrustes.hpp"
#include "elastica/random.hpp"
#include "elastica/rotation.hpp"
#include "elastica/simulation.hpp"
#include "elastica/srvf.hpp"
#include "elastica/tempering.hpp"
#include "elastica/warp.hpp"
