#pragma once

#include "tmdcore/config.hpp"
#include "tmdcore/distance_matrix.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/gin.hpp"
#include "tmdcore/graph.hpp"
#include "tmdcore/io.hpp"
#include "tmdcore/matching.hpp"
#include "tmdcore/medoids.hpp"
#include "tmdcore/node_subsample.hpp"
#include "tmdcore/parallel.hpp"
#include "tmdcore/tmd.hpp"
#include "tmdcore/tree_norm.hpp"
