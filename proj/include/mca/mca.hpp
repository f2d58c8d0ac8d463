#pragma once

#include "mca/bench.hpp"
#include "mca/common.hpp"
#include "mca/diagnostics.hpp"
#include "mca/embedding.hpp"
#include "mca/kmeans.hpp"
#include "mca/knn.hpp"
#include "mca/losses.hpp"
#include "mca/matrix.hpp"
#include "mca/metrics.hpp"
#include "mca/model.hpp"
#include "mca/rng.hpp"
#include "mca/semantic_space.hpp"
#include "mca/synthetic.hpp"
#include "mca/taxonomy.hpp"
#include "mca/trainer.hpp"
