#pragma once

// Convenience header pulling in the whole library.

#include "lanecast/core/csv.hpp"
#include "lanecast/core/errors.hpp"
#include "lanecast/core/labels.hpp"
#include "lanecast/core/parallel.hpp"
#include "lanecast/core/rng.hpp"
#include "lanecast/features.hpp"
#include "lanecast/highd.hpp"
#include "lanecast/models/model.hpp"
#include "lanecast/nn/adam.hpp"
#include "lanecast/nn/grad_check.hpp"
#include "lanecast/nn/graph.hpp"
#include "lanecast/nn/ops.hpp"
#include "lanecast/nn/tensor.hpp"
#include "lanecast/pipeline.hpp"
#include "lanecast/report.hpp"
#include "lanecast/segmentation.hpp"
#include "lanecast/synthetic.hpp"
#include "lanecast/train/metrics.hpp"
#include "lanecast/train/trainer.hpp"
