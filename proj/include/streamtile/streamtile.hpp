#pragma once

// Streaming manifold-tiling forecaster: two-stage online dimensionality
// reduction (sparse random projection + Procrustes-aligned streaming SVD)
// feeding an online GMM-HMM tiling with closed-form multi-step prediction.

#include "streamtile/core.hpp"
#include "streamtile/sparse_projection.hpp"
#include "streamtile/procrustes_svd.hpp"
#include "streamtile/gaussian.hpp"
#include "streamtile/adam.hpp"
#include "streamtile/snapshot.hpp"
#include "streamtile/model.hpp"
#include "streamtile/predict.hpp"
#include "streamtile/metrics.hpp"
#include "streamtile/eval.hpp"
#include "streamtile/systems.hpp"
#include "streamtile/matrix_io.hpp"
#include "streamtile/checkpoint.hpp"
#include "streamtile/publisher.hpp"
