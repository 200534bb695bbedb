#pragma once

#include "xnet/accounting.hpp"
#include "xnet/connectivity.hpp"
#include "xnet/error.hpp"
#include "xnet/graph.hpp"
#include "xnet/graph_io.hpp"
#include "xnet/mask.hpp"
#include "xnet/nn/checkpoint.hpp"
#include "xnet/nn/dataset.hpp"
#include "xnet/nn/layer.hpp"
#include "xnet/nn/model.hpp"
#include "xnet/nn/schedule.hpp"
#include "xnet/nn/trainer.hpp"
#include "xnet/parallel.hpp"
#include "xnet/random.hpp"
#include "xnet/report.hpp"
#include "xnet/spectral.hpp"

namespace xnet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace xnet
