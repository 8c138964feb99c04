#pragma once

#include "binary_io.hpp"
#include "effgnn/graph_build.hpp"

namespace effgnn::detail {

void write_build_config(BinaryWriter& w, const GraphBuildConfig& config);
GraphBuildConfig read_build_config(BinaryReader& r);

}  // namespace effgnn::detail
