#pragma once

#include <string>

#include "lattn/tensor.hpp"

namespace lattn {

// Checkpoint container: 8-byte magic "LATTNCKP", uint32 version, uint64
// manifest length, then a JSON manifest [{name, shape, dtype, frozen}] and
// the raw little-endian buffers in manifest order.
//
// Writes are always f64. Reads accept f64, and f32 buffers are widened.

void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

}  // namespace lattn
