#pragma once

#include <string>
#include <vector>

#include "specx/autograd.hpp"
#include "specx/tensor.hpp"

namespace specx {

// Binary tensor bundle. Layout, all little-endian:
//   "SPXC" | u32 version=1 | u32 meta_len | meta bytes (UTF-8 config text)
//   | u32 tensor_count | per tensor:
//     u16 name_len | name | u8 dtype (0=f64, 1=f32) | u8 rank | u64 dims[rank]
//     | payload (numel * 8 or 4 bytes)
struct Checkpoint {
    std::string meta;
    std::vector<std::pair<std::string, Tensor>> tensors;  // file order
};

// dtype selects the payload width; f32 rounds through float.
void save_checkpoint(const std::string& path, const std::string& meta, const ParamList& params,
                     const std::string& dtype);

Checkpoint read_checkpoint(const std::string& path);

// Strict two-way match: every stored tensor must name a parameter of the same
// shape and every parameter must be filled.
void load_into(const Checkpoint& ckpt, const ParamList& params);

}  // namespace specx
