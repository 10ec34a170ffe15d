#pragma once

#include <map>
#include <string>

#include "eaf/tensor.hpp"

namespace eaf {

/// Versioned binary blob of named parameter tensors.
///
/// Layout (little-endian):
///   magic   "EAFCKPT1" (8 bytes)
///   u32     parameter count
///   per parameter:
///     u32   name length, name bytes
///     u32   rank, u64 extent per dimension
///     f64   values, row-major
void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor>& params);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

/// Copies loaded values into dst by name. Throws std::runtime_error naming
/// the first missing or shape-mismatched parameter.
void restore_params(std::map<std::string, Tensor>& dst,
                    const std::map<std::string, Tensor>& loaded);

}  // namespace eaf
