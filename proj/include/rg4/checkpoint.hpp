#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rg4/params.hpp"
#include "rg4/tensor.hpp"

namespace rg4::core {

// Container format, little-endian throughout:
//   magic "RG4CKPT" + u8 version
//   u32 record count
//   per record: u32 name length, name bytes, u32 rank, u64 extents[rank],
//               f64 payload (row-major)
// Round-trips are bit-exact.

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params);
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Loads by name into existing parameters; throws on missing names or shape
// mismatches.
void load_into(const std::string& path, std::vector<NamedParam>& params);

// Hash of the serialized parameter bytes (names + extents + payloads), used
// as a cache key for derived artifacts.
uint64_t params_hash(const std::vector<NamedParam>& params);

}  // namespace rg4::core
