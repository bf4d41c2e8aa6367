#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "surfer/tensor/params.hpp"

namespace surfer::tensor {

inline constexpr char kCheckpointMagic[8] = {'S', 'R', 'F', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   magic "SRFRCKPT" | u32 version | u32 record count
//   per record: u32 name bytes | name (UTF-8) | u32 rank | u64 dim * rank | u64 payload byte offset
//   payload: f32 values, parameters in record order
std::string encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace surfer::tensor
