#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace surfer {

// 64-bit FNV-1a. Used for stable ids, content hashes and manifest entries.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

std::string hash_hex(std::string_view bytes);

// Hash of a file's bytes; throws ConfigError if it cannot be read.
std::string file_hash_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace surfer
