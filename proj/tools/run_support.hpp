#pragma once

#include <exception>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace surfer::cli {

inline constexpr std::string_view kToolName = "surfer";
inline constexpr std::string_view kToolVersion = SURFER_VERSION;

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // unexpected failure
inline constexpr int kExitConfig = 2;
inline constexpr int kExitGeneration = 3;
inline constexpr int kExitNumeric = 4;

// Maps a library exception onto an exit code.
int exit_code_for(const std::exception& e);

// Colored when stderr is a terminal and NO_COLOR is unset.
void warn(std::string_view message);
void error(std::string_view message);
void info(std::string_view message);

// Resolves `path` against the output root. Throws ConfigError when the result
// escapes the root.
std::filesystem::path output_path(const std::filesystem::path& root, const std::filesystem::path& path);

// Throws ConfigError when an output would overwrite one of the inputs.
void check_not_input(const std::filesystem::path& output, const std::vector<std::filesystem::path>& inputs);

// Exclusive writer lock on an output root, released on destruction. A second
// holder gets ConfigError naming the lock file.
class RootLock {
 public:
  explicit RootLock(const std::filesystem::path& root);
  ~RootLock();
  RootLock(const RootLock&) = delete;
  RootLock& operator=(const RootLock&) = delete;

  static std::filesystem::path lock_file(const std::filesystem::path& root);

 private:
  std::filesystem::path path_;
};

// Tool identity, command, config snapshot and input hashes. Contains no
// timestamps, so identical runs write identical manifests.
nlohmann::ordered_json run_manifest(std::string_view command, const nlohmann::ordered_json& config,
                                    const std::vector<std::filesystem::path>& inputs,
                                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

// `<output>.run.json`
std::filesystem::path manifest_path(const std::filesystem::path& output);

}  // namespace surfer::cli
