#include "run_support.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::cli {

namespace fs = std::filesystem;

namespace {

bool use_color() {
  const char* no_color = std::getenv("NO_COLOR");
  if (no_color != nullptr && no_color[0] != '\0') return false;
  return ::isatty(STDERR_FILENO) == 1;
}

void emit(std::string_view label, std::string_view color, std::string_view message) {
  if (use_color()) {
    std::cerr << "\x1b[" << color << "m" << label << "\x1b[0m " << message << "\n";
  } else {
    std::cerr << label << " " << message << "\n";
  }
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const GenerationError*>(&e)) return kExitGeneration;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  return kExitUsage;
}

void warn(std::string_view message) { emit("warning:", "33", message); }
void error(std::string_view message) { emit("error:", "31", message); }
void info(std::string_view message) { std::cerr << message << "\n"; }

fs::path output_path(const fs::path& root, const fs::path& path) {
  if (path.empty()) throw ConfigError("output path is empty");
  const fs::path base = fs::weakly_canonical(fs::absolute(root));
  const fs::path full = fs::weakly_canonical(path.is_absolute() ? path : base / path);
  const auto rel = full.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") {
    throw ConfigError("output " + full.string() + " lies outside the output root " + base.string());
  }
  return full;
}

void check_not_input(const fs::path& output, const std::vector<fs::path>& inputs) {
  const fs::path out = fs::weakly_canonical(fs::absolute(output));
  for (const auto& in : inputs) {
    if (fs::weakly_canonical(fs::absolute(in)) == out) {
      throw ConfigError("output " + output.string() + " would overwrite input " + in.string());
    }
  }
}

fs::path RootLock::lock_file(const fs::path& root) { return root / ".surfer.lock"; }

RootLock::RootLock(const fs::path& root) : path_(lock_file(root)) {
  fs::create_directories(root);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw ConfigError("output root is locked by another run (" + path_.string() +
                      "); remove the file if no run is active");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(fd, pid.data(), pid.size()) < 0) {
    ::close(fd);
    throw ConfigError("cannot write lock file " + path_.string());
  }
  ::close(fd);
}

RootLock::~RootLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

nlohmann::ordered_json run_manifest(std::string_view command, const nlohmann::ordered_json& config,
                                    const std::vector<fs::path>& inputs, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config"] = config;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw ConfigError("input " + p.string() + " does not exist");
    files.push_back({{"path", p.string()}, {"hash", file_hash_hex(p)}});
  }
  j["inputs"] = files;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

fs::path manifest_path(const fs::path& output) {
  fs::path p = output;
  p += ".run.json";
  return p;
}

}  // namespace surfer::cli
