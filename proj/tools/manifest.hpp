#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "hybstab/tolerances.hpp"

namespace hybstab::cli {

/// Reproducibility record written alongside every output: tool version,
/// input hashes, resolved tolerances, invocation, wall-clock duration.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> flags;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // (path, fnv1a hex)
  Tolerances tolerances;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  bool reproducible = false;  // zero out the duration

  nlohmann::json to_json() const;
};

std::string fnv1a_hex(const std::string& bytes);

/// write-temp-then-rename so readers never observe partial files
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace hybstab::cli
