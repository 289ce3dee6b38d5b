#include "manifest.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hybstab::cli {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed for " + path);
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [path, hash] : input_hashes) inputs[path] = "fnv1a:" + hash;
  nlohmann::json tols = nlohmann::json::object();
  for (const auto& [name, value] : tolerances.entries()) tols[name] = value;
  return nlohmann::json{{"tool", "hybstab"},
                        {"version", "0.1.0"},
                        {"subcommand", subcommand},
                        {"flags", flags},
                        {"inputs", std::move(inputs)},
                        {"tolerances", std::move(tols)},
                        {"outputs", outputs},
                        {"duration_seconds", reproducible ? 0.0 : duration_seconds}};
}

}  // namespace hybstab::cli
