#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dpa {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

constexpr int kManifestSchemaVersion = 1;
std::string code_version();

// Files of one run directory; paths stored relative to the root.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path root) : root_(std::move(root)) {}

  void set_scenario(std::string name, std::string config_hash, unsigned long long seed);
  // Hashing is skipped for files marked non-deterministic (timing).
  void add(const std::string& relative, const std::string& schema, bool deterministic = true);
  void write(const std::string& name = "manifest.json") const;

  const std::filesystem::path& root() const { return root_; }
  std::vector<std::string> files() const;

 private:
  struct Entry {
    std::string path, schema;
    bool deterministic;
  };
  std::filesystem::path root_;
  std::string scenario_, config_hash_;
  unsigned long long seed_ = 0;
  std::vector<Entry> entries_;
};

}  // namespace dpa
