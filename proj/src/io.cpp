#include "dpa/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#ifndef DPA_VERSION
#define DPA_VERSION "unknown"
#endif

namespace dpa {

namespace {

std::string digest_hex(const unsigned char* md, unsigned len) {
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256: digest failed");
  return digest_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return digest_hex(md, len);
}

std::string code_version() { return DPA_VERSION; }

void Manifest::set_scenario(std::string name, std::string config_hash, unsigned long long seed) {
  scenario_ = std::move(name);
  config_hash_ = std::move(config_hash);
  seed_ = seed;
}

void Manifest::add(const std::string& relative, const std::string& schema, bool deterministic) {
  if (!std::filesystem::exists(root_ / relative)) throw std::runtime_error("manifest: missing file " + relative);
  entries_.push_back({relative, schema, deterministic});
}

std::vector<std::string> Manifest::files() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.path);
  return out;
}

void Manifest::write(const std::string& name) const {
  nlohmann::ordered_json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["scenario"] = scenario_;
  j["seed"] = seed_;
  j["config_hash"] = config_hash_;
  j["code_version"] = code_version();
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json f;
    f["path"] = e.path;
    f["schema"] = e.schema;
    f["deterministic"] = e.deterministic;
    if (e.deterministic) {
      f["bytes"] = std::filesystem::file_size(root_ / e.path);
      f["sha256"] = sha256_file(root_ / e.path);
    }
    files.push_back(f);
  }
  j["files"] = files;
  std::ofstream out(root_ / name);
  if (!out) throw std::runtime_error("manifest: cannot write " + (root_ / name).string());
  out << j.dump(2) << '\n';
}

}  // namespace dpa
