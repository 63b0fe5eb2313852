#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "speccompact/error.hpp"

namespace speccompact::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string() + " for digest");

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);

  std::string hex;
  hex.reserve(2 * len);
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

RunManifest::RunManifest(std::string subcommand, std::uint64_t seed, std::string config_path)
    : subcommand_(std::move(subcommand)), seed_(seed), config_path_(std::move(config_path)) {}

ArtifactEntry RunManifest::entry(const std::string& role, const std::filesystem::path& path) {
  return {role, path, sha256_file(path), std::filesystem::file_size(path)};
}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_.push_back(entry(role, path));
}

void RunManifest::add_output(const std::string& role, const std::filesystem::path& path) {
  outputs_.push_back(entry(role, path));
}

nlohmann::json RunManifest::to_json() const {
  auto artifacts = [](const std::vector<ArtifactEntry>& list) {
    auto arr = nlohmann::json::array();
    for (const auto& a : list) {
      arr.push_back({{"role", a.role}, {"path", a.path.string()}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    }
    return arr;
  };
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [phase, s] : timings_) timings[phase] = s;
  return {{"subcommand", subcommand_},
          {"version", SPECCOMPACT_VERSION},
          {"seed", seed_},
          {"config", config_path_.empty() ? nlohmann::json(nullptr) : nlohmann::json(config_path_)},
          {"status", status_},
          {"inputs", artifacts(inputs_)},
          {"outputs", artifacts(outputs_)},
          {"timings_s", timings}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace speccompact::cli
