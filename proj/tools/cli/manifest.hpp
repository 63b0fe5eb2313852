#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace speccompact::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ArtifactEntry {
  std::string role;
  std::filesystem::path path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

class RunManifest {
 public:
  RunManifest(std::string subcommand, std::uint64_t seed, std::string config_path);

  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::string& role, const std::filesystem::path& path);
  void add_timing(const std::string& phase, double seconds) { timings_.emplace_back(phase, seconds); }
  void set_status(std::string status) { status_ = std::move(status); }

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  static ArtifactEntry entry(const std::string& role, const std::filesystem::path& path);

  std::string subcommand_;
  std::uint64_t seed_;
  std::string config_path_;
  std::string status_ = "ok";
  std::vector<ArtifactEntry> inputs_;
  std::vector<ArtifactEntry> outputs_;
  std::vector<std::pair<std::string, double>> timings_;
};

/// Times a phase and records it on the manifest when it goes out of scope.
class PhaseTimer {
 public:
  PhaseTimer(RunManifest& m, std::string phase)
      : manifest_(m), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    manifest_.add_timing(phase_, dt.count());
  }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  RunManifest& manifest_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace speccompact::cli
