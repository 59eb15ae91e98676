#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace lcft {

// git's object id for a blob: hex SHA-1 of "blob <size>\0" followed by the
// bytes, so `git hash-object <file>` prints the same value.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Record of one output directory: the settings that produced it and the
// content hash of every file, keyed by path relative to the directory.
// Carries no timestamps or absolute paths, so identical runs write identical
// manifests.
//
//   lcft-manifest 1
//   seed <n>
//   config <hash of the effective config text>
//   file <hash> <relative path>
//   ...
struct Manifest {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, std::string> files;  // relative path -> hash

  // Hashes `dir / relative` and records it.
  void add_file(const std::filesystem::path& dir, const std::string& relative);

  std::string text() const;
  static Manifest parse(std::string_view text);
  static Manifest load(const std::filesystem::path& path);  // missing file: empty manifest
  void save(const std::filesystem::path& path) const;
};

inline constexpr const char* kManifestName = "manifest.txt";

}  // namespace lcft
