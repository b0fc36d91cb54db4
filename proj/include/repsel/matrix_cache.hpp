#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "repsel/dtw.hpp"

namespace repsel {

// On-disk layout, little-endian:
//   magic "RSDMATRX" | u32 version | u64 n
//   | str dataset_id | str params_fingerprint | n x str series id
//   | n*n f64 row-major | 32-byte SHA-256 of everything before it
// where str is a u32 byte length followed by the bytes.
inline constexpr std::string_view kMatrixMagic = "RSDMATRX";
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

std::string encode_matrix(const DistanceMatrix& matrix);
/// nullopt on any structural or checksum failure.
std::optional<DistanceMatrix> decode_matrix(std::string_view bytes);

/// One file per (dataset id, params fingerprint) under a directory. Writes
/// go to a temporary file and are renamed into place, so readers only ever
/// observe complete entries. Corrupt entries are deleted and reported as
/// absent.
class MatrixCache {
 public:
  explicit MatrixCache(std::filesystem::path dir);

  void put(const DistanceMatrix& matrix);
  std::optional<DistanceMatrix> get(std::string_view dataset_id,
                                    std::string_view params_fingerprint) const;

  std::filesystem::path path_for(std::string_view dataset_id,
                                 std::string_view params_fingerprint) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::mutex& key_mutex(const std::filesystem::path& path) const;

  std::filesystem::path dir_;
  mutable std::mutex map_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

}  // namespace repsel
