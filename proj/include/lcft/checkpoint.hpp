#pragma once

#include <filesystem>
#include <iosfwd>

#include "lcft/models.hpp"

namespace lcft {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, all integers and floats little-endian:
//
//   magic      8 bytes  "LCFTCKPT"
//   version    u32      kCheckpointVersion
//   kind       u32      0 = lr, 1 = widedeep, 2 = din
//   flags      u32      bit 0: user id is a model input
//   vocab      3 x u64  users, items, categories
//   embed_dim  u64
//   hidden     u32 count, then count x u64
//   arrays     u32 count, then per array (lexicographic by name):
//                u32 name length, name bytes (UTF-8),
//                u32 ndim (= 2), ndim x u64 dims,
//                rows*cols f64 values, row-major
void write_checkpoint(std::ostream& out, const ModelParams& model);
void write_checkpoint(const std::filesystem::path& path, const ModelParams& model);

// Throws DataError on a bad magic, unknown version, truncated payload, or
// arrays that disagree with the header's model configuration.
ModelParams read_checkpoint(std::istream& in);
ModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace lcft
