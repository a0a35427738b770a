#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vw {

/// 16-bit grayscale raster, row-major, row 0 first.
struct Gray16Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;
};

/// Binary PGM (P5) with maxval 65535; samples are big-endian per the netpbm format.
std::string encode_pgm16(const Gray16Image& image);
Gray16Image decode_pgm16(const std::string& bytes);

void write_pgm16(const std::filesystem::path& path, const Gray16Image& image);
Gray16Image read_pgm16(const std::filesystem::path& path);

/// Whole-file helpers raising StorageError on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace vw
