#include "vw/pgm.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "vw/error.hpp"

namespace vw {

std::string encode_pgm16(const Gray16Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ShapeError("pgm: pixel count does not match dimensions");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n65535\n";
  out.reserve(out.size() + image.pixels.size() * 2);
  for (const std::uint16_t px : image.pixels) {
    out.push_back(static_cast<char>(px >> 8));
    out.push_back(static_cast<char>(px & 0xff));
  }
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

int parse_positive(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size() || value <= 0) throw std::invalid_argument(what);
    return value;
  } catch (const std::exception&) {
    throw DataError(std::string("pgm: bad ") + what + " '" + token + "'");
  }
}

}  // namespace

Gray16Image decode_pgm16(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw DataError("pgm: missing P5 magic");
  Gray16Image image;
  image.width = parse_positive(next_token(bytes, pos), "width");
  image.height = parse_positive(next_token(bytes, pos), "height");
  if (parse_positive(next_token(bytes, pos), "maxval") != 65535) {
    throw DataError("pgm: only maxval 65535 is supported");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t count = static_cast<std::size_t>(image.width) * image.height;
  if (bytes.size() < pos || bytes.size() - pos != count * 2) {
    throw DataError("pgm: raster size mismatch");
  }
  image.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    image.pixels[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return image;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw StorageError("read failed: " + path.string());
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw StorageError("write failed: " + path.string());
}

void write_pgm16(const std::filesystem::path& path, const Gray16Image& image) {
  write_file(path, encode_pgm16(image));
}

Gray16Image read_pgm16(const std::filesystem::path& path) { return decode_pgm16(read_file(path)); }

}  // namespace vw
