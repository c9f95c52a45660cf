#include "cuneiform/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cuneiform/error.hpp"

namespace cuneiform::imaging {

namespace {

struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited header token, skipping '#' comments.
int pnm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  long value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1L << 30)) throw FormatError("PNM header value too large in '" + path.string() + "'");
    ++pos;
    ++digits;
  }
  if (digits == 0) throw FormatError("malformed PNM header in '" + path.string() + "'");
  return static_cast<int>(value);
}

Raster decode_pnm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("'" + path.string() + "' is not a binary PGM/PPM");
  }
  Raster r;
  r.channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  r.width = pnm_token(bytes, pos, path);
  r.height = pnm_token(bytes, pos, path);
  const int maxval = pnm_token(bytes, pos, path);
  if (r.width <= 0 || r.height <= 0) throw FormatError("PNM dimensions must be positive in '" + path.string() + "'");
  if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported: '" + path.string() + "'");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PNM header in '" + path.string() + "'");
  ++pos;
  const auto need = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height) * static_cast<std::size_t>(r.channels);
  if (bytes.size() - pos < need) throw FormatError("truncated PNM pixel data in '" + path.string() + "'");
  r.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return r;
}

Raster decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path, bool want_rgb) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  image.format = want_rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster r;
  r.width = static_cast<int>(image.width);
  r.height = static_cast<int>(image.height);
  r.channels = want_rgb ? 3 : 1;
  r.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return r;
}

bool is_png(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

void write_pnm(const std::filesystem::path& path, char kind, int w, int h, const std::uint8_t* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out << 'P' << kind << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("failed writing image '" + path.string() + "'");
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (is_png(bytes)) {
    auto r = decode_png(bytes, path, false);
    return GrayImage(r.width, r.height, std::move(r.data));
  }
  auto r = decode_pnm(bytes, path);
  if (r.channels == 1) return GrayImage(r.width, r.height, std::move(r.data));
  return to_grayscale(RgbImage(r.width, r.height, std::move(r.data)));
}

RgbImage read_rgb(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (is_png(bytes)) {
    auto r = decode_png(bytes, path, true);
    return RgbImage(r.width, r.height, std::move(r.data));
  }
  auto r = decode_pnm(bytes, path);
  if (r.channels == 3) return RgbImage(r.width, r.height, std::move(r.data));
  return to_rgb(GrayImage(r.width, r.height, std::move(r.data)));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_pnm(path, '5', img.width(), img.height(), img.pixels().data(), img.size());
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  write_pnm(path, '6', img.width, img.height, img.data.data(), img.data.size());
}

GrayImage to_gray(const BinaryImage& bin) {
  std::vector<std::uint8_t> data(bin.size());
  const auto px = bin.pixels();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = px[i] != 0 ? 0 : 255;
  return GrayImage(bin.width(), bin.height(), std::move(data));
}

void write_pgm(const std::filesystem::path& path, const BinaryImage& img) { write_pgm(path, to_gray(img)); }

}  // namespace cuneiform::imaging
