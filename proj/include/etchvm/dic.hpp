#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace etchvm {

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;  // row-major
};

struct Rect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

namespace detail {

// Next whitespace-separated token, skipping '#' comments to end of line.
inline std::string ppm_token(std::istream& in, const std::string& where) {
  for (;;) {
    int c = in.get();
    if (c == EOF) throw DataError(where + ": truncated header");
    if (std::isspace(c)) continue;
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    std::string tok(1, static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c) && c != '#')
      tok.push_back(static_cast<char>(c));
    if (c == '#') in.unget();
    return tok;
  }
}

inline std::size_t ppm_number(std::istream& in, const std::string& where) {
  const std::string tok = ppm_token(in, where);
  std::size_t v = 0;
  for (char ch : tok) {
    if (ch < '0' || ch > '9')
      throw DataError(where + ": expected number in header, got '" + tok + "'");
    v = v * 10 + static_cast<std::size_t>(ch - '0');
    if (v > (1u << 24)) throw DataError(where + ": header number too large");
  }
  return v;
}

}  // namespace detail

inline constexpr std::size_t kMaxImageDim = 1u << 16;

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string where = path.string();
  if (!in) throw DataError(where + ": cannot open");
  const std::string magic = detail::ppm_token(in, where);
  if (magic != "P3" && magic != "P6")
    throw DataError(where + ": bad magic '" + magic + "', expected P3 or P6");
  Image img;
  img.width = detail::ppm_number(in, where);
  img.height = detail::ppm_number(in, where);
  if (img.width == 0 || img.height == 0 || img.width > kMaxImageDim ||
      img.height > kMaxImageDim)
    throw DataError(where + ": dimensions out of range");
  const std::size_t maxval = detail::ppm_number(in, where);
  if (maxval != 255)
    throw DataError(where + ": unsupported maxval " + std::to_string(maxval) +
                    ", expected 255");
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);
  if (magic == "P3") {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::size_t v = detail::ppm_number(in, where);
        if (v > 255) throw DataError(where + ": sample value " + std::to_string(v) + " > 255");
        img.pixels[i][ch] = static_cast<std::uint8_t>(v);
      }
  } else {
    // The maxval token's terminating whitespace byte was already consumed,
    // so binary pixel data starts here.
    std::vector<char> raw(n * 3);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw DataError(where + ": truncated pixel data, expected " +
                      std::to_string(raw.size()) + " bytes");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < 3; ++ch)
        img.pixels[i][ch] = static_cast<std::uint8_t>(raw[i * 3 + ch]);
  }
  return img;
}

inline std::array<double, 3> mean_rgb(const Image& img, const Rect& rect) {
  if (rect.width == 0 || rect.height == 0)
    throw DataError("mean_rgb: empty region");
  if (rect.x0 + rect.width > img.width || rect.y0 + rect.height > img.height)
    throw DataError("mean_rgb: region [" + std::to_string(rect.x0) + "," +
                    std::to_string(rect.y0) + " " + std::to_string(rect.width) +
                    "x" + std::to_string(rect.height) + "] exceeds image " +
                    std::to_string(img.width) + "x" + std::to_string(img.height));
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (std::size_t y = rect.y0; y < rect.y0 + rect.height; ++y)
    for (std::size_t x = rect.x0; x < rect.x0 + rect.width; ++x) {
      const auto& px = img.pixels[y * img.width + x];
      for (std::size_t ch = 0; ch < 3; ++ch) sum[ch] += px[ch];
    }
  const double count = static_cast<double>(rect.width * rect.height);
  return {sum[0] / count, sum[1] / count, sum[2] / count};
}

}  // namespace etchvm
