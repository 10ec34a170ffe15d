#include "eaf/image_io.hpp"

#include <fstream>
#include <stdexcept>

namespace eaf {

namespace {

void write_pnm(const std::string& path, const char* magic, int width,
               int height, std::size_t channels,
               const std::vector<std::uint8_t>& data) {
  if (width <= 0 || height <= 0 ||
      data.size() != static_cast<std::size_t>(width) * height * channels) {
    throw std::invalid_argument("pnm: buffer size does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pnm: cannot open " + path);
  out << magic << "\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("pnm: write failed for " + path);
}

}  // namespace

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray) {
  write_pnm(path, "P5", width, height, 1, gray);
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  write_pnm(path, "P6", width, height, 3, rgb);
}

}  // namespace eaf
