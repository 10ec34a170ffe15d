#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eaf {

/// Binary PGM (P5), 8-bit, row-major.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray);

/// Binary PPM (P6), 8-bit RGB interleaved, row-major.
void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);

}  // namespace eaf
