#pragma once

#include <filesystem>

#include "cuneiform/imaging.hpp"

namespace cuneiform::imaging {

// Reads binary PGM (P5), binary PPM (P6) or PNG, converting colour to gray
// with the fixed luma weights.
GrayImage read_gray(const std::filesystem::path& path);

// Reads P6 PPM or PNG as RGB. Grayscale inputs are replicated to three channels.
RgbImage read_rgb(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

// Ink is written black (0) on white (255).
void write_pgm(const std::filesystem::path& path, const BinaryImage& img);
GrayImage to_gray(const BinaryImage& bin);

}  // namespace cuneiform::imaging
