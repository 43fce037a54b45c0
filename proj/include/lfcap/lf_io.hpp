#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lfcap/lightfield.hpp"

namespace lfcap {

inline constexpr std::uint32_t kLfFormatVersion = 1;

/// 8-bit raster, row-major (row, col, channel).
struct Image8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;
};

Image8 read_png(const std::filesystem::path& path);
void write_png(const Image8& image, const std::filesystem::path& path);

/// Binary "LF4D" container: magic, version, M, N, H, W, C (u32), then float32 samples.
void write_lf_binary(const LightField& lf, const std::filesystem::path& path);
LightField read_lf_binary(const std::filesystem::path& path);

/// Directory with view_{u}_{v}.png files and manifest.json (M, N, H, W, channels).
void write_lf_image_grid(const LightField& lf, const std::filesystem::path& dir);
LightField read_lf_image_grid(const std::filesystem::path& dir);

/// Dispatches on the path: directories use the image-grid format, files the binary one.
LightField read_lf(const std::filesystem::path& path);
void write_lf(const LightField& lf, const std::filesystem::path& path);

} // namespace lfcap
