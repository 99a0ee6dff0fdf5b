#pragma once

#include "dermflow/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace dermflow::imaging {

enum class ImageFormat { Png, Jpeg, Unknown };

/// Sniff the container format from magic bytes.
ImageFormat detect_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decode an 8-bit PNG or JPEG into RGB. Alpha is dropped, grayscale is expanded,
/// 16-bit PNG is stripped to 8 bits. Throws UnsupportedFormat for anything else.
RasterImage decode_image(std::span<const std::uint8_t> bytes);

RasterImage load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RasterImage& image);

void save_png(const RasterImage& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace dermflow::imaging
