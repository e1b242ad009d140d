#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segattack/tensor.hpp"

namespace segattack {

// Binary PPM (P6) / PGM (P5) readers and writers. 8-bit unless stated.

/// Quantize an H x W x 3 image with values in [0,1] to 8-bit and write P6.
void write_ppm(const std::filesystem::path& path, const Tensor& image);

/// Read P6 into an H x W x 3 tensor with values k/255.
Tensor read_ppm(const std::filesystem::path& path);

/// Write one byte per pixel (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& g);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

/// 16-bit P5 (big-endian samples, maxval 65535) for score heatmaps.
void write_pgm16(const std::filesystem::path& path,
                 const Grid<std::uint16_t>& g);

/// Binary mask as 0/255 single-channel image.
void write_mask(const std::filesystem::path& path, const BinaryMask& m);
BinaryMask read_mask(const std::filesystem::path& path);

/// FNV-1a 64-bit hash of a file's bytes; the checksum used by manifests.
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::uint64_t fnv1a64(const void* data, std::size_t n);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& s);

}  // namespace segattack
