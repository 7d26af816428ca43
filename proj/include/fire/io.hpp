#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fire/image.hpp"

namespace fire::io {

class IoError : public Error {
 public:
  using Error::Error;
};

/// 8-bit PNG (gray or RGB; alpha dropped). Values map to [0,1] by /255.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Binary PGM (P5) / PPM (P6), maxval 255.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

/// Dispatch on extension (.png, .pgm, .ppm, .pnm, .firt).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

/// Raw tensor dump: "FIRT", u32 rank, u64 dims[rank], f32 little-endian data.
/// Images are written with rank 3 (height, width, channels).
std::vector<std::uint8_t> encode_tensor(const Image& img);
Image decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::filesystem::path& path, const Image& img);
Image read_tensor(const std::filesystem::path& path);

/// Little-endian helpers shared with the wire protocol.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset);
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset);
float get_f32(std::span<const std::uint8_t> in, std::size_t offset);

/// Tensor body without the magic: u32 rank, u64 dims, f32 data.
void encode_tensor_body(std::vector<std::uint8_t>& out, const Image& img);
Image decode_tensor_body(std::span<const std::uint8_t> bytes);

}  // namespace fire::io
