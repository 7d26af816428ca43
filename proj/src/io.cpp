#include "fire/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace fire::io {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw IoError("truncated data reading u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 8 > in.size()) throw IoError("truncated data reading u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  return v;
}

float get_f32(std::span<const std::uint8_t> in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

// ---------------------------------------------------------------- PNG

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  // Everything with a destructor lives outside the setjmp region.
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  std::size_t h = 0, w = 0, c = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  h = png_get_image_height(png, info);
  w = png_get_image_width(png, info);
  c = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  rows.resize(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = pixels.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (c != 1 && c != 3) throw IoError("unsupported channel count in " + path.string());
  Image img(h, w, c);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t i = 0; i < w * c; ++i) img[r * w * c + i] = pixels[r * stride + i] / 255.0;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw IoError("PNG output needs 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  std::vector<png_byte> pixels(h * w * c);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_byte(img[i]);
  std::vector<png_bytep> rows(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = pixels.data() + r * w * c;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------- PNM

Image read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError("malformed PNM header in " + path.string());
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw IoError(path.string() + " is not a binary PGM/PPM file");
  }
  const std::size_t c = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t w = read_int();
  const std::size_t h = read_int();
  const std::size_t maxval = read_int();
  if (maxval != 255) throw IoError("only 8-bit PNM is supported: " + path.string());
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + h * w * c) throw IoError("truncated PNM raster in " + path.string());
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = bytes[pos + i] / 255.0;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) throw IoError("PNM output needs 1 or 3 channels");
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (double v : img.values()) bytes.push_back(to_byte(v));
  write_file(path, bytes);
}

// ---------------------------------------------------------------- tensors

void encode_tensor_body(std::vector<std::uint8_t>& out, const Image& img) {
  put_u32(out, 3);
  put_u64(out, img.height());
  put_u64(out, img.width());
  put_u64(out, img.channels());
  for (double v : img.values()) put_f32(out, static_cast<float>(v));
}

Image decode_tensor_body(std::span<const std::uint8_t> bytes) {
  const std::uint32_t rank = get_u32(bytes, 0);
  if (rank < 2 || rank > 3) throw IoError("tensor rank " + std::to_string(rank) + " not supported");
  std::uint64_t dims[3] = {0, 0, 1};
  for (std::uint32_t i = 0; i < rank; ++i) dims[i] = get_u64(bytes, 4 + 8 * i);
  const std::size_t offset = 4 + 8 * rank;
  const std::uint64_t count = dims[0] * dims[1] * dims[2];
  if (dims[2] == 0 || bytes.size() != offset + 4 * count) {
    throw IoError("tensor payload length does not match its dims");
  }
  Image img(dims[0], dims[1], dims[2]);
  for (std::size_t i = 0; i < count; ++i) img[i] = get_f32(bytes, offset + 4 * i);
  return img;
}

std::vector<std::uint8_t> encode_tensor(const Image& img) {
  std::vector<std::uint8_t> out{'F', 'I', 'R', 'T'};
  encode_tensor_body(out, img);
  return out;
}

Image decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FIRT", 4) != 0) {
    throw IoError("missing FIRT magic");
  }
  return decode_tensor_body(bytes.subspan(4));
}

void write_tensor(const std::filesystem::path& path, const Image& img) {
  write_file(path, encode_tensor(img));
}

Image read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

// ---------------------------------------------------------------- dispatch

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("input file not found: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  if (ext == ".firt") return read_tensor(path);
  throw IoError("unrecognised image extension: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return write_pnm(path, img);
  if (ext == ".firt") return write_tensor(path, img);
  throw IoError("unrecognised image extension: " + path.string());
}

}  // namespace fire::io
