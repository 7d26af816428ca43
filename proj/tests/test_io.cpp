#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fire/kernel.hpp"
#include "helpers.hpp"

using namespace fire;
using fire::testing::random_image;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fire_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

class ImageRoundTrip : public ::testing::TestWithParam<std::tuple<std::string, std::size_t>> {};

TEST_P(ImageRoundTrip, WithinQuantisation) {
  const auto [ext, channels] = GetParam();
  const Image x = random_image({9, 13, channels}, 17);
  const fs::path p = temp_path("rt" + std::to_string(channels) + ext);
  io::write_image(p, x);
  const Image y = io::read_image(p);
  ASSERT_EQ(y.shape(), x.shape());
  EXPECT_LE(max_abs_diff(x, y), 0.5 / 255.0 + 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Formats, ImageRoundTrip,
                         ::testing::Values(std::make_tuple(".png", 1), std::make_tuple(".png", 3),
                                           std::make_tuple(".pgm", 1), std::make_tuple(".ppm", 3)));

TEST(Io, BundledImage) {
  const Image x = fire::testing::test_image();
  EXPECT_EQ(x.shape(), (Shape{64, 64, 1}));
  const Image c = io::read_image(FIRE_DATA_DIR "/astronaut32_rgb.png");
  EXPECT_EQ(c.shape(), (Shape{32, 32, 3}));
}

TEST(Io, TensorRoundTripIsFloatExact) {
  const Image x = random_image({5, 7, 3}, 18, -3.0, 3.0);
  const auto bytes = io::encode_tensor(x);
  ASSERT_EQ(bytes.size(), 4 + 4 + 3 * 8 + x.size() * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FIRT");
  const Image y = io::decode_tensor(bytes);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], static_cast<double>(static_cast<float>(x[i])));
  const Image z = io::decode_tensor(io::encode_tensor(y));
  EXPECT_EQ(z, y);

  const fs::path p = temp_path("t.firt");
  io::write_image(p, y);
  EXPECT_EQ(io::read_image(p), y);
}

TEST(Io, TensorLayoutIsLittleEndian) {
  std::vector<std::uint8_t> out;
  io::put_u32(out, 0x01020304u);
  io::put_u64(out, 5);
  io::put_f32(out, 1.0f);
  EXPECT_EQ(out[0], 0x04);
  EXPECT_EQ(out[3], 0x01);
  EXPECT_EQ(out[4], 5);
  EXPECT_EQ(io::get_f32(out, 12), 1.0f);
  EXPECT_EQ(out[15], 0x3f);
}

TEST(Io, MalformedInputs) {
  EXPECT_THROW(io::decode_tensor(std::vector<std::uint8_t>{'F', 'I', 'R', 'X', 0, 0, 0, 0}), io::IoError);
  auto bytes = io::encode_tensor(Image(2, 2));
  bytes.pop_back();
  EXPECT_THROW(io::decode_tensor(bytes), io::IoError);
  EXPECT_THROW(io::read_image("/nonexistent/file.png"), io::IoError);
  EXPECT_THROW(io::read_image(temp_path("x.bmp")), io::IoError);
  const fs::path bad = temp_path("bad.png");
  std::ofstream(bad) << "not a png";
  EXPECT_THROW(io::read_image(bad), io::IoError);
}

TEST(Io, KernelText) {
  const Kernel k = gaussian_kernel(0.8, 3);
  const fs::path p = temp_path("k.txt");
  write_kernel_text(p, k);
  const Kernel r = read_kernel_text(p);
  ASSERT_EQ(r.rows, 3u);
  ASSERT_EQ(r.cols, 3u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(r.taps[i], k.taps[i], 1e-15);
  std::ofstream(temp_path("ragged.txt")) << "1 2\n3\n";
  EXPECT_THROW(read_kernel_text(temp_path("ragged.txt")), Error);
}
