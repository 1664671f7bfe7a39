// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hsnet/tensor_io.hpp"
#include "test_util.hpp"

using namespace hsnet;
namespace fs = std::filesystem;

namespace {

std::vector<std::byte> bytes(std::initializer_list<int> v) {
  std::vector<std::byte> out;
  for (int b : v) out.push_back(static_cast<std::byte>(b));
  return out;
}

// (2,) float32 {1, -2}, laid out by hand.
std::vector<std::byte> golden() {
  return bytes({'H', 'S', 'T', 'N', 1, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0,
                0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0});
}

fs::path temp_file(const char* name) { return fs::temp_directory_path() / (std::string("hsnet_io_") + name); }

}  // namespace

TEST(TensorIo, EncodesGoldenLayout) {
  Tensor<float> t({2}, std::vector<float>{1.0f, -2.0f});
  EXPECT_EQ(encode_tensor(t), golden());
  const auto back = std::get<Tensor<float>>(decode_tensor(golden()));
  EXPECT_EQ(back, t);
}

TEST(TensorIo, Float64HeaderAndPayload) {
  Tensor<double> t({1, 1}, std::vector<double>{0.5});
  const auto b = encode_tensor(t);
  ASSERT_EQ(b.size(), 4u + 4 + 1 + 4 + 16 + 8);
  EXPECT_EQ(std::to_integer<int>(b[8]), 1);
  // 0.5 = 0x3FE0000000000000, little-endian.
  EXPECT_EQ(std::to_integer<int>(b[b.size() - 1]), 0x3F);
  EXPECT_EQ(std::to_integer<int>(b[b.size() - 2]), 0xE0);
}

TEST(TensorIo, BitExactRoundTripThroughFile) {
  std::mt19937_64 rng(11);
  auto f = tu::random_tensor<float>({3, 4, 5}, rng, -1e6, 1e6);
  f[0] = -0.0f;
  f[1] = std::numeric_limits<float>::infinity();
  f[2] = std::numeric_limits<float>::denorm_min();
  f[3] = std::numeric_limits<float>::quiet_NaN();
  const auto path = temp_file("f32.hstn");
  write_tensor(f, path);
  const auto g = read_tensor_as<float>(path);
  ASSERT_EQ(g.dims(), f.dims());
  EXPECT_EQ(std::memcmp(g.data(), f.data(), f.size() * sizeof(float)), 0);

  auto d = tu::random_tensor<double>({2, 2, 2, 2, 2}, rng);
  write_tensor(d, path);
  EXPECT_EQ(std::get<Tensor<double>>(read_tensor(path)), d);
  const auto h = read_tensor_header(path);
  EXPECT_EQ(h.dtype, DType::kFloat64);
  EXPECT_EQ(h.dims, (Shape{2, 2, 2, 2, 2}));
  fs::remove(path);
}

TEST(TensorIo, RejectsMalformedInput) {
  auto b = golden();
  b[0] = std::byte{'X'};
  EXPECT_CODE(decode_tensor(b), ErrorCode::kBadMagic);

  b = golden();
  b[4] = std::byte{2};
  EXPECT_CODE(decode_tensor(b), ErrorCode::kUnsupportedVersion);

  b = golden();
  b[8] = std::byte{7};
  EXPECT_CODE(decode_tensor(b), ErrorCode::kUnsupportedDType);

  b = golden();
  b.pop_back();
  EXPECT_CODE(decode_tensor(b), ErrorCode::kTruncatedPayload);

  b = golden();
  b.resize(10);
  EXPECT_CODE(decode_tensor(b), ErrorCode::kTruncatedPayload);

  b = golden();
  b.resize(16);
  EXPECT_CODE(decode_tensor(b), ErrorCode::kTruncatedPayload);

  b = golden();
  b.push_back(std::byte{0});
  EXPECT_CODE(decode_tensor(b), ErrorCode::kInvalidShape);

  b = golden();
  b[13] = std::byte{0};  // zero extent
  EXPECT_CODE(decode_tensor(b), ErrorCode::kInvalidShape);
}

TEST(TensorIo, HeaderReaderChecksFileSize) {
  const auto path = temp_file("short.hstn");
  auto b = golden();
  b.pop_back();
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  EXPECT_CODE(read_tensor_header(path), ErrorCode::kTruncatedPayload);
  b = golden();
  b[1] = std::byte{'Q'};
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  EXPECT_CODE(read_tensor_header(path), ErrorCode::kBadMagic);
  fs::remove(path);
  EXPECT_CODE(read_tensor_header(path), ErrorCode::kIo);
  EXPECT_CODE(read_tensor(path), ErrorCode::kIo);
}
