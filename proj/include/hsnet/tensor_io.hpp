// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "hsnet/tensor.hpp"

namespace hsnet {

// HSTN layout, all fields little-endian:
//   "HSTN" | u32 version (=1) | u8 dtype (0 f32, 1 f64) | u32 rank |
//   rank x u64 extents | row-major payload
inline constexpr std::uint32_t kTensorFileVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <typename T>
std::vector<std::byte> encode_tensor(const Tensor<T>& t);

AnyTensor decode_tensor(std::span<const std::byte> bytes);

template <typename T>
void write_tensor(const Tensor<T>& t, const std::filesystem::path& path);

AnyTensor read_tensor(const std::filesystem::path& path);

struct TensorHeader {
  DType dtype = DType::kFloat32;
  Shape dims;
};

// Checks the header and the file size without loading the payload.
TensorHeader read_tensor_header(const std::filesystem::path& path);

// Reads a file of either dtype and converts to T.
template <typename T>
Tensor<T> read_tensor_as(const std::filesystem::path& path) {
  return std::visit([](const auto& t) { return t.template cast<T>(); }, read_tensor(path));
}

}  // namespace hsnet
