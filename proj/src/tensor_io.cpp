// SPDX-License-Identifier: Apache-2.0
#include "hsnet/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hsnet {
namespace {

constexpr std::array<char, 4> kMagic = {'H', 'S', 'T', 'N'};
constexpr std::size_t kFixedHeader = 4 + 4 + 1 + 4;

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::span<const std::byte> in, std::size_t pos) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(std::to_integer<unsigned>(in[pos + i])) << (8 * i);
  }
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
Tensor<T> decode_payload(std::span<const std::byte> bytes, std::size_t pos, Shape dims) {
  const std::size_t n = shape_size(dims);
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<T>(get_le<Bits<T>>(bytes, pos + i * sizeof(T)));
  }
  return Tensor<T>(std::move(dims), std::move(data));
}

}  // namespace

template <typename T>
std::vector<std::byte> encode_tensor(const Tensor<T>& t) {
  if (t.empty()) throw Error(ErrorCode::kInvalidShape, "cannot encode an empty tensor");
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 8 * t.rank() + sizeof(T) * t.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, kTensorFileVersion);
  out.push_back(static_cast<std::byte>(dtype_of<T>()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims()) put_le<std::uint64_t>(out, d);
  for (T v : t.values()) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
  return out;
}

namespace {

// Validates magic, version, dtype and extents; returns the payload offset.
std::size_t parse_header(std::span<const std::byte> bytes, TensorHeader& h) {
  if (bytes.size() < kFixedHeader) throw Error(ErrorCode::kTruncatedPayload, "header truncated");
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected HSTN magic");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorFileVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const auto dtype = std::to_integer<std::uint8_t>(bytes[8]);
  if (dtype > 1) throw Error(ErrorCode::kUnsupportedDType, "dtype code " + std::to_string(dtype));
  h.dtype = static_cast<DType>(dtype);
  const auto rank = get_le<std::uint32_t>(bytes, 9);
  if (rank == 0) throw Error(ErrorCode::kInvalidShape, "rank 0 in file");
  std::size_t pos = kFixedHeader;
  if (bytes.size() < pos + 8ull * rank) throw Error(ErrorCode::kTruncatedPayload, "extents truncated");
  h.dims.assign(rank, 0);
  for (auto& d : h.dims) {
    d = get_le<std::uint64_t>(bytes, pos);
    if (d == 0) throw Error(ErrorCode::kInvalidShape, "zero extent in file");
    pos += 8;
  }
  return pos;
}

void check_payload_size(std::size_t available, const TensorHeader& h) {
  const std::size_t elem = h.dtype == DType::kFloat32 ? 4 : 8;
  const std::size_t expected = elem * shape_size(h.dims);
  if (available < expected) {
    throw Error(ErrorCode::kTruncatedPayload,
                "payload has " + std::to_string(available) + " bytes, expected " + std::to_string(expected));
  }
  if (available > expected) throw Error(ErrorCode::kInvalidShape, "trailing bytes after payload");
}

}  // namespace

AnyTensor decode_tensor(std::span<const std::byte> bytes) {
  TensorHeader h;
  const std::size_t pos = parse_header(bytes, h);
  check_payload_size(bytes.size() - pos, h);
  if (h.dtype == DType::kFloat32) return decode_payload<float>(bytes, pos, std::move(h.dims));
  return decode_payload<double>(bytes, pos, std::move(h.dims));
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> raw(kFixedHeader);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  raw.resize(static_cast<std::size_t>(in.gcount()));
  std::size_t rank = 0;
  if (raw.size() == kFixedHeader) {
    rank = get_le<std::uint32_t>(std::as_bytes(std::span<const char>(raw)), 9);
    if (rank > 64) {
      // Report a bad magic, version or dtype ahead of the rank.
      try {
        TensorHeader ignored;
        parse_header(std::as_bytes(std::span<const char>(raw)), ignored);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTruncatedPayload) throw;
      }
      throw Error(ErrorCode::kInvalidShape, "implausible rank " + std::to_string(rank));
    }
    raw.resize(kFixedHeader + 8 * rank);
    in.read(raw.data() + kFixedHeader, static_cast<std::streamsize>(8 * rank));
    raw.resize(kFixedHeader + static_cast<std::size_t>(in.gcount()));
  }
  TensorHeader h;
  const std::size_t pos = parse_header(std::as_bytes(std::span<const char>(raw)), h);
  std::error_code ec;
  const auto total = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot stat " + path.string());
  check_payload_size(static_cast<std::size_t>(total) - pos, h);
  return h;
}

template <typename T>
void write_tensor(const Tensor<T>& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

AnyTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(std::as_bytes(std::span<const char>(raw)));
}

template std::vector<std::byte> encode_tensor(const Tensor<float>&);
template std::vector<std::byte> encode_tensor(const Tensor<double>&);
template void write_tensor(const Tensor<float>&, const std::filesystem::path&);
template void write_tensor(const Tensor<double>&, const std::filesystem::path&);

}  // namespace hsnet
