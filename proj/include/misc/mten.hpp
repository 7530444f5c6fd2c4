#pragma once

// MTEN binary tensor container:
//   "MTEN" | u8 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim | u32 dims[ndim] | raw data
// All integers and data little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "misc/tensor.hpp"

namespace misc {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

struct MtenHeader {
  DType dtype = DType::F32;
  Shape shape;
  std::size_t header_bytes = 0;
  std::size_t payload_bytes = 0;
};

inline constexpr std::uint8_t kMtenVersion = 1;

template <typename T>
std::vector<std::uint8_t> encode_mten(const BasicTensor<T>& t);

// `base_offset` is only used to report absolute positions in IoError.
MtenHeader parse_mten_header(std::span<const std::uint8_t> bytes, std::int64_t base_offset = 0);

// Decodes one MTEN record from the front of `bytes`, converting the stored
// dtype to T when they differ.
template <typename T>
BasicTensor<T> decode_mten(std::span<const std::uint8_t> bytes, std::int64_t base_offset = 0,
                           std::size_t* consumed = nullptr);

template <typename T>
void save_mten(const std::filesystem::path& path, const BasicTensor<T>& t);
template <typename T>
BasicTensor<T> load_mten(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace misc
