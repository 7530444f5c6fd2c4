#include "misc/mten.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace misc {

static_assert(std::endian::native == std::endian::little, "MTEN payloads are written as host memory");

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_mten(const BasicTensor<T>& t) {
  if (t.ndim() > 255) throw ConfigError("MTEN supports at most 255 dimensions");
  std::vector<std::uint8_t> out = {'M', 'T', 'E', 'N', kMtenVersion,
                                   static_cast<std::uint8_t>(dtype_of<T>()),
                                   static_cast<std::uint8_t>(t.ndim())};
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const std::size_t head = out.size();
  out.resize(head + t.size() * sizeof(T));
  if (t.size() > 0) std::memcpy(out.data() + head, t.data().data(), t.size() * sizeof(T));
  return out;
}

MtenHeader parse_mten_header(std::span<const std::uint8_t> bytes, std::int64_t base_offset) {
  if (bytes.size() < 7) throw IoError("truncated MTEN header", base_offset + static_cast<std::int64_t>(bytes.size()));
  if (std::memcmp(bytes.data(), "MTEN", 4) != 0) throw IoError("bad MTEN magic", base_offset);
  if (bytes[4] != kMtenVersion) {
    throw IoError("unsupported MTEN version " + std::to_string(bytes[4]), base_offset + 4);
  }
  if (bytes[5] > 1) throw IoError("unknown MTEN dtype " + std::to_string(bytes[5]), base_offset + 5);
  MtenHeader h;
  h.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndim = bytes[6];
  h.header_bytes = 7 + 4 * ndim;
  if (bytes.size() < h.header_bytes) {
    throw IoError("truncated MTEN dims", base_offset + static_cast<std::int64_t>(bytes.size()));
  }
  std::size_t numel = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = get_u32(bytes.data() + 7 + 4 * i);
    if (d > 0x7fffffffu) throw IoError("MTEN extent out of range", base_offset + 7 + 4 * static_cast<std::int64_t>(i));
    h.shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  h.payload_bytes = numel * dtype_size(h.dtype);
  if (bytes.size() < h.header_bytes + h.payload_bytes) {
    throw IoError("truncated MTEN payload: need " + std::to_string(h.header_bytes + h.payload_bytes) +
                      " bytes, have " + std::to_string(bytes.size()),
                  base_offset + static_cast<std::int64_t>(bytes.size()));
  }
  return h;
}

template <typename T>
BasicTensor<T> decode_mten(std::span<const std::uint8_t> bytes, std::int64_t base_offset, std::size_t* consumed) {
  const MtenHeader h = parse_mten_header(bytes, base_offset);
  const std::uint8_t* payload = bytes.data() + h.header_bytes;
  const std::size_t n = shape_numel(h.shape);
  std::vector<T> data(n);
  if (h.dtype == dtype_of<T>()) {
    if (n > 0) std::memcpy(data.data(), payload, n * sizeof(T));
  } else if (h.dtype == DType::F32) {
    std::vector<float> tmp(n);
    if (n > 0) std::memcpy(tmp.data(), payload, n * sizeof(float));
    std::copy(tmp.begin(), tmp.end(), data.begin());
  } else {
    std::vector<double> tmp(n);
    if (n > 0) std::memcpy(tmp.data(), payload, n * sizeof(double));
    std::transform(tmp.begin(), tmp.end(), data.begin(), [](double v) { return static_cast<T>(v); });
  }
  if (consumed) *consumed = h.header_bytes + h.payload_bytes;
  return BasicTensor<T>(h.shape, std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

template <typename T>
void save_mten(const std::filesystem::path& path, const BasicTensor<T>& t) {
  write_file_bytes(path, encode_mten(t));
}

template <typename T>
BasicTensor<T> load_mten(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_mten<T>(bytes);
}

template std::vector<std::uint8_t> encode_mten(const BasicTensor<float>&);
template std::vector<std::uint8_t> encode_mten(const BasicTensor<double>&);
template BasicTensor<float> decode_mten(std::span<const std::uint8_t>, std::int64_t, std::size_t*);
template BasicTensor<double> decode_mten(std::span<const std::uint8_t>, std::int64_t, std::size_t*);
template void save_mten(const std::filesystem::path&, const BasicTensor<float>&);
template void save_mten(const std::filesystem::path&, const BasicTensor<double>&);
template BasicTensor<float> load_mten(const std::filesystem::path&);
template BasicTensor<double> load_mten(const std::filesystem::path&);

}  // namespace misc
