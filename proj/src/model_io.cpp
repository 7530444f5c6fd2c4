#include "misc/model_io.hpp"

#include <cstring>

#include "misc/mten.hpp"

namespace misc::model {

KeyValues network_to_key_values(const NetworkConfig& net, const CouplingConfig& coupling) {
  return {
      {"base_channels", std::to_string(net.base_channels)},
      {"depth", std::to_string(net.depth)},
      {"kernel_size", std::to_string(net.kernel_size)},
      {"max_flow", format_double(net.max_flow)},
      {"align_kernel", std::to_string(net.align_kernel)},
      {"filter_kernel", std::to_string(net.filter_kernel)},
      {"use_mga", net.components.mga ? "1" : "0"},
      {"use_kernel", net.components.kernel ? "1" : "0"},
      {"use_weight", net.components.weight ? "1" : "0"},
      {"use_offset", net.components.offset ? "1" : "0"},
      {"strategy", to_string(coupling.strategy)},
      {"order", to_string(coupling.order)},
  };
}

bool apply_network_key(const std::string& key, const std::string& value, NetworkConfig& net,
                       CouplingConfig& coupling) {
  if (key == "base_channels") {
    net.base_channels = parse_int(key, value);
  } else if (key == "depth") {
    net.depth = parse_int(key, value);
  } else if (key == "kernel_size") {
    net.kernel_size = parse_int(key, value);
  } else if (key == "max_flow") {
    net.max_flow = parse_double(key, value);
  } else if (key == "align_kernel") {
    net.align_kernel = parse_int(key, value);
  } else if (key == "filter_kernel") {
    net.filter_kernel = parse_int(key, value);
  } else if (key == "use_mga") {
    net.components.mga = parse_bool(key, value);
  } else if (key == "use_kernel") {
    net.components.kernel = parse_bool(key, value);
  } else if (key == "use_weight") {
    net.components.weight = parse_bool(key, value);
  } else if (key == "use_offset") {
    net.components.offset = parse_bool(key, value);
  } else if (key == "strategy") {
    coupling.strategy = parse_strategy(value);
  } else if (key == "order") {
    coupling.order = parse_order(value);
  } else if (key == "coupling") {
    if (value.size() != 1) throw ConfigError("coupling: expected a single letter a..j, got '" + value + "'");
    coupling = CouplingConfig::from_group(value[0]);
  } else {
    return false;
  }
  return true;
}

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw IoError(std::string("truncated MMDL ") + what, static_cast<std::int64_t>(b_.size()));
  }
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelState& state) {
  const auto config = format_key_values(network_to_key_values(state.net, state.coupling));
  std::vector<std::vector<std::uint8_t>> payloads;
  for (const auto& [name, t] : state.params) payloads.push_back(encode_mten(t));

  std::size_t index_bytes = 0;
  for (const auto& [name, t] : state.params) index_bytes += 2 + name.size() + 1 + 4 * t.ndim() + 16;
  std::size_t offset = 4 + 1 + 4 + config.size() + 4 + index_bytes;

  Writer w;
  w.bytes("MMDL", 4);
  w.le<std::uint8_t>(kMmdlVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(state.params.size()));
  std::size_t i = 0;
  for (const auto& [name, t] : state.params) {
    if (name.size() > 0xffff) throw ConfigError("parameter name too long: " + name.substr(0, 32) + "...");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
    for (int d : t.shape()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.le<std::uint64_t>(offset);
    w.le<std::uint64_t>(payloads[i].size());
    offset += payloads[i].size();
    ++i;
  }
  for (const auto& p : payloads) w.bytes(p.data(), p.size());
  return std::move(w.buffer());
}

ModelState decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != "MMDL") throw IoError("bad MMDL magic", 0);
  const auto version = r.le<std::uint8_t>("version");
  if (version != kMmdlVersion) throw IoError("unsupported MMDL version " + std::to_string(version), 4);

  const auto config_len = r.le<std::uint32_t>("config length");
  const auto config_at = static_cast<std::int64_t>(r.pos());
  const auto config = r.str(config_len, "config");
  ModelState state;
  try {
    for (const auto& [k, v] : parse_key_values(config, "model config")) {
      if (!apply_network_key(k, v, state.net, state.coupling)) throw ConfigError("unknown key '" + k + "'");
    }
    state.net.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("invalid MMDL config: ") + e.what(), config_at);
  }

  const auto count = r.le<std::uint32_t>("tensor count");
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset, nbytes;
    std::int64_t index_at;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.index_at = static_cast<std::int64_t>(r.pos());
    const auto name_len = r.le<std::uint16_t>("index");
    e.name = r.str(name_len, "index");
    const auto ndim = r.le<std::uint8_t>("index");
    for (int d = 0; d < ndim; ++d) e.shape.push_back(static_cast<int>(r.le<std::uint32_t>("index")));
    e.offset = r.le<std::uint64_t>("index");
    e.nbytes = r.le<std::uint64_t>("index");
    entries.push_back(std::move(e));
  }
  const std::uint64_t payload_start = r.pos();
  for (const auto& e : entries) {
    if (e.offset < payload_start || e.offset > bytes.size() || e.nbytes > bytes.size() - e.offset) {
      throw IoError("tensor '" + e.name + "' payload [" + std::to_string(e.offset) + ", +" +
                        std::to_string(e.nbytes) + ") lies outside the file",
                    e.index_at);
    }
    std::span<const std::uint8_t> span(bytes.data() + e.offset, e.nbytes);
    std::size_t used = 0;
    auto t = decode_mten<float>(span, static_cast<std::int64_t>(e.offset), &used);
    if (used != e.nbytes) throw IoError("tensor '" + e.name + "' payload size disagrees with index", e.index_at);
    if (t.shape() != e.shape) {
      throw IoError("tensor '" + e.name + "' payload shape " + shape_str(t.shape()) + " disagrees with index " +
                        shape_str(e.shape),
                    static_cast<std::int64_t>(e.offset));
    }
    if (!state.params.emplace(e.name, std::move(t)).second) {
      throw IoError("duplicate tensor '" + e.name + "'", e.index_at);
    }
  }
  return state;
}

void save_model(const ModelState& state, const std::filesystem::path& path) {
  write_file_bytes(path, encode_model(state));
}

ModelState load_model(const std::filesystem::path& path) {
  return decode_model(read_file_bytes(path));
}

void check_model_shapes(const ModelState& state, const NetworkConfig& net, const CouplingConfig& coupling) {
  const auto expected = build_model(net, coupling, 0);
  std::string report;
  for (const auto& [name, t] : expected.params) {
    const auto it = state.params.find(name);
    if (it == state.params.end()) {
      report += "\n  missing " + name + " " + shape_str(t.shape());
    } else if (it->second.shape() != t.shape()) {
      report += "\n  " + name + ": stored " + shape_str(it->second.shape()) + ", expected " + shape_str(t.shape());
    }
  }
  for (const auto& [name, t] : state.params) {
    if (!expected.params.count(name)) report += "\n  unexpected " + name + " " + shape_str(t.shape());
  }
  if (!report.empty()) throw ConfigError("model does not match configuration:" + report);
}

ModelState load_model(const std::filesystem::path& path, const NetworkConfig& net, const CouplingConfig& coupling) {
  auto state = load_model(path);
  check_model_shapes(state, net, coupling);
  state.net = net;
  state.coupling = coupling;
  return state;
}

}  // namespace misc::model
