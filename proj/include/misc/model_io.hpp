#pragma once

// MMDL model container:
//   "MMDL" | u8 version=1
//   | u32 config_len | config (key=value text)
//   | u32 count | count x { u16 name_len | name | u8 ndim | u32 dims[ndim] | u64 offset | u64 nbytes }
//   | MTEN payloads at the absolute offsets named in the index
// Entries are written in name order, so equal states give equal bytes.

#include <filesystem>
#include <vector>

#include "misc/config.hpp"
#include "misc/model.hpp"

namespace misc::model {

inline constexpr std::uint8_t kMmdlVersion = 1;

KeyValues network_to_key_values(const NetworkConfig& net, const CouplingConfig& coupling);

// Applies the keys this module owns and returns true, or returns false for
// keys it does not recognize. Throws ConfigError on bad values.
bool apply_network_key(const std::string& key, const std::string& value, NetworkConfig& net,
                       CouplingConfig& coupling);

std::vector<std::uint8_t> encode_model(const ModelState& state);
// Throws IoError with the byte offset on corrupt or truncated input.
ModelState decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const ModelState& state, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

// Throws ConfigError listing every missing, unexpected or mis-shaped tensor
// relative to a fresh build of (net, coupling).
void check_model_shapes(const ModelState& state, const NetworkConfig& net, const CouplingConfig& coupling);

// load_model followed by check_model_shapes against the given configuration.
ModelState load_model(const std::filesystem::path& path, const NetworkConfig& net, const CouplingConfig& coupling);

}  // namespace misc::model
