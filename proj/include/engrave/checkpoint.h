#pragma once

// Checkpoint container: 8-byte magic "ENGRCKPT", little-endian u64 header
// length, a JSON header (names, shapes, seed, config hash, config), then the
// tensors' float64 payloads in header order, little-endian.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "engrave/autodiff.h"

namespace engrave {

struct Checkpoint {
  nlohmann::json config;
  // Free-form run information (training settings, epoch); not hashed.
  nlohmann::json metadata = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::pair<std::string, ad::Matrix>> tensors;
};

// FNV-1a 64 over the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies values into same-named parameters. Throws BadCheckpoint when a
// name is missing or a shape differs.
void restore_parameters(const Checkpoint& ckpt, const ad::ParameterList& params);
std::vector<std::pair<std::string, ad::Matrix>> snapshot_parameters(const ad::ParameterList& params);

}  // namespace engrave
