#include "engrave/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "engrave/error.h"

namespace engrave {
namespace {

constexpr std::string_view kMagic = "ENGRCKPT";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::kBadCheckpoint, "checkpoint: " + msg);
}

}  // namespace

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "engrave-checkpoint";
  header["version"] = 1;
  header["seed"] = ckpt.seed;
  header["config_hash"] = ckpt.config_hash;
  header["config"] = ckpt.config;
  header["metadata"] = ckpt.metadata;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.tensors) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
  }
  const std::string text = header.dump();
  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  for (const auto& [name, m] : ckpt.tensors) {
    for (double v : m.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    bad("missing magic");
  }
  const std::uint64_t len = get_u64(bytes, kMagic.size());
  const std::size_t body = kMagic.size() + 8;
  if (bytes.size() < body + len) bad("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(body, len));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("header is not JSON: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
    std::size_t at = body + len;
    for (const auto& t : header.at("tensors")) {
      ad::Matrix m(t.at("rows").get<int>(), t.at("cols").get<int>());
      if (bytes.size() < at + 8 * m.size()) bad("truncated payload");
      for (double& v : m.data) {
        v = std::bit_cast<double>(get_u64(bytes, at));
        at += 8;
      }
      ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
    if (at != bytes.size()) bad("trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed header: ") + e.what());
  }
  if (config_hash(ckpt.config) != ckpt.config_hash) {
    throw Error(ErrorCode::kChecksumMismatch, "checkpoint: config hash does not match config");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kMissingInput, "cannot write " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot read checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void restore_parameters(const Checkpoint& ckpt, const ad::ParameterList& params) {
  std::map<std::string, const ad::Matrix*> by_name;
  for (const auto& [name, m] : ckpt.tensors) by_name[name] = &m;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) bad("missing tensor " + p.name);
    ad::Value v = p.value;
    if (!it->second->same_shape(v.data())) bad("shape mismatch for " + p.name);
    v.mutable_data() = *it->second;
  }
  if (by_name.size() != params.size()) bad("unexpected extra tensors");
}

std::vector<std::pair<std::string, ad::Matrix>> snapshot_parameters(
    const ad::ParameterList& params) {
  std::vector<std::pair<std::string, ad::Matrix>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.name, p.value.data());
  return out;
}

}  // namespace engrave
