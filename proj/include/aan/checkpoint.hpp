#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aan/corpus.hpp"
#include "aan/model.hpp"

namespace aan::model {

// Checkpoint layout: magic "AAN1", then a 4-byte little-endian manifest
// length, the JSON manifest (format_version, config, vocab, labels, ordered
// tensor list with shapes), then the tensors' raw 64-bit little-endian
// floats concatenated in manifest order.

struct Checkpoint {
  ModelConfig config;
  AanParameters params;
  corpus::Vocabulary vocab;
  corpus::LabelSet labels;
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& out, double d) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = ckpt.config.to_json();
  manifest["vocab"] = ckpt.vocab.to_json();
  manifest["labels"] = ckpt.labels.to_json();
  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.params.named())
    tensor_list.push_back(nlohmann::json::array({name, t->shape()}));
  manifest["tensors"] = tensor_list;
  std::string manifest_str = manifest.dump();

  std::string out = "AAN1";
  detail::put_u32_le(out, static_cast<std::uint32_t>(manifest_str.size()));
  out += manifest_str;
  for (const auto& [name, t] : ckpt.params.named())
    for (std::size_t i = 0; i < t->numel(); ++i) detail::put_f64_le(out, (*t)[i]);
  return out;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write checkpoint: " + path);
  std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  check(out.good(), "short write on checkpoint: " + path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
  check(bytes.size() >= 8 && bytes.compare(0, 4, "AAN1") == 0,
        origin + ": not an AAN1 checkpoint");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t mlen = detail::get_u32_le(p + 4);
  check(bytes.size() >= 8 + static_cast<std::size_t>(mlen),
        origin + ": truncated manifest");
  nlohmann::json manifest =
      nlohmann::json::parse(bytes.substr(8, mlen), nullptr, false);
  check(!manifest.is_discarded(), origin + ": malformed manifest JSON");
  check(manifest.value("format_version", 0) == 1, origin + ": unsupported format version");

  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(manifest.at("config"));
  ckpt.vocab = corpus::Vocabulary::from_json(manifest.at("vocab"));
  ckpt.labels = corpus::LabelSet::from_json(manifest.at("labels"));
  ckpt.params.has_rnn = ckpt.config.encoder == EncoderKind::kRecurrent;

  std::size_t offset = 8 + mlen;
  auto named = ckpt.params.named();
  const auto& tensor_list = manifest.at("tensors");
  check(tensor_list.size() == named.size(), origin + ": unexpected tensor count");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = tensor_list[i];
    check(entry[0].get<std::string>() == named[i].first,
          origin + ": tensor order mismatch at " + named[i].first);
    auto shape = entry[1].get<std::vector<std::size_t>>();
    Tensor t(shape);
    check(bytes.size() >= offset + 8 * t.numel(), origin + ": truncated tensor data");
    for (std::size_t j = 0; j < t.numel(); ++j) {
      t[j] = detail::get_f64_le(p + offset);
      offset += 8;
    }
    *named[i].second = std::move(t);
  }
  check(offset == bytes.size(), origin + ": trailing bytes after tensors");
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path);
}

// FNV-1a over the serialized checkpoint; used to tag attention dumps with
// the model they came from.
inline std::uint64_t checkpoint_checksum(const Checkpoint& ckpt) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace aan::model
