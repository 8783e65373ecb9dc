#pragma once

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rgi/config.hpp"
#include "rgi/nn.hpp"

namespace rgi {

// Versioned parameter container: a JSON manifest (format version, config echo,
// per-entry shape/offset/crc32) followed by one little-endian float32 blob.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  json config_echo;
  struct Entry {
    Shape shape;
    std::vector<float> data;
  };
  std::vector<std::string> order;  // preserves save order
  std::map<std::string, Entry> entries;

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  void put(const std::string& name, const Shape& shape, const float* data, size_t n) {
    if (!entries.count(name)) order.push_back(name);
    entries[name] = Entry{shape, std::vector<float>(data, data + n)};
  }

  template <typename T>
  void put_params(const ParamList<T>& params) {
    for (const auto& np : params) {
      std::vector<float> v(np.tensor.values().size());
      for (size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<float>(np.tensor.values()[i]);
      if (!entries.count(np.name)) order.push_back(np.name);
      entries[np.name] = Entry{np.tensor.shape(), std::move(v)};
    }
  }

  // Copy stored values into matching parameters; missing entries throw.
  template <typename T>
  void load_params(const ParamList<T>& params, const std::string& prefix = "") const {
    for (const auto& np : params) {
      auto it = entries.find(np.name);
      if (it == entries.end() && !prefix.empty()) it = entries.find(prefix + np.name);
      if (it == entries.end())
        throw io_error("checkpoint: missing entry " + np.name);
      const auto& e = it->second;
      RGI_CHECK(e.shape == np.tensor.shape(),
                "checkpoint: shape mismatch for " + np.name + " (" +
                    shape_str(e.shape) + " vs " + shape_str(np.tensor.shape()) + ")");
      auto& dst = np.tensor.raw()->value;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.data[i]);
    }
  }

  bool identical_values(const Checkpoint& o) const {
    if (order != o.order) return false;
    for (const auto& [name, e] : entries) {
      auto it = o.entries.find(name);
      if (it == o.entries.end() || it->second.shape != e.shape) return false;
      if (std::memcmp(it->second.data.data(), e.data.data(),
                      e.data.size() * sizeof(float)) != 0)
        return false;
    }
    return true;
  }
};

namespace detail {

inline uint32_t crc32_of(const void* data, size_t n) {
  return static_cast<uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json manifest;
  manifest["format_version"] = Checkpoint::kFormatVersion;
  manifest["config"] = ckpt.config_echo;
  json jentries = json::array();
  uint64_t offset = 0;
  for (const auto& name : ckpt.order) {
    const auto& e = ckpt.entries.at(name);
    const size_t bytes = e.data.size() * sizeof(float);
    jentries.push_back({{"name", name},
                        {"shape", e.shape},
                        {"dtype", "f32"},
                        {"offset", offset},
                        {"size", e.data.size()},
                        {"crc32", detail::crc32_of(e.data.data(), bytes)}});
    offset += bytes;
  }
  manifest["entries"] = jentries;
  const std::string mtext = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open checkpoint for writing: " + path);
  const char magic[8] = {'R', 'G', 'I', 'C', 'K', 'P', 'T', '\0'};
  out.write(magic, 8);
  const uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& name : ckpt.order) {
    const auto& e = ckpt.entries.at(name);
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  }
  if (!out) throw io_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "RGICKPT\0", 8) != 0)
    throw io_error("not a checkpoint file: " + path);
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw io_error("truncated checkpoint manifest: " + path);
  json manifest;
  try {
    manifest = json::parse(mtext);
  } catch (const std::exception& e) {
    throw io_error(std::string("checkpoint manifest parse error: ") + e.what());
  }
  if (manifest.at("format_version").get<int>() != Checkpoint::kFormatVersion)
    throw io_error("unsupported checkpoint format version");

  Checkpoint ckpt;
  ckpt.config_echo = manifest.value("config", json::object());
  for (const auto& je : manifest.at("entries")) {
    const std::string name = je.at("name").get<std::string>();
    Checkpoint::Entry e;
    e.shape = je.at("shape").get<Shape>();
    const size_t count = je.at("size").get<size_t>();
    e.data.resize(count);
    in.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw io_error("truncated checkpoint blob at entry " + name);
    const uint32_t want = je.at("crc32").get<uint32_t>();
    const uint32_t got = detail::crc32_of(e.data.data(), count * sizeof(float));
    if (want != got)
      throw checksum_error("checkpoint: checksum mismatch in entry " + name);
    ckpt.order.push_back(name);
    ckpt.entries[name] = std::move(e);
  }
  return ckpt;
}

}  // namespace rgi
