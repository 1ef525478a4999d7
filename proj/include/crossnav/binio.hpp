/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossnav/sha256.hpp"

namespace crossnav {

/// Little-endian byte sink. All binary artifacts are written through this so
/// the on-disk layout does not depend on the host.
class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const void* data, size_t n) {
    const char* p = static_cast<const char*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void f32_array(const std::vector<float>& v) {
    for (float x : v) f32(x);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  const std::string& data() const { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const char* data, size_t size) : p_(data), end_(data + size) {}
  explicit ByteReader(const std::string& s) : ByteReader(s.data(), s.size()) {}

  uint8_t u8() { return static_cast<uint8_t>(*take(1)); }
  uint32_t u32() {
    const char* p = take(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(p[i]);
    return v;
  }
  uint64_t u64() {
    const char* p = take(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(p[i]);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f32_array(float* dst, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = f32();
  }
  std::string str() {
    uint32_t n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  size_t remaining() const { return static_cast<size_t>(end_ - p_); }

 private:
  const char* take(size_t n) {
    if (remaining() < n) throw std::runtime_error("truncated binary record");
    const char* p = p_;
    p_ += n;
    return p;
  }
  const char* p_;
  const char* end_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& data) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Writes an artifact plus a `<name>.manifest.json` sidecar carrying its
/// content digest.
inline void write_artifact(const std::filesystem::path& path,
                           const std::string& data) {
  write_file(path, data);
  nlohmann::json manifest{{"file", path.filename().string()},
                          {"bytes", data.size()},
                          {"sha256", Sha256::hex(data)}};
  write_file(path.string() + ".manifest.json", manifest.dump(2) + "\n");
}

/// Container format shared by checkpoints and datasets: one magic line, a
/// length-prefixed JSON header, then raw little-endian payload.
struct Container {
  std::string magic;  // e.g. "crossnav-checkpoint"
  int version = 1;
  nlohmann::json header;
  std::string payload;
};

inline std::string container_to_bytes(const Container& c) {
  ByteWriter w;
  std::string first = c.magic + " v" + std::to_string(c.version) + "\n";
  w.bytes(first.data(), first.size());
  w.str(c.header.dump());
  w.bytes(c.payload.data(), c.payload.size());
  return w.data();
}

inline Container container_from_bytes(const std::string& bytes,
                                      const std::string& expect_magic) {
  size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw std::runtime_error("bad container header");
  std::string first = bytes.substr(0, nl);
  size_t sp = first.rfind(" v");
  if (sp == std::string::npos) throw std::runtime_error("bad container magic");
  Container c;
  c.magic = first.substr(0, sp);
  c.version = std::stoi(first.substr(sp + 2));
  if (c.magic != expect_magic)
    throw std::runtime_error("expected " + expect_magic + " file, got " +
                             c.magic);
  ByteReader r(bytes.data() + nl + 1, bytes.size() - nl - 1);
  c.header = nlohmann::json::parse(r.str());
  c.payload.assign(bytes.data() + (bytes.size() - r.remaining()),
                   r.remaining());
  return c;
}

}  // namespace crossnav
