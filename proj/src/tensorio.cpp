#include "presstok/tensorio.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace presstok {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: first k entries are the sample.
  for (int i = 0; i < k && i < n; ++i) {
    int j = i + static_cast<int>(uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(n, k));
  return idx;
}

}  // namespace presstok

namespace presstok::io {

namespace {

void put_u16(std::ostream& out, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

void put_str(std::ostream& out, const std::string& s) {
  if (s.size() > 0xffff) throw std::runtime_error("string too long for checkpoint");
  put_u16(out, static_cast<uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint16_t get_u16(std::istream& in) {
  uint8_t b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in) {
  uint32_t u = get_u32(in);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

std::string get_str(std::istream& in) {
  uint16_t n = get_u16(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void write_prsd(const std::string& path, const PressureDynamics& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pressure file: " + path);
  out.write("PRSD", 4);
  put_u16(out, 1);
  put_u16(out, static_cast<uint16_t>(d.rows));
  put_u16(out, static_cast<uint16_t>(d.cols));
  put_u32(out, static_cast<uint32_t>(d.frame_count()));
  put_f32(out, d.rate_hz);
  // Frames are stored row-major, so the buffer can be written directly.
  out.write(reinterpret_cast<const char*>(d.frames.data()),
            static_cast<std::streamsize>(sizeof(float) * d.frames.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

PressureDynamics read_prsd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read pressure file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PRSD", 4) != 0) {
    throw std::runtime_error("not a PRSD file: " + path);
  }
  uint16_t version = get_u16(in);
  if (version != 1) {
    throw std::runtime_error("unsupported PRSD version " + std::to_string(version) + ": " + path);
  }
  int rows = get_u16(in);
  int cols = get_u16(in);
  uint32_t frames = get_u32(in);
  float rate = get_f32(in);
  PressureDynamics d = make_dynamics(static_cast<int>(frames), rows, cols, rate);
  in.read(reinterpret_cast<char*>(d.frames.data()),
          static_cast<std::streamsize>(sizeof(float) * d.frames.size()));
  if (!in) throw std::runtime_error("truncated PRSD payload: " + path);
  return d;
}

const std::string& Checkpoint::require_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("checkpoint missing meta key: " + key);
  return it->second;
}

int64_t Checkpoint::meta_int(const std::string& key) const {
  return std::stoll(require_meta(key));
}

double Checkpoint::meta_double(const std::string& key) const {
  return std::stod(require_meta(key));
}

const MatrixXf& Checkpoint::require(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::runtime_error("checkpoint missing tensor: " + name);
  return it->second;
}

uint64_t Checkpoint::weight_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : tensors) {
    h = fnv1a(name.data(), name.size(), h);
    // Hash row by row so storage order does not matter.
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        float v = t(r, c);
        h = fnv1a(&v, sizeof(v), h);
      }
    }
  }
  return h;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  if (ck.magic.size() != 4) throw std::runtime_error("checkpoint magic must be 4 bytes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(ck.magic.data(), 4);
  put_u16(out, ck.version);
  put_u32(out, static_cast<uint32_t>(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_str(out, name);
    put_u32(out, static_cast<uint32_t>(t.rows()));
    put_u32(out, static_cast<uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) put_f32(out, t(r, c));
    }
  }
  if (!out) throw std::runtime_error("short write: " + path);
}

Checkpoint read_checkpoint(const std::string& path, const std::string& expect_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  Checkpoint ck;
  char magic[4];
  in.read(magic, 4);
  ck.magic.assign(magic, 4);
  if (!in || (!expect_magic.empty() && ck.magic != expect_magic)) {
    throw std::runtime_error("checkpoint magic mismatch (want " + expect_magic + "): " + path);
  }
  ck.version = get_u16(in);
  if (ck.version != 1) {
    throw std::runtime_error("unsupported checkpoint version: " + path);
  }
  uint32_t nmeta = get_u32(in);
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = get_str(in);
    ck.meta[k] = get_str(in);
  }
  uint32_t ntens = get_u32(in);
  for (uint32_t i = 0; i < ntens; ++i) {
    std::string name = get_str(in);
    uint32_t rows = get_u32(in);
    uint32_t cols = get_u32(in);
    MatrixXf t(rows, cols);
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) t(r, c) = get_f32(in);
    }
    ck.tensors[name] = std::move(t);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace presstok::io
