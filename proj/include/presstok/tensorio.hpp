#pragma once

#include "presstok/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace presstok::io {

// ---- .prsd pressure files ----
// Header: magic "PRSD", version u16, rows u16, cols u16, frames u32,
// rate-Hz f32. Payload: row-major 32-bit floats, frame-major.
// All integers little-endian.

void write_prsd(const std::string& path, const PressureDynamics& d);
PressureDynamics read_prsd(const std::string& path);

// ---- checkpoint container ----
// A named-tensor archive shared by every checkpoint format. Layout:
//   magic (4 bytes, e.g. "PRQV"), version u16,
//   meta count u32, then per entry: key string, value string,
//   tensor count u32, then per tensor: name string, rows u32, cols u32,
//   row-major f32 data.
// Strings are u16 length + bytes. Tensors are written in sorted name
// order so identical state always produces identical bytes.

struct Checkpoint {
  std::string magic;
  uint16_t version = 1;
  std::map<std::string, std::string> meta;
  std::map<std::string, MatrixXf> tensors;

  void set_meta(const std::string& key, const std::string& value) { meta[key] = value; }
  const std::string& require_meta(const std::string& key) const;
  int64_t meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;

  const MatrixXf& require(const std::string& name) const;

  // Fingerprint of all tensor bytes, used for freeze contracts.
  uint64_t weight_hash() const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path, const std::string& expect_magic);

}  // namespace presstok::io
