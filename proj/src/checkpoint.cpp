// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "flowsr/common.hpp"
#include "flowsr/config.hpp"

namespace flowsr::model {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'F', 'S'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  using U = std::make_unsigned_t<T>;
  const U u = static_cast<U>(v);
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  require(in.good(), path, ": truncated checkpoint");
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

void write_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t raw;
  std::memcpy(&raw, &f, 4);
  write_le<uint32_t>(out, raw);
}

double read_f32(std::istream& in, const std::string& path) {
  const uint32_t raw = read_le<uint32_t>(in, path);
  float f;
  std::memcpy(&f, &raw, 4);
  return static_cast<double>(f);
}

void write_f64(std::ostream& out, double v) {
  uint64_t raw;
  std::memcpy(&raw, &v, 8);
  write_le<uint64_t>(out, raw);
}

double read_f64(std::istream& in, const std::string& path) {
  const uint64_t raw = read_le<uint64_t>(in, path);
  double v;
  std::memcpy(&v, &raw, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot create checkpoint file: ", path);

  out.write(kMagic, 4);
  write_le<uint32_t>(out, kVersion);

  const std::string meta = config::checkpoint_meta_to_text(
      ck.model_cfg, ck.flow_cfg, ck.stft_cfg, ck.step, ck.seed);
  write_le<uint32_t>(out, static_cast<uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  write_le<uint32_t>(out, static_cast<uint32_t>(ck.params.size()));
  uint64_t offset = 0;
  for (const auto& p : ck.params) {
    write_le<uint16_t>(out, static_cast<uint16_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_le<uint8_t>(out, p.trainable ? 1 : 0);
    write_le<uint8_t>(out, static_cast<uint8_t>(p.value.ndim()));
    for (int d : p.value.shape()) write_le<int32_t>(out, d);
    write_le<uint64_t>(out, offset);
    offset += static_cast<uint64_t>(p.value.size());
  }

  write_le<uint64_t>(out, offset * 4);  // f32 blob bytes
  for (const auto& p : ck.params)
    for (double v : p.value.values()) write_f32(out, v);

  write_le<uint8_t>(out, 1);  // exact f64 section present
  for (const auto& p : ck.params)
    for (double v : p.value.values()) write_f64(out, v);

  write_le<uint8_t>(out, ck.has_optimizer ? 1 : 0);
  if (ck.has_optimizer) {
    require(ck.adam_m.size() == ck.adam_v.size(),
            "checkpoint: optimizer moment count mismatch");
    write_le<int64_t>(out, ck.opt_step);
    write_le<uint32_t>(out, static_cast<uint32_t>(ck.adam_m.size()));
    for (const auto& m : ck.adam_m) {
      write_le<uint64_t>(out, static_cast<uint64_t>(m.size()));
      for (double v : m) write_f64(out, v);
    }
    for (const auto& v2 : ck.adam_v) {
      write_le<uint64_t>(out, static_cast<uint64_t>(v2.size()));
      for (double v : v2) write_f64(out, v);
    }
  }
  require(out.good(), "failed writing checkpoint: ", path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint file: ", path);

  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0, path,
          ": not a flowsr checkpoint (bad magic)");
  const uint32_t version = read_le<uint32_t>(in, path);
  require(version == kVersion, path, ": unsupported checkpoint version ",
          version, " (expected ", kVersion, ")");

  Checkpoint ck;
  const uint32_t meta_len = read_le<uint32_t>(in, path);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  require(in.good(), path, ": truncated checkpoint metadata");
  config::checkpoint_meta_from_text(meta, &ck.model_cfg, &ck.flow_cfg,
                                    &ck.stft_cfg, &ck.step, &ck.seed);

  const uint32_t n_params = read_le<uint32_t>(in, path);
  struct Entry {
    std::string name;
    bool trainable;
    std::vector<int> shape;
    uint64_t offset;
    int size;
  };
  std::vector<Entry> entries;
  entries.reserve(n_params);
  uint64_t total = 0;
  for (uint32_t i = 0; i < n_params; ++i) {
    Entry e;
    const uint16_t name_len = read_le<uint16_t>(in, path);
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    e.trainable = read_le<uint8_t>(in, path) != 0;
    const uint8_t ndim = read_le<uint8_t>(in, path);
    int size = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      e.shape.push_back(read_le<int32_t>(in, path));
      size *= e.shape.back();
    }
    e.offset = read_le<uint64_t>(in, path);
    e.size = size;
    require(e.offset == total, path, ": inconsistent manifest offset for '",
            e.name, "'");
    total += static_cast<uint64_t>(size);
    entries.push_back(std::move(e));
  }

  const uint64_t blob_bytes = read_le<uint64_t>(in, path);
  require(blob_bytes == total * 4, path, ": blob size ", blob_bytes,
          " does not match manifest total ", total * 4);
  std::vector<double> f32_values(static_cast<size_t>(total));
  for (auto& v : f32_values) v = read_f32(in, path);

  const uint8_t has_f64 = read_le<uint8_t>(in, path);
  std::vector<double> values;
  if (has_f64) {
    values.resize(static_cast<size_t>(total));
    for (auto& v : values) v = read_f64(in, path);
  } else {
    values = std::move(f32_values);
  }

  size_t pos = 0;
  for (const auto& e : entries) {
    std::vector<double> v(values.begin() + static_cast<long>(pos),
                          values.begin() + static_cast<long>(pos + e.size));
    pos += static_cast<size_t>(e.size);
    ck.params.push_back(Param{e.name, Tensor(e.shape, std::move(v)),
                              e.trainable});
  }

  const uint8_t has_opt = read_le<uint8_t>(in, path);
  if (has_opt) {
    ck.has_optimizer = true;
    ck.opt_step = read_le<int64_t>(in, path);
    const uint32_t n = read_le<uint32_t>(in, path);
    ck.adam_m.resize(n);
    for (auto& m : ck.adam_m) {
      m.resize(static_cast<size_t>(read_le<uint64_t>(in, path)));
      for (auto& v : m) v = read_f64(in, path);
    }
    ck.adam_v.resize(n);
    for (auto& v2 : ck.adam_v) {
      v2.resize(static_cast<size_t>(read_le<uint64_t>(in, path)));
      for (auto& v : v2) v = read_f64(in, path);
    }
  }
  return ck;
}

}  // namespace flowsr::model
