// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace protomask {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'S', 'R'};
constexpr const char* kCheckpointFormat = "protomask-checkpoint";

template <typename U>
void put_le(std::string& buf, U value) {
  using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<Bits>(value);
  for (std::size_t b = 0; b < sizeof(Bits); ++b) {
    buf.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  Bits bits = 0;
  for (std::size_t b = sizeof(Bits); b-- > 0;) bits = (bits << 8) | p[b];
  return std::bit_cast<U>(bits);
}

template <typename T>
std::string encode_payload(std::span<const T> values, Dtype dtype) {
  std::string buf;
  buf.reserve(values.size() * dtype_size(dtype));
  for (T v : values) {
    if (dtype == Dtype::f32) {
      put_le(buf, static_cast<float>(v));
    } else {
      put_le(buf, static_cast<double>(v));
    }
  }
  return buf;
}

template <typename T>
std::vector<T> decode_payload(const std::string& bytes, Dtype dtype, std::size_t count) {
  std::vector<T> out(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == Dtype::f32) {
      out[i] = static_cast<T>(get_le<float>(p + 4 * i));
    } else {
      out[i] = static_cast<T>(get_le<double>(p + 8 * i));
    }
  }
  return out;
}

Shape parse_shape(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) throw FormatError(context + ": field \"shape\" must be a non-empty array");
  Shape shape;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<long long>() <= 0) {
      throw FormatError(context + ": field \"shape\" must hold positive integers");
    }
    shape.push_back(d.get<std::size_t>());
  }
  return shape;
}

nlohmann::json parse_header_line(std::istream& in, const std::string& context) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(context + ": missing JSON header line");
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(context + ": header is not valid JSON (" + e.what() + ")");
  }
}

std::string read_exact(std::istream& in, std::size_t nbytes, const std::string& context) {
  std::string bytes(nbytes, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(nbytes));
  if (static_cast<std::size_t>(in.gcount()) != nbytes) {
    throw FormatError(context + ": payload truncated (expected " + std::to_string(nbytes) +
                      " bytes, got " + std::to_string(in.gcount()) + ")");
  }
  return bytes;
}

}  // namespace

std::string dtype_name(Dtype dtype) { return dtype == Dtype::f32 ? "f32" : "f64"; }

Dtype parse_dtype(const std::string& name) {
  if (name == "f32") return Dtype::f32;
  if (name == "f64") return Dtype::f64;
  throw FormatError("field \"dtype\": unknown dtype '" + name + "'");
}

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::f32 ? 4 : 8; }

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t, Dtype dtype) {
  nlohmann::json header;
  header["dtype"] = dtype_name(dtype);
  header["shape"] = t.shape();
  out.write(kMagic, 4);
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  const std::string payload = encode_payload<T>(t.data(), dtype);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write_tensor: stream failure");
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("tensor file: bad magic (expected \"PTSR\")");
  }
  const auto header = parse_header_line(in, "tensor file");
  if (!header.contains("dtype") || !header["dtype"].is_string()) {
    throw FormatError("tensor file: missing field \"dtype\"");
  }
  if (!header.contains("shape")) throw FormatError("tensor file: missing field \"shape\"");
  const Dtype dtype = parse_dtype(header["dtype"].get<std::string>());
  Shape shape = parse_shape(header["shape"], "tensor file");
  const std::size_t count = shape_numel(shape);
  const std::string bytes = read_exact(in, count * dtype_size(dtype), "tensor file");
  return Tensor<T>(std::move(shape), decode_payload<T>(bytes, dtype, count));
}

template void write_tensor(std::ostream&, const Tensor<float>&, Dtype);
template void write_tensor(std::ostream&, const Tensor<double>&, Dtype);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);

void save_tensor(const std::filesystem::path& path, const Tensor<double>& t, Dtype dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(out, t, dtype);
}

Tensor<double> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor<double>(in);
}

const Tensor<double>* Checkpoint::find(const std::string& name) const {
  for (const auto& nt : tensors) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

const Tensor<double>& Checkpoint::get(const std::string& name) const {
  const auto* t = find(name);
  if (!t) throw FormatError("checkpoint: missing tensor \"" + name + "\"");
  return *t;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, Dtype dtype) {
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = 1;
  manifest["meta"] = ckpt.meta;
  manifest["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& nt : ckpt.tensors) {
    const std::string bytes = encode_payload<double>(nt.tensor.data(), dtype);
    manifest["tensors"].push_back({{"name", nt.name},
                                   {"dtype", dtype_name(dtype)},
                                   {"shape", nt.tensor.shape()},
                                   {"offset", payload.size()},
                                   {"nbytes", bytes.size()}});
    payload += bytes;
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    const std::string line = manifest.dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const auto manifest = parse_header_line(in, "checkpoint");
  if (manifest.value("format", std::string{}) != kCheckpointFormat) {
    throw FormatError("checkpoint: field \"format\" is not " + std::string(kCheckpointFormat));
  }
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw FormatError("checkpoint: missing field \"tensors\"");
  }
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& entry : manifest["tensors"]) {
    const std::string name = entry.value("name", std::string{});
    const std::string ctx = "checkpoint tensor \"" + name + "\"";
    if (name.empty()) throw FormatError("checkpoint: tensor entry without field \"name\"");
    const Dtype dtype = parse_dtype(entry.value("dtype", std::string{}));
    Shape shape = parse_shape(entry.value("shape", nlohmann::json{}), ctx);
    if (!entry.contains("offset") || !entry["offset"].is_number_unsigned()) {
      throw FormatError(ctx + ": missing field \"offset\"");
    }
    const auto offset = entry["offset"].get<std::size_t>();
    const std::size_t count = shape_numel(shape);
    const std::size_t nbytes = count * dtype_size(dtype);
    if (entry.value("nbytes", nbytes) != nbytes) throw FormatError(ctx + ": field \"nbytes\" disagrees with shape");
    if (offset + nbytes > payload.size()) throw FormatError(ctx + ": payload truncated");
    ckpt.tensors.push_back(
        {name, Tensor<double>(std::move(shape),
                              decode_payload<double>(payload.substr(offset, nbytes), dtype, count))});
  }
  return ckpt;
}

}  // namespace protomask
