// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "protomask/tensor.hpp"

// Tensor file: the 4 bytes "PTSR", one JSON header line
// {"dtype":"f32"|"f64","shape":[...]} terminated by '\n', then the
// row-major little-endian payload.
//
// Checkpoint: one JSON manifest line listing every named tensor with its
// dtype, shape and byte offset into the payload section, followed by the
// concatenated payloads.

namespace protomask {

enum class Dtype { f32, f64 };

std::string dtype_name(Dtype dtype);
Dtype parse_dtype(const std::string& name);
std::size_t dtype_size(Dtype dtype);

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t, Dtype dtype);
template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  write_tensor(out, t, sizeof(T) == 4 ? Dtype::f32 : Dtype::f64);
}

/// Reads one tensor, converting the stored dtype to T.
template <typename T>
Tensor<T> read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor<double>& t, Dtype dtype = Dtype::f64);
Tensor<double> load_tensor(const std::filesystem::path& path);

struct NamedTensor {
  std::string name;
  Tensor<double> tensor;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor<double>* find(const std::string& name) const;
  const Tensor<double>& get(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     Dtype dtype = Dtype::f64);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace protomask
