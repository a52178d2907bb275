// Copyright 2026 The PAD Distillation Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tensor bundles: one binary file per tensor plus a JSON manifest.
//
// Tensor file layout (all integers unsigned 32-bit little-endian):
//   "PADT" | version | rank | dim_0 .. dim_{rank-1} | dtype | payload
// dtype 1 is IEEE-754 binary32, stored little-endian in row-major order.
// Manifest (manifest.json): {"format": "PADT", "version": 1, "tensors": [
//   {"name", "file", "shape", "dtype": "f32", "role"}, ...]}

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pad/autodiff.hpp"
#include "pad/synthdata.hpp"

namespace pad::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr char kMagic[4] = {'P', 'A', 'D', 'T'};
inline constexpr const char* kManifestName = "manifest.json";

enum class TensorRole { Hidden, Attention, Tokens, Gold };

std::string_view roleName(TensorRole role);
TensorRole parseRole(std::string_view name);

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
  TensorRole role = TensorRole::Hidden;

  std::size_t elementCount() const;
};

using TensorBundle = std::vector<NamedTensor>;

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public BundleError {
 public:
  using BundleError::BundleError;
};
class BadMagic : public BundleError {
 public:
  using BundleError::BundleError;
};
class VersionMismatch : public BundleError {
 public:
  using BundleError::BundleError;
};
class UnsupportedDtype : public BundleError {
 public:
  using BundleError::BundleError;
};
class ShapeMismatch : public BundleError {
 public:
  using BundleError::BundleError;
};
class StochasticityError : public BundleError {
 public:
  using BundleError::BundleError;
};
class DuplicateName : public BundleError {
 public:
  using BundleError::BundleError;
};
class ManifestError : public BundleError {
 public:
  using BundleError::BundleError;
};

std::vector<unsigned char> encodeTensor(const NamedTensor& tensor);

/// Parses one tensor file image; name and role come from the manifest.
NamedTensor decodeTensor(const std::vector<unsigned char>& bytes, std::string name, TensorRole role);

/// Each row of the trailing n x n maps must be nonnegative and sum to 1 within tol.
void checkRowStochastic(const NamedTensor& tensor, double tolerance = 1e-4);

void writeBundle(const TensorBundle& bundle, const std::filesystem::path& dir);

/// Accepts the bundle directory or its manifest file.
TensorBundle readBundle(const std::filesystem::path& path);

const NamedTensor* find(const TensorBundle& bundle, std::string_view name);
const NamedTensor* findRole(const TensorBundle& bundle, TensorRole role);

NamedTensor fromMatrix(std::string name, const Matrix<float>& m, TensorRole role);
NamedTensor fromInts(std::string name, const std::vector<int>& values, TensorRole role);

/// Rank-2 tensors map directly; rank-1 tensors become n x 1.
Matrix<float> toMatrix(const NamedTensor& tensor);
std::vector<int> toInts(const NamedTensor& tensor);

/// Rank-2 n x n gives one map, rank-3 L x n x n gives L maps.
std::vector<Matrix<float>> toAttentionStack(const NamedTensor& tensor);

/// ex<index>.tokens / ex<index>.speech / ex<index>.gold per example.
TensorBundle datasetToBundle(const Dataset& data);
Dataset datasetFromBundle(const TensorBundle& bundle);

}  // namespace pad::io
