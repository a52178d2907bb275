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

#include "pad/tensor_io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pad::io {
namespace {

void putU32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t getU32(const std::vector<unsigned char>& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[offset + std::size_t(b)]) << (8 * b);
  return v;
}

bool validName(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::vector<unsigned char> readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string exampleName(std::size_t index, std::string_view field) {
  std::ostringstream os;
  os << "ex" << std::setw(5) << std::setfill('0') << index << "." << field;
  return os.str();
}

}  // namespace

std::string_view roleName(TensorRole role) {
  switch (role) {
    case TensorRole::Hidden:
      return "hidden";
    case TensorRole::Attention:
      return "attention";
    case TensorRole::Tokens:
      return "tokens";
    case TensorRole::Gold:
      return "gold";
  }
  return "unknown";
}

TensorRole parseRole(std::string_view name) {
  for (auto role : {TensorRole::Hidden, TensorRole::Attention, TensorRole::Tokens, TensorRole::Gold}) {
    if (roleName(role) == name) return role;
  }
  throw ManifestError("unknown tensor role '" + std::string(name) + "'");
}

std::size_t NamedTensor::elementCount() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<unsigned char> encodeTensor(const NamedTensor& tensor) {
  require(!tensor.shape.empty(), "encodeTensor: rank must be >= 1");
  for (auto d : tensor.shape) require(d > 0, "encodeTensor: extents must be positive");
  require(tensor.elementCount() == tensor.data.size(), "encodeTensor: shape does not match data length");
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  putU32(out, kFormatVersion);
  putU32(out, static_cast<std::uint32_t>(tensor.shape.size()));
  for (auto d : tensor.shape) putU32(out, d);
  putU32(out, kDtypeFloat32);
  out.reserve(out.size() + 4 * tensor.data.size());
  for (float f : tensor.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    putU32(out, bits);
  }
  return out;
}

NamedTensor decodeTensor(const std::vector<unsigned char>& bytes, std::string name, TensorRole role) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagic(name + ": bad magic (expected PADT)");
  }
  if (bytes.size() < 12) throw ShapeMismatch(name + ": truncated header");
  const std::uint32_t version = getU32(bytes, 4);
  if (version != kFormatVersion) {
    throw VersionMismatch(name + ": format version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }
  const std::uint32_t rank = getU32(bytes, 8);
  if (rank == 0 || bytes.size() < 16 + 4 * std::size_t(rank)) throw ShapeMismatch(name + ": truncated header");
  NamedTensor t;
  t.name = std::move(name);
  t.role = role;
  for (std::uint32_t r = 0; r < rank; ++r) {
    const auto d = getU32(bytes, 12 + 4 * std::size_t(r));
    if (d == 0) throw ShapeMismatch(t.name + ": zero extent");
    t.shape.push_back(d);
  }
  const std::size_t header = 16 + 4 * std::size_t(rank);
  const std::uint32_t dtype = getU32(bytes, header - 4);
  if (dtype != kDtypeFloat32) throw UnsupportedDtype(t.name + ": dtype code " + std::to_string(dtype));
  const std::size_t count = t.elementCount();
  if (bytes.size() - header != 4 * count) {
    throw ShapeMismatch(t.name + ": payload is " + std::to_string(bytes.size() - header) + " bytes, shape needs " +
                        std::to_string(4 * count));
  }
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = getU32(bytes, header + 4 * i);
    std::memcpy(&t.data[i], &bits, sizeof bits);
  }
  return t;
}

void checkRowStochastic(const NamedTensor& tensor, double tolerance) {
  const auto rank = tensor.shape.size();
  if (rank < 2 || tensor.shape[rank - 1] != tensor.shape[rank - 2]) {
    throw ShapeMismatch(tensor.name + ": attention tensor must end in n x n");
  }
  const std::size_t n = tensor.shape.back();
  const std::size_t rows = tensor.elementCount() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const float v = tensor.data[r * n + c];
      if (!std::isfinite(v) || v < 0.0f) {
        throw StochasticityError(tensor.name + ": row " + std::to_string(r) + " has a negative or non-finite entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > tolerance) {
      std::ostringstream os;
      os << tensor.name << ": row " << r << " sums to " << total << ", expected 1 within " << tolerance;
      throw StochasticityError(os.str());
    }
  }
}

void writeBundle(const TensorBundle& bundle, const std::filesystem::path& dir) {
  std::set<std::string> names;
  for (const auto& t : bundle) {
    require(validName(t.name), "writeBundle: invalid tensor name '" + t.name + "'");
    if (!names.insert(t.name).second) throw DuplicateName("writeBundle: duplicate tensor name '" + t.name + "'");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = "PADT";
  manifest["version"] = kFormatVersion;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& t : bundle) {
    const auto bytes = encodeTensor(t);
    const std::string file = t.name + ".padt";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed for " + (dir / file).string());
    manifest["tensors"].push_back(
        {{"name", t.name}, {"file", file}, {"shape", t.shape}, {"dtype", "f32"}, {"role", std::string(roleName(t.role))}});
  }
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kManifestName).string());
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("write failed for manifest in " + dir.string());
}

TensorBundle readBundle(const std::filesystem::path& path) {
  const auto manifest_path = std::filesystem::is_directory(path) ? path / kManifestName : path;
  const auto dir = manifest_path.parent_path();
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", std::string()) != "PADT") throw ManifestError("manifest format is not PADT");
  if (manifest.value("version", 0u) != kFormatVersion) throw VersionMismatch("manifest version mismatch");
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) throw ManifestError("manifest lacks tensors");

  TensorBundle bundle;
  std::set<std::string> names;
  for (const auto& entry : manifest["tensors"]) {
    std::string name, file, dtype, role;
    std::vector<std::uint32_t> shape;
    try {
      name = entry.at("name").get<std::string>();
      file = entry.at("file").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::uint32_t>>();
      dtype = entry.at("dtype").get<std::string>();
      role = entry.at("role").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(std::string("malformed manifest entry: ") + e.what());
    }
    if (!names.insert(name).second) throw DuplicateName("duplicate tensor name '" + name + "' in manifest");
    if (dtype != "f32") throw UnsupportedDtype(name + ": manifest dtype " + dtype);
    if (!validName(std::filesystem::path(file).filename().string()) || std::filesystem::path(file).has_parent_path()) {
      throw ManifestError(name + ": tensor file must be a plain file name");
    }
    auto tensor = decodeTensor(readFile(dir / file), name, parseRole(role));
    if (tensor.shape != shape) throw ShapeMismatch(name + ": manifest shape differs from tensor header");
    if (tensor.role == TensorRole::Attention) checkRowStochastic(tensor, 1e-4);
    bundle.push_back(std::move(tensor));
  }
  return bundle;
}

const NamedTensor* find(const TensorBundle& bundle, std::string_view name) {
  for (const auto& t : bundle) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor* findRole(const TensorBundle& bundle, TensorRole role) {
  for (const auto& t : bundle) {
    if (t.role == role) return &t;
  }
  return nullptr;
}

NamedTensor fromMatrix(std::string name, const Matrix<float>& m, TensorRole role) {
  NamedTensor t;
  t.name = std::move(name);
  t.role = role;
  t.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.assign(m.data(), m.data() + m.size());
  return t;
}

NamedTensor fromInts(std::string name, const std::vector<int>& values, TensorRole role) {
  NamedTensor t;
  t.name = std::move(name);
  t.role = role;
  t.shape = {static_cast<std::uint32_t>(values.size())};
  for (int v : values) t.data.push_back(static_cast<float>(v));
  return t;
}

Matrix<float> toMatrix(const NamedTensor& tensor) {
  if (tensor.shape.size() == 1) {
    return Eigen::Map<const Matrix<float>>(tensor.data.data(), Eigen::Index(tensor.shape[0]), 1);
  }
  if (tensor.shape.size() != 2) throw ShapeMismatch(tensor.name + ": expected a rank-1 or rank-2 tensor");
  return Eigen::Map<const Matrix<float>>(tensor.data.data(), Eigen::Index(tensor.shape[0]),
                                         Eigen::Index(tensor.shape[1]));
}

std::vector<int> toInts(const NamedTensor& tensor) {
  std::vector<int> out;
  out.reserve(tensor.data.size());
  for (float v : tensor.data) {
    if (v != std::round(v)) throw ShapeMismatch(tensor.name + ": non-integer value in integer tensor");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<Matrix<float>> toAttentionStack(const NamedTensor& tensor) {
  const auto rank = tensor.shape.size();
  if ((rank != 2 && rank != 3) || tensor.shape[rank - 1] != tensor.shape[rank - 2]) {
    throw ShapeMismatch(tensor.name + ": attention must be n x n or L x n x n");
  }
  const auto n = Eigen::Index(tensor.shape.back());
  const std::size_t layers = rank == 3 ? tensor.shape[0] : 1;
  std::vector<Matrix<float>> stack;
  for (std::size_t l = 0; l < layers; ++l) {
    stack.push_back(Eigen::Map<const Matrix<float>>(tensor.data.data() + l * std::size_t(n * n), n, n));
  }
  return stack;
}

TensorBundle datasetToBundle(const Dataset& data) {
  TensorBundle bundle;
  for (std::size_t i = 0; i < data.size(); ++i) {
    bundle.push_back(fromInts(exampleName(i, "tokens"), data[i].text, TensorRole::Tokens));
    bundle.push_back(fromMatrix(exampleName(i, "speech"), data[i].speech, TensorRole::Hidden));
    bundle.push_back(fromInts(exampleName(i, "gold"), data[i].gold, TensorRole::Gold));
  }
  return bundle;
}

Dataset datasetFromBundle(const TensorBundle& bundle) {
  Dataset data;
  for (std::size_t i = 0;; ++i) {
    const auto* tokens = find(bundle, exampleName(i, "tokens"));
    if (!tokens) break;
    const auto* speech = find(bundle, exampleName(i, "speech"));
    const auto* gold = find(bundle, exampleName(i, "gold"));
    if (!speech || !gold) throw ManifestError("dataset bundle example " + std::to_string(i) + " is incomplete");
    PairedExample ex{toInts(*tokens), toMatrix(*speech), toInts(*gold)};
    if (!validGold(ex)) throw ManifestError("dataset bundle example " + std::to_string(i) + " has an invalid gold map");
    data.push_back(std::move(ex));
  }
  return data;
}

}  // namespace pad::io
