// Copyright 2026 The msim Authors
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

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "msim/encoder.hpp"
#include "msim/errors.hpp"
#include "msim/tensor.hpp"

namespace msim {

// Layout (all integers little-endian):
//   "MSIMCSE1" | u32 tensor count | per tensor: u16 name length, name bytes,
//   u8 rank, u64 dims[rank], f64 data[numel] | u32 CRC32 of everything before.
inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'I', 'M', 'C', 'S', 'E', '1'};

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    std::memcpy(&bits, &value, sizeof(double));
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
  }
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& buf, std::size_t end)
      : buf_(buf), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      double v;
      std::memcpy(&v, &bits, sizeof(double));
      return v;
    } else {
      return static_cast<T>(bits);
    }
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw CorruptCheckpointError("checkpoint truncated");
  }
  const std::vector<unsigned char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace detail

/// Named tensors in checkpoint order.
inline std::vector<std::pair<std::string, Tensor>> named_tensors(const EncoderParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("token_table", p.token_table);
  for (std::size_t i = 0; i < p.hidden.size(); ++i) {
    out.emplace_back("hidden." + std::to_string(i) + ".weight", p.hidden[i].weight);
    out.emplace_back("hidden." + std::to_string(i) + ".bias", p.hidden[i].bias);
  }
  out.emplace_back("output.weight", p.output.weight);
  out.emplace_back("output.bias", p.output.bias);
  out.emplace_back("dropout", Tensor::scalar(p.dropout));
  return out;
}

inline std::vector<unsigned char> serialize_checkpoint(const EncoderParams& params) {
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const auto tensors = named_tensors(params);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t dim : t.shape()) detail::put_le<std::uint64_t>(out, dim);
    for (double v : t.data()) detail::put_le<double>(out, v);
  }
  detail::put_le<std::uint32_t>(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

inline EncoderParams deserialize_checkpoint(const std::vector<unsigned char>& buf) {
  if (buf.size() < sizeof(kCheckpointMagic) + 8) {
    throw CorruptCheckpointError("checkpoint truncated (" + std::to_string(buf.size()) +
                                 " bytes)");
  }
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CorruptCheckpointError("bad checkpoint magic/version");
  }
  detail::ByteReader in(buf, buf.size());
  in.get_string(sizeof(kCheckpointMagic));
  const auto count = in.get<std::uint32_t>();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = in.get_string(in.get<std::uint16_t>());
    const auto rank = in.get<std::uint8_t>();
    if (rank > 2) throw CorruptCheckpointError("tensor " + name + " has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
      numel *= shape.back();
    }
    if (numel > in.remaining() / 8) {
      throw CorruptCheckpointError("shape header of " + name + " " + shape_str(shape) +
                                   " exceeds remaining bytes");
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (double& v : data) v = in.get<double>();
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  if (in.remaining() < 4) throw CorruptCheckpointError("checkpoint truncated");
  if (in.remaining() > 4) {
    throw CorruptCheckpointError("shape headers disagree with payload size");
  }
  const std::size_t body = buf.size() - 4;
  const auto stored = in.get<std::uint32_t>();
  if (stored != detail::crc32_of(buf.data(), body)) {
    throw CorruptCheckpointError("checkpoint CRC mismatch");
  }

  auto take = [&tensors](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CorruptCheckpointError("checkpoint lacks tensor " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };
  EncoderParams p;
  p.token_table = take("token_table");
  for (std::size_t i = 0; tensors.count("hidden." + std::to_string(i) + ".weight"); ++i) {
    DenseLayer layer;
    layer.weight = take("hidden." + std::to_string(i) + ".weight");
    layer.bias = take("hidden." + std::to_string(i) + ".bias");
    p.hidden.push_back(std::move(layer));
  }
  p.output.weight = take("output.weight");
  p.output.bias = take("output.bias");
  p.dropout = take("dropout").item();
  if (!tensors.empty()) {
    throw CorruptCheckpointError("unexpected tensor " + tensors.begin()->first);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw CorruptCheckpointError(std::string("inconsistent shape headers: ") + e.what());
  }
  return p;
}

inline void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write on checkpoint " + path.string());
}

inline EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

/// Shape check of a loaded checkpoint against the dimensions an evaluation
/// config expects.
inline void check_checkpoint_shapes(const EncoderParams& p, std::size_t vocab_rows,
                                    std::size_t input_dim, std::size_t output_dim) {
  if (p.token_table.rows() != vocab_rows || p.input_dim() != input_dim ||
      p.output_dim() != output_dim) {
    throw DimensionError("checkpoint shapes (table " + shape_str(p.token_table.shape()) +
                         ", output dim " + std::to_string(p.output_dim()) +
                         ") do not match config (table [" + std::to_string(vocab_rows) +
                         "x" + std::to_string(input_dim) + "], output dim " +
                         std::to_string(output_dim) + ")");
  }
}

}  // namespace msim
