// Copyright (c) 2026 SASR Authors
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

#include "sasr/diffkern/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sasr {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'S', 'R'};

void PutU32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string Bytes(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("checkpoint " + path_ + " is truncated");
    }
  }

  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void WriteCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  PutU32(&out, kCheckpointVersion);
  PutU32(&out, static_cast<uint32_t>(ckpt.metadata.size()));
  out += ckpt.metadata;
  PutU32(&out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    PutU32(&out, static_cast<uint32_t>(name.size()));
    out += name;
    PutU32(&out, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape()) PutU32(&out, static_cast<uint32_t>(d));
    for (float v : t.values()) PutU32(&out, std::bit_cast<uint32_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

Checkpoint ReadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);
  if (r.Bytes(4) != std::string(kMagic, 4)) {
    throw std::runtime_error(path + " is not a SASR checkpoint");
  }
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = r.Bytes(r.U32());
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.Bytes(r.U32());
    const uint32_t rank = r.U32();
    if (rank == 0 || rank > 8) {
      throw std::runtime_error(path + ": tensor '" + name + "' has bad rank");
    }
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.U32());
    std::vector<float> values(Tensor<float>::Count(shape));
    for (auto& v : values) v = r.F32();
    ckpt.tensors.emplace(std::move(name),
                         Tensor<float>(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw std::runtime_error(path + ": trailing bytes");
  return ckpt;
}

}  // namespace sasr
