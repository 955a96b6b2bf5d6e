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

#ifndef SASR_DIFFKERN_CHECKPOINT_H_
#define SASR_DIFFKERN_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "sasr/diffkern/tensor.h"

namespace sasr {

// Container layout (all integers little-endian uint32):
//   "SASR" | version | metadata length | metadata bytes (text)
//   | tensor count | per tensor: name length, name, rank, dims..., float32s
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  TensorMap<float> tensors;
};

void WriteCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint ReadCheckpoint(const std::string& path);

}  // namespace sasr

#endif  // SASR_DIFFKERN_CHECKPOINT_H_
