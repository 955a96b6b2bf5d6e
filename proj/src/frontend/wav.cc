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

#include "sasr/frontend/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace sasr {

namespace {

uint32_t U32(const std::string& b, size_t p) {
  return static_cast<uint32_t>(static_cast<unsigned char>(b[p])) |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 3])) << 24;
}

uint16_t U16(const std::string& b, size_t p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(b[p]) |
                               static_cast<unsigned char>(b[p + 1]) << 8);
}

void Put32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>(v >> (8 * i)));
}

void Put16(std::string* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>(v >> 8));
}

int16_t ToPcm(float x) {
  const float s = std::round(x * 32768.0f);
  return static_cast<int16_t>(std::clamp(s, -32768.0f, 32767.0f));
}

}  // namespace

float QuantizePcm16(float x) { return ToPcm(x) / 32768.0f; }

Waveform ReadWav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw AudioError("cannot open audio file " + path);
  std::string b((std::istreambuf_iterator<char>(f)),
                std::istreambuf_iterator<char>());
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 ||
      b.compare(8, 4, "WAVE") != 0) {
    throw AudioError(path + ": not a RIFF/WAVE file");
  }
  size_t pos = 12;
  bool have_fmt = false;
  Waveform wave;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const uint32_t len = U32(b, pos + 4);
    const size_t body = pos + 8;
    if (body + len > b.size()) throw AudioError(path + ": truncated chunk " + id);
    if (id == "fmt ") {
      if (len < 16) throw AudioError(path + ": short fmt chunk");
      const uint16_t format = U16(b, body);
      const uint16_t channels = U16(b, body + 2);
      wave.sample_rate = static_cast<int>(U32(b, body + 4));
      const uint16_t bits = U16(b, body + 14);
      if (format != 1) {
        throw AudioError(path + ": unsupported encoding (format tag " +
                         std::to_string(format) + "), need 16-bit PCM");
      }
      if (bits != 16) {
        throw AudioError(path + ": unsupported sample width " +
                         std::to_string(bits) + " bits, need 16-bit PCM");
      }
      if (channels != 1) {
        throw AudioError(path + ": " + std::to_string(channels) +
                         " channels, need mono");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw AudioError(path + ": data chunk before fmt chunk");
      const size_t n = len / 2;
      wave.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        wave.samples[i] = static_cast<int16_t>(U16(b, body + 2 * i)) / 32768.0f;
      }
      return wave;
    }
    pos = body + len + (len & 1);
  }
  throw AudioError(path + ": no data chunk");
}

void WriteWav(const std::string& path, const Waveform& wave) {
  const uint32_t data_len = static_cast<uint32_t>(wave.samples.size() * 2);
  std::string out = "RIFF";
  Put32(&out, 36 + data_len);
  out += "WAVEfmt ";
  Put32(&out, 16);
  Put16(&out, 1);
  Put16(&out, 1);
  Put32(&out, static_cast<uint32_t>(wave.sample_rate));
  Put32(&out, static_cast<uint32_t>(wave.sample_rate * 2));
  Put16(&out, 2);
  Put16(&out, 16);
  out += "data";
  Put32(&out, data_len);
  for (float x : wave.samples) Put16(&out, static_cast<uint16_t>(ToPcm(x)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw AudioError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw AudioError("failed writing " + path);
}

}  // namespace sasr
