/* Copyright 2026 The speechlm Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "speechlm/error.hpp"

namespace speechlm::signal {

// Global sampling contract: 16 kHz mono, 50 frames/s (hop 320). The single
// hop constant is what keeps feature frames and codec tokens aligned.
inline constexpr int kSampleRate = 16000;
inline constexpr int kHop = 320;
inline constexpr int kFrameRate = kSampleRate / kHop;

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  Waveform() = default;
  Waveform(std::vector<float> s, int sr = kSampleRate) : samples(std::move(s)), sample_rate(sr) {}
  explicit Waveform(size_t n, int sr = kSampleRate) : samples(n, 0.0f), sample_rate(sr) {}

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  float& operator[](size_t i) { return samples[i]; }
  float operator[](size_t i) const { return samples[i]; }
};

// Shared framing rule for features and tokens: one frame per full hop.
inline int64_t frame_count(int64_t num_samples, int64_t hop = kHop) {
  if (num_samples < 0 || hop <= 0) throw ConfigError("frame_count: bad arguments");
  return num_samples / hop;
}

inline double power(const Waveform& w) {
  double acc = 0.0;
  for (float s : w.samples) acc += static_cast<double>(s) * s;
  return w.samples.empty() ? 0.0 : acc / w.samples.size();
}

inline double rms(const Waveform& w) { return std::sqrt(power(w)); }

inline float peak(const Waveform& w) {
  float p = 0.0f;
  for (float s : w.samples) p = std::max(p, std::abs(s));
  return p;
}

inline void scale(Waveform& w, double gain) {
  for (float& s : w.samples) s = static_cast<float>(s * gain);
}

inline Waveform scaled(const Waveform& w, double gain) {
  Waveform out = w;
  scale(out, gain);
  return out;
}

// Element-wise sum; inputs must be equal length.
inline Waveform add(const Waveform& a, const Waveform& b) {
  if (a.size() != b.size()) throw DataError("add: length mismatch");
  Waveform out = a;
  for (size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

// Linear-interpolation resampler. Duration is preserved to within one sample.
inline Waveform resample_linear(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (w.sample_rate == target_rate) return w;
  if (w.samples.empty()) return Waveform(std::vector<float>{}, target_rate);
  double ratio = static_cast<double>(target_rate) / w.sample_rate;
  auto out_len = static_cast<size_t>(std::llround(static_cast<double>(w.samples.size()) * ratio));
  Waveform out(out_len, target_rate);
  for (size_t i = 0; i < out_len; ++i) {
    double src = static_cast<double>(i) / ratio;
    auto i0 = static_cast<size_t>(src);
    if (i0 >= w.samples.size() - 1) {
      out.samples[i] = w.samples.back();
      continue;
    }
    double frac = src - static_cast<double>(i0);
    out.samples[i] = static_cast<float>((1.0 - frac) * w.samples[i0] + frac * w.samples[i0 + 1]);
  }
  return out;
}

enum class WavEncoding { pcm16, float32 };

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline void write_wav(const std::string& path, const Waveform& w,
                      WavEncoding enc = WavEncoding::pcm16) {
  using namespace detail;
  const uint16_t channels = 1;
  const uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
  const uint16_t fmt = enc == WavEncoding::pcm16 ? 1 : 3;
  const uint32_t byte_rate = static_cast<uint32_t>(w.sample_rate) * channels * bits / 8;
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size()) * bits / 8;

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, fmt);
  put_u16(out, channels);
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, byte_rate);
  put_u16(out, channels * bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  if (enc == WavEncoding::pcm16) {
    for (float s : w.samples) {
      auto q = static_cast<int32_t>(std::lrint(static_cast<double>(s) * 32768.0));
      if (q > 32767) q = 32767;
      if (q < -32768) q = -32768;
      put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    }
  } else {
    for (float s : w.samples) {
      uint32_t bitsv;
      std::memcpy(&bitsv, &s, 4);
      put_u32(out, bitsv);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write_wav: write failed for " + path);
}

// Mono PCM16 / float32 RIFF reader. A sample rate other than 16 kHz is an
// error unless resample==true, in which case the data is resampled on read.
inline Waveform read_wav(const std::string& path, bool resample = false) {
  using namespace detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw DataError("read_wav: malformed RIFF header in " + path);
  }

  uint16_t fmt = 0, channels = 0, bits = 0;
  uint32_t sr = 0;
  const unsigned char* data = nullptr;
  uint32_t data_bytes = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    uint32_t chunk_size = get_u32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16 || pos + 8 + chunk_size > buf.size())
        throw DataError("read_wav: truncated fmt chunk");
      fmt = get_u16(hdr + 8);
      channels = get_u16(hdr + 10);
      sr = get_u32(hdr + 12);
      bits = get_u16(hdr + 22);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (pos + 8 + chunk_size > buf.size()) throw DataError("read_wav: truncated data chunk");
      data = hdr + 8;
      data_bytes = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (data == nullptr || sr == 0) throw DataError("read_wav: missing fmt/data chunk");
  if (channels != 1) throw DataError("read_wav: only mono supported, got " + std::to_string(channels));

  Waveform w;
  w.sample_rate = static_cast<int>(sr);
  if (fmt == 1 && bits == 16) {
    size_t n = data_bytes / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      auto v = static_cast<int16_t>(get_u16(data + 2 * i));
      w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (fmt == 3 && bits == 32) {
    size_t n = data_bytes / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t bitsv = get_u32(data + 4 * i);
      float s;
      std::memcpy(&s, &bitsv, 4);
      w.samples[i] = s;
    }
  } else {
    throw DataError("read_wav: unsupported encoding (fmt=" + std::to_string(fmt) +
                    ", bits=" + std::to_string(bits) + ")");
  }

  if (w.sample_rate != kSampleRate) {
    if (!resample)
      throw DataError("read_wav: sample rate " + std::to_string(w.sample_rate) +
                      " != 16000 (pass resample=true to convert)");
    w = resample_linear(w, kSampleRate);
  }
  return w;
}

}  // namespace speechlm::signal

namespace speechlm {
using signal::Waveform;
}
