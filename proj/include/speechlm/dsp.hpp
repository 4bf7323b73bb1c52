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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include "speechlm/error.hpp"
#include "speechlm/wave.hpp"

namespace speechlm::signal {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kLogFloor = 1e-10;  // log-mel floor epsilon

// ---------------------------------------------------------------------------
// FFT: iterative radix-2 for powers of two, Bluestein for everything else.
// Double precision throughout; deterministic (no planner, no wisdom).
// ---------------------------------------------------------------------------

namespace fft_detail {

using cd = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline const std::vector<cd>& roots_for(size_t n) {
  static std::map<size_t, std::vector<cd>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cd> roots(n / 2);
  for (size_t k = 0; k < n / 2; ++k) {
    double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    roots[k] = cd(std::cos(ang), std::sin(ang));
  }
  return cache.emplace(n, std::move(roots)).first->second;
}

inline void fft_pow2(std::vector<cd>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const std::vector<cd>& roots = roots_for(n);
  for (size_t len = 2; len <= n; len <<= 1) {
    size_t step = n / len;
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        cd w = roots[k * step];
        if (inverse) w = std::conj(w);
        cd u = a[i + k];
        cd v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

struct BluesteinPlan {
  size_t n = 0;
  size_t m = 0;                // padded power of two >= 2n-1
  std::vector<cd> chirp;       // exp(-i*pi*k^2/n), k in [0, n)
  std::vector<cd> kernel_fft;  // FFT of conj(chirp) wrapped kernel
};

inline const BluesteinPlan& bluestein_plan(size_t n) {
  static std::map<size_t, BluesteinPlan> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  BluesteinPlan plan;
  plan.n = n;
  size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  plan.m = m;
  plan.chirp.resize(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small
    uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
    double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
    plan.chirp[k] = cd(std::cos(ang), std::sin(ang));
  }
  std::vector<cd> kernel(m, cd(0, 0));
  for (size_t k = 0; k < n; ++k) {
    kernel[k] = std::conj(plan.chirp[k]);
    if (k > 0) kernel[m - k] = std::conj(plan.chirp[k]);
  }
  fft_pow2(kernel, false);
  plan.kernel_fft = std::move(kernel);
  return cache.emplace(n, std::move(plan)).first->second;
}

inline void fft_bluestein(std::vector<cd>& a, bool inverse) {
  const size_t n = a.size();
  if (inverse) {
    // ifft(a) == conj(fft(conj(a))) / n
    for (auto& x : a) x = std::conj(x);
    fft_bluestein(a, false);
    double invn = 1.0 / static_cast<double>(n);
    for (auto& x : a) x = std::conj(x) * invn;
    return;
  }
  const BluesteinPlan& plan = bluestein_plan(n);
  std::vector<cd> b(plan.m, cd(0, 0));
  for (size_t k = 0; k < n; ++k) b[k] = a[k] * plan.chirp[k];
  fft_pow2(b, false);
  for (size_t k = 0; k < plan.m; ++k) b[k] *= plan.kernel_fft[k];
  fft_pow2(b, true);
  for (size_t k = 0; k < n; ++k) a[k] = b[k] * plan.chirp[k];
}

}  // namespace fft_detail

// In-place complex FFT of arbitrary length.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  if (a.empty()) return;
  if (fft_detail::is_pow2(a.size())) {
    fft_detail::fft_pow2(a, inverse);
  } else {
    fft_detail::fft_bluestein(a, inverse);
  }
}

// ---------------------------------------------------------------------------
// STFT / iSTFT
// ---------------------------------------------------------------------------

enum class WindowKind { hann };

struct SpectrogramConfig {
  int fft_size = 1024;
  int win_length = 640;  // analysis window; <= fft_size (zero-padded)
  int hop = kHop;
  WindowKind window = WindowKind::hann;
  int mel_bins = 64;

  int bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (hop <= 0 || win_length < hop || fft_size < win_length || mel_bins < 1)
      throw ConfigError("SpectrogramConfig: invalid sizes");
    // Periodic Hann satisfies COLA when the hop divides the window evenly
    // with at least 2x overlap.
    if (win_length % hop != 0 || win_length / hop < 2)
      throw ConfigError("SpectrogramConfig: window/hop pair is not COLA");
  }
};

inline SpectrogramConfig default_analysis() { return SpectrogramConfig{}; }

inline std::vector<double> make_window(const SpectrogramConfig& cfg) {
  std::vector<double> w(cfg.win_length);
  switch (cfg.window) {
    case WindowKind::hann:
      for (int i = 0; i < cfg.win_length; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / cfg.win_length));
      break;
  }
  return w;
}

struct Spectrogram {
  int n_frames = 0;
  int n_bins = 0;
  SpectrogramConfig cfg;
  std::vector<std::complex<double>> data;  // frames x bins, row-major

  std::complex<double>& at(int f, int b) { return data[static_cast<size_t>(f) * n_bins + b]; }
  const std::complex<double>& at(int f, int b) const {
    return data[static_cast<size_t>(f) * n_bins + b];
  }
};

// Frame f covers samples [f*hop, f*hop + win_length); the tail beyond the
// signal is zero-padded so that n_frames == frame_count(len, hop).
inline Spectrogram stft(const Waveform& w, const SpectrogramConfig& cfg = default_analysis()) {
  cfg.validate();
  Spectrogram spec;
  spec.cfg = cfg;
  spec.n_frames = static_cast<int>(frame_count(static_cast<int64_t>(w.size()), cfg.hop));
  spec.n_bins = cfg.bins();
  spec.data.assign(static_cast<size_t>(spec.n_frames) * spec.n_bins, {0.0, 0.0});
  const std::vector<double> win = make_window(cfg);
  std::vector<std::complex<double>> frame(cfg.fft_size);
  for (int f = 0; f < spec.n_frames; ++f) {
    int64_t start = static_cast<int64_t>(f) * cfg.hop;
    for (int i = 0; i < cfg.fft_size; ++i) {
      double v = 0.0;
      if (i < cfg.win_length) {
        int64_t idx = start + i;
        if (idx < static_cast<int64_t>(w.size())) v = w.samples[idx] * win[i];
      }
      frame[i] = {v, 0.0};
    }
    fft(frame, false);
    for (int b = 0; b < spec.n_bins; ++b) spec.at(f, b) = frame[b];
  }
  return spec;
}

// Weighted overlap-add inverse with window-squared normalization. Interior
// samples reconstruct exactly under COLA; edge samples lack full overlap.
inline Waveform istft(const Spectrogram& spec, int64_t out_len = -1) {
  const SpectrogramConfig& cfg = spec.cfg;
  cfg.validate();
  if (out_len < 0) out_len = static_cast<int64_t>(spec.n_frames) * cfg.hop;
  const std::vector<double> win = make_window(cfg);
  int64_t full = spec.n_frames > 0
                     ? static_cast<int64_t>(spec.n_frames - 1) * cfg.hop + cfg.win_length
                     : 0;
  std::vector<double> acc(static_cast<size_t>(std::max(full, out_len)), 0.0);
  std::vector<double> denom(acc.size(), 0.0);
  std::vector<std::complex<double>> frame(cfg.fft_size);
  for (int f = 0; f < spec.n_frames; ++f) {
    for (int b = 0; b < spec.n_bins; ++b) frame[b] = spec.at(f, b);
    for (int b = spec.n_bins; b < cfg.fft_size; ++b)
      frame[b] = std::conj(spec.at(f, cfg.fft_size - b));
    fft(frame, true);
    int64_t start = static_cast<int64_t>(f) * cfg.hop;
    for (int i = 0; i < cfg.win_length; ++i) {
      if (start + i >= static_cast<int64_t>(acc.size())) break;
      acc[start + i] += frame[i].real() * win[i];
      denom[start + i] += win[i] * win[i];
    }
  }
  Waveform out(static_cast<size_t>(out_len));
  for (int64_t i = 0; i < out_len; ++i) {
    double d = i < static_cast<int64_t>(denom.size()) ? denom[i] : 0.0;
    out.samples[i] = d > 1e-9 ? static_cast<float>(acc[i] / d) : 0.0f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mel analysis and inversion
// ---------------------------------------------------------------------------

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank, rows are mel bands over fft bins (power domain).
inline std::vector<double> mel_filterbank(int mel_bins, int fft_size,
                                          int sample_rate = kSampleRate) {
  int n_bins = fft_size / 2 + 1;
  std::vector<double> fb(static_cast<size_t>(mel_bins) * n_bins, 0.0);
  double mel_lo = hz_to_mel(0.0);
  double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(mel_bins + 2);
  for (int i = 0; i < mel_bins + 2; ++i) {
    double mel = mel_lo + (mel_hi - mel_lo) * i / (mel_bins + 1);
    centers[i] = mel_to_hz(mel) * fft_size / sample_rate;  // in fractional bins
  }
  for (int m = 0; m < mel_bins; ++m) {
    double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      double x = static_cast<double>(b);
      double v = 0.0;
      if (x > lo && x < hi) v = x <= mid ? (x - lo) / std::max(mid - lo, 1e-12)
                                         : (hi - x) / std::max(hi - mid, 1e-12);
      fb[static_cast<size_t>(m) * n_bins + b] = v;
    }
  }
  return fb;
}

struct MelSpectrogram {
  int n_frames = 0;
  int mel_bins = 0;
  SpectrogramConfig cfg;
  std::vector<double> frames;  // frames x mel_bins, natural-log energies

  double& at(int f, int m) { return frames[static_cast<size_t>(f) * mel_bins + m]; }
  double at(int f, int m) const { return frames[static_cast<size_t>(f) * mel_bins + m]; }
};

inline MelSpectrogram log_mel(const Waveform& w, const SpectrogramConfig& cfg = default_analysis()) {
  Spectrogram spec = stft(w, cfg);
  MelSpectrogram mel;
  mel.cfg = cfg;
  mel.n_frames = spec.n_frames;
  mel.mel_bins = cfg.mel_bins;
  mel.frames.assign(static_cast<size_t>(mel.n_frames) * mel.mel_bins, 0.0);
  const std::vector<double> fb = mel_filterbank(cfg.mel_bins, cfg.fft_size);
  std::vector<double> pow_frame(spec.n_bins);
  for (int f = 0; f < spec.n_frames; ++f) {
    for (int b = 0; b < spec.n_bins; ++b) pow_frame[b] = std::norm(spec.at(f, b));
    for (int m = 0; m < cfg.mel_bins; ++m) {
      const double* row = fb.data() + static_cast<size_t>(m) * spec.n_bins;
      double e = 0.0;
      for (int b = 0; b < spec.n_bins; ++b) e += row[b] * pow_frame[b];
      mel.at(f, m) = std::log(e + kLogFloor);
    }
  }
  return mel;
}

namespace lin_detail {

// Cholesky solve of (A + ridge*I) x = b for symmetric positive definite A.
inline void cholesky_factor(std::vector<double>& a, int n, double ridge) {
  for (int i = 0; i < n; ++i) a[static_cast<size_t>(i) * n + i] += ridge;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (s <= 0.0) throw NumericError("cholesky: matrix not positive definite");
        a[static_cast<size_t>(i) * n + j] = std::sqrt(s);
      } else {
        a[static_cast<size_t>(i) * n + j] = s / a[static_cast<size_t>(j) * n + j];
      }
    }
  }
}

inline void cholesky_solve(const std::vector<double>& l, int n, std::vector<double>& b) {
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[static_cast<size_t>(i) * n + k] * b[k];
    b[i] = s / l[static_cast<size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l[static_cast<size_t>(k) * n + i] * b[k];
    b[i] = s / l[static_cast<size_t>(i) * n + i];
  }
}

}  // namespace lin_detail

// Maps mel power vectors back to linear power spectra via the min-norm
// pseudo-inverse of the filterbank, clamped at zero.
class MelInverter {
 public:
  explicit MelInverter(const SpectrogramConfig& cfg) : cfg_(cfg) {
    fb_ = mel_filterbank(cfg.mel_bins, cfg.fft_size);
    n_bins_ = cfg.bins();
    int b = cfg.mel_bins;
    gram_.assign(static_cast<size_t>(b) * b, 0.0);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double* ri = fb_.data() + static_cast<size_t>(i) * n_bins_;
        const double* rj = fb_.data() + static_cast<size_t>(j) * n_bins_;
        double s = 0.0;
        for (int k = 0; k < n_bins_; ++k) s += ri[k] * rj[k];
        gram_[static_cast<size_t>(i) * b + j] = s;
        gram_[static_cast<size_t>(j) * b + i] = s;
      }
    }
    lin_detail::cholesky_factor(gram_, b, 1e-8);
  }

  // mel power (mel_bins) -> linear power (bins), clamped >= 0
  void invert(const double* mel_power, double* lin_power) const {
    int b = cfg_.mel_bins;
    std::vector<double> y(mel_power, mel_power + b);
    lin_detail::cholesky_solve(gram_, b, y);
    for (int k = 0; k < n_bins_; ++k) {
      double s = 0.0;
      for (int m = 0; m < b; ++m) s += fb_[static_cast<size_t>(m) * n_bins_ + k] * y[m];
      lin_power[k] = s > 0.0 ? s : 0.0;
    }
  }

 private:
  SpectrogramConfig cfg_;
  std::vector<double> fb_;
  std::vector<double> gram_;  // Cholesky factor of fb*fb^T after construction
  int n_bins_ = 0;
};

// Griffin-Lim phase retrieval from log-mel frames. Magnitudes come from the
// clamped pseudo-inverse of the filterbank; the phase starts at `init` when
// given (e.g. the spectrogram of a time-aligned sibling signal), else zero.
inline Waveform mel_to_waveform(const MelSpectrogram& mel, int iters = 32,
                                const Spectrogram* init = nullptr) {
  if (iters < 1) throw ConfigError("mel_to_waveform: iters must be >= 1");
  const SpectrogramConfig& cfg = mel.cfg;
  cfg.validate();
  MelInverter inverter(cfg);
  int n_bins = cfg.bins();
  Spectrogram spec;
  spec.cfg = cfg;
  spec.n_frames = mel.n_frames;
  spec.n_bins = n_bins;
  spec.data.assign(static_cast<size_t>(mel.n_frames) * n_bins, {0.0, 0.0});

  std::vector<double> mag(static_cast<size_t>(mel.n_frames) * n_bins, 0.0);
  std::vector<double> mel_power(cfg.mel_bins), lin_power(n_bins);
  for (int f = 0; f < mel.n_frames; ++f) {
    for (int m = 0; m < cfg.mel_bins; ++m)
      mel_power[m] = std::max(std::exp(mel.at(f, m)) - kLogFloor, 0.0);
    inverter.invert(mel_power.data(), lin_power.data());
    for (int b = 0; b < n_bins; ++b)
      mag[static_cast<size_t>(f) * n_bins + b] = std::sqrt(lin_power[b]);
  }

  // impose initial phase
  for (int f = 0; f < mel.n_frames; ++f) {
    for (int b = 0; b < n_bins; ++b) {
      double m = mag[static_cast<size_t>(f) * n_bins + b];
      if (init != nullptr && f < init->n_frames && b < init->n_bins) {
        std::complex<double> c = init->at(f, b);
        double a = std::abs(c);
        spec.at(f, b) = a > 1e-300 ? c * (m / a) : std::complex<double>(m, 0.0);
      } else {
        spec.at(f, b) = {m, 0.0};
      }
    }
  }

  int64_t out_len = static_cast<int64_t>(mel.n_frames) * cfg.hop;
  Waveform x;
  for (int it = 0; it < iters; ++it) {
    x = istft(spec, out_len);
    Spectrogram re = stft(x, cfg);
    for (int f = 0; f < spec.n_frames; ++f) {
      for (int b = 0; b < n_bins; ++b) {
        std::complex<double> c = re.at(f, b);
        double a = std::abs(c);
        double m = mag[static_cast<size_t>(f) * n_bins + b];
        spec.at(f, b) = a > 1e-300 ? c * (m / a) : std::complex<double>(m, 0.0);
      }
    }
  }
  x = istft(spec, out_len);
  float pk = peak(x);
  if (pk > 1.0f) scale(x, 1.0 / pk);
  for (float s : x.samples)
    if (!std::isfinite(s)) throw NumericError("mel_to_waveform: non-finite output");
  return x;
}

// ---------------------------------------------------------------------------
// Mixing and convolution
// ---------------------------------------------------------------------------

// Scales `noise` so that 10*log10(P_signal / P_noise_scaled) == snr_db and
// returns (signal + scaled_noise, scaled_noise).
inline std::pair<Waveform, Waveform> mix_at_snr(const Waveform& sig, const Waveform& noise,
                                                double snr_db) {
  if (sig.size() != noise.size()) throw DataError("mix_at_snr: length mismatch");
  double p_sig = power(sig);
  double p_noise = power(noise);
  if (p_sig <= 0.0) throw DataError("mix_at_snr: silent signal");
  if (p_noise <= 0.0) throw DataError("mix_at_snr: zero-power noise");
  double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform scaled_noise = scaled(noise, gain);
  return {add(sig, scaled_noise), std::move(scaled_noise)};
}

// Full linear convolution, FFT-based above a small size cutoff.
inline std::vector<double> convolve_full(const std::vector<float>& x, const std::vector<float>& h) {
  size_t n = x.size(), m = h.size();
  if (n == 0 || m == 0) return {};
  size_t out_n = n + m - 1;
  if (n * m <= 1 << 14) {
    std::vector<double> out(out_n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      double xi = x[i];
      for (size_t j = 0; j < m; ++j) out[i + j] += xi * h[j];
    }
    return out;
  }
  size_t sz = 1;
  while (sz < out_n) sz <<= 1;
  std::vector<std::complex<double>> A(sz, {0, 0}), B(sz, {0, 0});
  for (size_t i = 0; i < n; ++i) A[i] = {static_cast<double>(x[i]), 0};
  for (size_t j = 0; j < m; ++j) B[j] = {static_cast<double>(h[j]), 0};
  fft(A, false);
  fft(B, false);
  for (size_t i = 0; i < sz; ++i) A[i] *= B[i];
  fft(A, true);
  std::vector<double> out(out_n);
  for (size_t i = 0; i < out_n; ++i) out[i] = A[i].real();
  return out;
}

// Room simulation: linear convolution with an impulse response, truncated to
// the dry length. RIRs longer than 0.5 s are rejected.
inline Waveform convolve_rir(const Waveform& w, const Waveform& rir) {
  if (rir.size() > static_cast<size_t>(kSampleRate / 2))
    throw DataError("convolve_rir: rir longer than 0.5 s");
  if (w.empty() || rir.empty()) return w;
  std::vector<double> full = convolve_full(w.samples, rir.samples);
  Waveform out(w.size(), w.sample_rate);
  for (size_t i = 0; i < w.size(); ++i) out.samples[i] = static_cast<float>(full[i]);
  return out;
}

}  // namespace speechlm::signal
