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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "speechlm/dsp.hpp"
#include "speechlm/error.hpp"
#include "speechlm/hash.hpp"
#include "speechlm/rng.hpp"
#include "speechlm/wave.hpp"

namespace speechlm::synth {

// Fully synthetic stand-in corpus: harmonic-source/formant-filter "speech"
// with parametric speaker identities, plus noise, room and echo-path
// generators. Everything is a pure function of its seeds.

struct SpeakerParams {
  double f0_base = 120.0;        // Hz, in [90, 260]
  double f0_wobble_hz = 8.0;     // pitch modulation depth
  double f0_wobble_rate = 4.5;   // pitch modulation rate, Hz
  double formant_freq[3] = {500.0, 1500.0, 2500.0};
  double formant_bw[3] = {80.0, 120.0, 160.0};
  uint64_t seed = 0;

  void validate() const {
    if (!(formant_freq[0] < formant_freq[1] && formant_freq[1] < formant_freq[2]))
      throw ConfigError("SpeakerParams: formants must be strictly increasing");
    if (formant_freq[2] >= 7600.0) throw ConfigError("SpeakerParams: formant above 7600 Hz");
    if (f0_base < 90.0 || f0_base > 260.0) throw ConfigError("SpeakerParams: f0 out of range");
  }

  static SpeakerParams random(Rng& rng) {
    SpeakerParams sp;
    sp.f0_base = rng.uniform(90.0, 260.0);
    sp.f0_wobble_hz = rng.uniform(3.0, 14.0);
    sp.f0_wobble_rate = rng.uniform(2.5, 6.5);
    sp.formant_freq[0] = rng.uniform(300.0, 900.0);
    sp.formant_freq[1] = sp.formant_freq[0] + rng.uniform(400.0, 1200.0);
    sp.formant_freq[2] = sp.formant_freq[1] + rng.uniform(600.0, 1600.0);
    for (int i = 0; i < 3; ++i) sp.formant_bw[i] = rng.uniform(60.0, 200.0);
    sp.seed = rng.next_u64();
    sp.validate();
    return sp;
  }
};

namespace detail {

// Two-pole resonator applied in place (cascade stage).
inline void resonate(std::vector<float>& x, double fc, double bw, int sr) {
  double r = std::exp(-kPi * bw / sr);
  double theta = 2.0 * kPi * fc / sr;
  double a1 = 2.0 * r * std::cos(theta);
  double a2 = -r * r;
  double b0 = 1.0 - r;
  double y1 = 0.0, y2 = 0.0;
  for (float& s : x) {
    double y = b0 * s + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    s = static_cast<float>(y);
  }
}

// Syllabic on/off envelope, 3-6 Hz rhythm; guarantees a >= 50 ms silent gap
// at least every 2 s.
inline std::vector<float> syllable_envelope(size_t n, Rng& rng) {
  std::vector<float> env(n, 0.0f);
  const int sr = kSampleRate;
  const int ramp = sr / 40;  // 25 ms attack/release
  size_t pos = 0;
  double since_gap = 0.0;
  while (pos < n) {
    double bump_s = rng.uniform(0.12, 0.28);
    double gap_s = rng.uniform(0.02, 0.09);
    double level = rng.uniform(0.7, 1.0);
    if (since_gap + bump_s > 1.7) gap_s = rng.uniform(0.06, 0.11);  // force a real pause
    auto bump = static_cast<size_t>(bump_s * sr);
    for (size_t i = 0; i < bump && pos + i < n; ++i) {
      double g = 1.0;
      if (i < static_cast<size_t>(ramp)) g = std::sin(0.5 * kPi * i / ramp);
      if (bump - i <= static_cast<size_t>(ramp)) g = std::min(g, std::sin(0.5 * kPi * (bump - i) / ramp));
      env[pos + i] = static_cast<float>(level * g * g);
    }
    pos += bump;
    if (gap_s >= 0.05) since_gap = 0.0;
    else since_gap += bump_s + gap_s;
    pos += static_cast<size_t>(gap_s * sr);
  }
  return env;
}

}  // namespace detail

// Harmonic source -> formant cascade -> syllabic envelope -> RMS 0.1.
// Deterministic per (sp, duration, seed).
inline Waveform gen_utterance(const SpeakerParams& sp, double duration, uint64_t seed) {
  sp.validate();
  if (duration < 1.0 || duration > 12.0) throw ConfigError("gen_utterance: duration outside [1, 12] s");
  const int sr = kSampleRate;
  auto n = static_cast<size_t>(std::llround(duration * sr));
  Rng rng(derive_seed(sp.seed, seed, static_cast<uint64_t>(std::llround(duration * 1e6))));

  double wobble_phase = rng.uniform(0.0, 2.0 * kPi);
  double f0_max = sp.f0_base + sp.f0_wobble_hz;
  int harmonics = std::min(48, static_cast<int>(7600.0 / f0_max));
  std::vector<double> h_amp(harmonics), h_phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    h_amp[h] = 1.0 / (h + 1);
    h_phase[h] = rng.uniform(0.0, 2.0 * kPi);
  }

  Waveform w(n);
  double phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sr;
    double f0 = sp.f0_base + sp.f0_wobble_hz * std::sin(2.0 * kPi * sp.f0_wobble_rate * t + wobble_phase);
    phase += 2.0 * kPi * f0 / sr;
    double s = 0.0;
    for (int h = 0; h < harmonics; ++h) s += h_amp[h] * std::sin((h + 1) * phase + h_phase[h]);
    w.samples[i] = static_cast<float>(s);
  }
  // weak aspiration noise under the same envelope
  for (size_t i = 0; i < n; ++i) w.samples[i] += static_cast<float>(0.02 * rng.normal());

  for (int k = 0; k < 3; ++k) detail::resonate(w.samples, sp.formant_freq[k], sp.formant_bw[k], sr);

  std::vector<float> env = detail::syllable_envelope(n, rng);
  for (size_t i = 0; i < n; ++i) w.samples[i] *= env[i];

  double r = rms(w);
  if (r <= 0.0) throw NumericError("gen_utterance: degenerate silent render");
  scale(w, 0.1 / r);
  return w;
}

enum class NoiseKind { white, pink, babble, hum };

inline NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  if (s == "babble") return NoiseKind::babble;
  if (s == "hum") return NoiseKind::hum;
  throw ConfigError("unknown noise kind: " + s);
}

inline Waveform gen_noise(NoiseKind kind, double duration, uint64_t seed) {
  const int sr = kSampleRate;
  auto n = static_cast<size_t>(std::llround(duration * sr));
  Rng rng(derive_seed(0x6e6f697365ull, seed, static_cast<uint64_t>(kind)));
  Waveform w(n);
  switch (kind) {
    case NoiseKind::white:
      for (size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(rng.normal());
      break;
    case NoiseKind::pink: {
      // spectral shaping: amplitude ~ 1/sqrt(f)
      size_t m = 1;
      while (m < n) m <<= 1;
      std::vector<std::complex<double>> spec(m, {0.0, 0.0});
      for (size_t k = 1; k < m / 2; ++k) {
        double f = static_cast<double>(k);
        double a = 1.0 / std::sqrt(f);
        double re = rng.normal() * a, im = rng.normal() * a;
        spec[k] = {re, im};
        spec[m - k] = {re, -im};
      }
      fft(spec, true);
      for (size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(spec[i].real());
      break;
    }
    case NoiseKind::babble: {
      for (int v = 0; v < 6; ++v) {
        Rng sub = rng.split(v);
        SpeakerParams sp = SpeakerParams::random(sub);
        Waveform u = gen_utterance(sp, duration, sub.next_u64());
        for (size_t i = 0; i < n && i < u.size(); ++i) w.samples[i] += u.samples[i];
      }
      break;
    }
    case NoiseKind::hum: {
      double am_phase = rng.uniform(0.0, 2.0 * kPi);
      std::vector<double> phases(5);
      for (auto& p : phases) p = rng.uniform(0.0, 2.0 * kPi);
      for (size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / sr;
        double am = 1.0 + 0.1 * std::sin(2.0 * kPi * 0.5 * t + am_phase);
        double s = 0.0;
        for (int h = 1; h <= 5; ++h)
          s += std::sin(2.0 * kPi * 50.0 * h * t + phases[h - 1]) / (h * h);
        w.samples[i] = static_cast<float>(am * s + 1e-3 * rng.normal());
      }
      break;
    }
  }
  double r = rms(w);
  if (r > 0.0) scale(w, 0.1 / r);
  return w;
}

// Exponentially decaying noise tail behind a unit direct path; the amplitude
// envelope hits -60 dB at rt60.
inline Waveform gen_rir(double rt60, uint64_t seed) {
  if (rt60 < 0.1 || rt60 > 0.8) throw ConfigError("gen_rir: rt60 outside [0.1, 0.8] s");
  const int sr = kSampleRate;
  Rng rng(derive_seed(0x726972ull, seed));
  double tau = rt60 / std::log(1000.0);  // amplitude e-folding time
  auto n = std::min<size_t>(static_cast<size_t>(rt60 * 1.1 * sr), sr / 2);
  Waveform rir(n);
  rir.samples[0] = 1.0f;
  for (size_t i = 1; i < n; ++i) {
    double t = static_cast<double>(i) / sr;
    rir.samples[i] = static_cast<float>(0.35 * rng.normal() * std::exp(-t / tau));
  }
  return rir;
}

struct EchoPath {
  int delay = 800;         // samples, [160, 3200]
  Waveform impulse;        // short reflection pattern applied after the delay
  double nonlinearity = 0.3;  // soft-clip drive; 0 disables

  void validate() const {
    if (delay < 160 || delay > 3200) throw ConfigError("EchoPath: delay outside [160, 3200]");
    if (impulse.empty()) throw ConfigError("EchoPath: empty impulse");
  }

  // delay -> convolution -> optional soft clip; output matches input length.
  Waveform apply(const Waveform& x) const {
    validate();
    std::vector<double> conv = convolve_full(x.samples, impulse.samples);
    Waveform y(x.size(), x.sample_rate);
    for (size_t i = 0; i < x.size(); ++i) {
      int64_t j = static_cast<int64_t>(i) - delay;
      double v = (j >= 0 && j < static_cast<int64_t>(conv.size())) ? conv[j] : 0.0;
      if (nonlinearity > 0.0) {
        const double ref = 0.1;  // nominal speech RMS
        v = std::tanh(nonlinearity * v / ref) * ref / nonlinearity;
      }
      y.samples[i] = static_cast<float>(v);
    }
    return y;
  }
};

inline EchoPath gen_echo_path(uint64_t seed) {
  Rng rng(derive_seed(0x6563686full, seed));
  EchoPath p;
  p.delay = static_cast<int>(rng.uniform_int(3200 - 160 + 1)) + 160;
  double rt = rng.uniform(0.05, 0.2);
  auto n = static_cast<size_t>(rt * kSampleRate);
  p.impulse = Waveform(n);
  p.impulse.samples[0] = 1.0f;
  double tau = rt / std::log(1000.0);
  for (size_t i = 1; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    p.impulse.samples[i] = static_cast<float>(0.4 * rng.normal() * std::exp(-t / tau));
  }
  p.nonlinearity = rng.bernoulli(0.5) ? 0.3 : 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string speaker;
  std::string rel_path;
  double duration = 0.0;
  std::string split;  // train / dev / test
};

struct CorpusManifest {
  std::string root;
  std::vector<ManifestEntry> entries;

  std::string path_of(const ManifestEntry& e) const { return root + "/" + e.rel_path; }

  std::vector<const ManifestEntry*> split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == split) out.push_back(&e);
    return out;
  }

  std::vector<std::string> speakers_in(const std::string& split) const {
    std::set<std::string> s;
    for (const auto& e : entries)
      if (e.split == split) s.insert(e.speaker);
    return {s.begin(), s.end()};
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& e : entries) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", e.duration);
      os << e.id << '\t' << e.speaker << '\t' << e.rel_path << '\t' << buf << '\t' << e.split << '\n';
    }
    return os.str();
  }

  uint64_t content_hash() const { return fnv1a64(serialize()); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("manifest save: cannot open " + path);
    f << serialize();
  }

  static CorpusManifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("manifest load: cannot open " + path);
    CorpusManifest m;
    m.root = std::filesystem::path(path).parent_path().string();
    if (m.root.empty()) m.root = ".";
    std::string line;
    std::set<std::string> seen_ids;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::istringstream is(line);
      ManifestEntry e;
      std::string dur;
      if (!std::getline(is, e.id, '\t') || !std::getline(is, e.speaker, '\t') ||
          !std::getline(is, e.rel_path, '\t') || !std::getline(is, dur, '\t') ||
          !std::getline(is, e.split))
        throw DataError("manifest load: malformed line: " + line);
      e.duration = std::stod(dur);
      if (!seen_ids.insert(e.id).second) throw DataError("manifest load: duplicate id " + e.id);
      m.entries.push_back(std::move(e));
    }
    return m;
  }
};

// Writes WAVs plus manifest.tsv under out_dir. Speaker-disjoint 80/10/10
// split (every split non-empty).
inline CorpusManifest build_corpus(int n_speakers, int utts_per_speaker, const std::string& out_dir,
                                   uint64_t master_seed) {
  if (n_speakers < 4) throw ConfigError("build_corpus: need >= 4 speakers for TSE/SS");
  if (utts_per_speaker < 1) throw ConfigError("build_corpus: utts_per_speaker must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");

  int n_dev = std::max(1, n_speakers / 10);
  int n_test = std::max(1, n_speakers / 10);
  int n_train = n_speakers - n_dev - n_test;
  if (n_train < 2) throw ConfigError("build_corpus: too few train speakers after split");

  CorpusManifest man;
  man.root = out_dir;
  Rng speaker_rng(derive_seed(master_seed, 0x5350u));
  for (int s = 0; s < n_speakers; ++s) {
    SpeakerParams sp = SpeakerParams::random(speaker_rng);
    char spk_id[16];
    std::snprintf(spk_id, sizeof(spk_id), "spk%03d", s);
    std::string split = s < n_train ? "train" : (s < n_train + n_dev ? "dev" : "test");
    Rng utt_rng(derive_seed(master_seed, 0x5554u, static_cast<uint64_t>(s)));
    for (int u = 0; u < utts_per_speaker; ++u) {
      double duration = utt_rng.uniform(4.0, 8.0);
      Waveform w = gen_utterance(sp, duration, utt_rng.next_u64());
      ManifestEntry e;
      char utt_id[32];
      std::snprintf(utt_id, sizeof(utt_id), "%s_u%03d", spk_id, u);
      e.id = utt_id;
      e.speaker = spk_id;
      e.rel_path = std::string("wav/") + utt_id + ".wav";
      e.duration = w.duration();
      e.split = split;
      write_wav(man.path_of(e), w);
      man.entries.push_back(std::move(e));
    }
  }
  man.save((fs::path(out_dir) / "manifest.tsv").string());
  return man;
}

}  // namespace speechlm::synth
