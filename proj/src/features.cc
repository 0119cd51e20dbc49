// src/features.cc

// Copyright 2026  The alignsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "alignsv/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace alignsv {

namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

}  // namespace

int FrameLength(const MfccConfig& cfg, double sample_rate) {
  return static_cast<int>(std::lround(cfg.frame_length_ms * sample_rate / 1000.0));
}

int FrameShift(const MfccConfig& cfg, double sample_rate) {
  return static_cast<int>(std::lround(cfg.frame_shift_ms * sample_rate / 1000.0));
}

int FftSize(int frame_length) {
  int n = 1;
  while (n < frame_length) n <<= 1;
  return n;
}

Matrix MelFilterbank(const MfccConfig& cfg, double sample_rate, int fft_size) {
  const int num_bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double high = cfg.high_freq > 0.0 ? cfg.high_freq : nyquist;
  if (cfg.num_mel_bins < 1 || cfg.low_freq < 0.0 || high <= cfg.low_freq ||
      high > nyquist)
    throw InputError("mel filterbank: bad frequency range or bin count");
  const double mel_lo = HzToMel(cfg.low_freq), mel_hi = HzToMel(high);
  const double step = (mel_hi - mel_lo) / (cfg.num_mel_bins + 1);
  Matrix bank = Matrix::Zero(cfg.num_mel_bins, num_bins);
  for (int m = 0; m < cfg.num_mel_bins; ++m) {
    const double left = mel_lo + m * step, center = left + step, right = center + step;
    for (int k = 0; k < num_bins; ++k) {
      const double mel = HzToMel(k * sample_rate / fft_size);
      if (mel > left && mel < right)
        bank(m, k) = mel <= center ? (mel - left) / (center - left)
                                   : (right - mel) / (right - center);
    }
  }
  return bank;
}

Matrix LogMelEnergies(const Waveform& w, const MfccConfig& cfg) {
  if (w.sample_rate <= 0.0) throw InputError("waveform: sample rate must be positive");
  const int len = FrameLength(cfg, w.sample_rate);
  const int shift = FrameShift(cfg, w.sample_rate);
  if (len < 2 || shift < 1) throw InputError("mfcc: frame length/shift too small");
  const int n = static_cast<int>(w.samples.size());
  if (n < len)
    throw InputError("waveform too short: " + std::to_string(n) +
                     " samples, need at least one " + std::to_string(len) +
                     "-sample frame");
  const int frames = 1 + (n - len) / shift;
  const int nfft = FftSize(len);
  const int num_bins = nfft / 2 + 1;
  const Matrix bank = MelFilterbank(cfg, w.sample_rate, nfft);

  std::vector<double> window(len);
  for (int i = 0; i < len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));

  std::vector<double> buf(nfft, 0.0);
  fftw_complex* spec = fftw_alloc_complex(num_bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(nfft, buf.data(), spec, FFTW_ESTIMATE);

  Matrix out(cfg.num_mel_bins, frames);
  Vector mag(num_bins);
  for (int t = 0; t < frames; ++t) {
    const double* x = w.samples.data() + static_cast<size_t>(t) * shift;
    std::fill(buf.begin(), buf.end(), 0.0);
    // Per-frame pre-emphasis; the first sample is its own predecessor.
    for (int i = 0; i < len; ++i) {
      const double prev = i > 0 ? x[i - 1] : x[0];
      buf[i] = (x[i] - cfg.preemphasis * prev) * window[i];
    }
    fftw_execute(plan);
    for (int k = 0; k < num_bins; ++k) mag(k) = std::hypot(spec[k][0], spec[k][1]);
    const Vector energies = bank * mag;
    for (int m = 0; m < cfg.num_mel_bins; ++m)
      out(m, t) = std::log(std::max(energies(m), cfg.log_floor));
  }
  fftw_destroy_plan(plan);
  fftw_free(spec);
  return out;
}

Matrix ExtractMfcc(const Waveform& w, const MfccConfig& cfg) {
  if (cfg.num_ceps < 1 || cfg.num_ceps > cfg.num_mel_bins)
    throw InputError("mfcc: num_ceps must be in [1, num_mel_bins]");
  const Matrix logmel = LogMelEnergies(w, cfg);
  const int nm = cfg.num_mel_bins;
  Matrix dct(cfg.num_ceps, nm);
  for (int k = 0; k < cfg.num_ceps; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / nm);
    for (int m = 0; m < nm; ++m)
      dct(k, m) = scale * std::cos(std::numbers::pi * k * (m + 0.5) / nm);
  }
  // Frame by frame so every column goes through the same arithmetic.
  Matrix out(cfg.num_ceps, logmel.cols());
  for (Eigen::Index t = 0; t < logmel.cols(); ++t) out.col(t) = dct * logmel.col(t);
  return out;
}

namespace {

Matrix Deltas(const Matrix& f) {
  const Eigen::Index frames = f.cols();
  Matrix d(f.rows(), frames);
  auto at = [&](Eigen::Index t) { return std::clamp<Eigen::Index>(t, 0, frames - 1); };
  for (Eigen::Index t = 0; t < frames; ++t) {
    d.col(t) = (1.0 * (f.col(at(t + 1)) - f.col(at(t - 1))) +
                2.0 * (f.col(at(t + 2)) - f.col(at(t - 2)))) / 10.0;
  }
  return d;
}

}  // namespace

Matrix AddDeltas(const Matrix& f) {
  if (f.cols() < 5)
    throw InputError("deltas need at least 5 frames, got " + std::to_string(f.cols()));
  const Matrix d1 = Deltas(f);
  const Matrix d2 = Deltas(d1);
  Matrix out(3 * f.rows(), f.cols());
  out << f, d1, d2;
  return out;
}

void ApplyCmn(Matrix* f) {
  if (f->cols() == 0) return;
  const Vector mean = f->rowwise().mean();
  f->colwise() -= mean;
}

Matrix ExtractFeatures(const Waveform& w, const MfccConfig& cfg) {
  Matrix f = ExtractMfcc(w, cfg);
  if (cfg.add_deltas) f = AddDeltas(f);
  if (cfg.apply_cmn) ApplyCmn(&f);
  return f;
}

Matrix InterpolateTime(const Matrix& f, int target_frames) {
  if (target_frames < 2)
    throw InputError("interpolation target must be >= 2 frames, got " +
                     std::to_string(target_frames));
  const Eigen::Index raw = f.cols();
  if (raw < 2) throw InputError("interpolation needs >= 2 input frames");
  if (raw == target_frames) return f;
  Matrix out(f.rows(), target_frames);
  const double scale = static_cast<double>(raw - 1) / (target_frames - 1);
  for (int i = 0; i < target_frames; ++i) {
    if (i == target_frames - 1) {
      out.col(i) = f.col(raw - 1);
      continue;
    }
    const double pos = i * scale;
    const Eigen::Index lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), raw - 2);
    const double frac = pos - lo;
    out.col(i) = (1.0 - frac) * f.col(lo) + frac * f.col(lo + 1);
  }
  return out;
}

Matrix RandomErasing(const Matrix& f, const ErasingConfig& cfg, Rng* rng) {
  if (cfg.probability < 0.0 || cfg.probability > 1.0)
    throw InputError("random erasing: probability must be in [0, 1]");
  if (cfg.probability == 0.0 || f.size() == 0) return f;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(*rng) >= cfg.probability) return f;
  const double area = cfg.area_min + (cfg.area_max - cfg.area_min) * unit(*rng);
  const double log_lo = std::log(cfg.aspect_min), log_hi = std::log(cfg.aspect_max);
  const double aspect = std::exp(log_lo + (log_hi - log_lo) * unit(*rng));
  const Eigen::Index rows = f.rows(), cols = f.cols();
  const Eigen::Index h = std::clamp<Eigen::Index>(
      std::lround(rows * std::sqrt(area * aspect)), 1, rows);
  const Eigen::Index w = std::clamp<Eigen::Index>(
      std::lround(cols * std::sqrt(area / aspect)), 1, cols);
  std::uniform_int_distribution<Eigen::Index> top(0, rows - h), left(0, cols - w);
  const Eigen::Index r0 = top(*rng), c0 = left(*rng);
  Matrix out = f;
  out.block(r0, c0, h, w).setConstant(f.mean());
  return out;
}

Matrix RandomErasing(const Matrix& f, const ErasingConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  return RandomErasing(f, cfg, &rng);
}

namespace {

template <typename T>
T ReadLe(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!in) throw IoError("wav: unexpected end of file");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

template <typename T>
void WriteLe(std::ostream& out, T value) {
  const uint64_t v = static_cast<uint64_t>(value);
  for (size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path + ": not a RIFF file");
  ReadLe<uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path + ": not a WAVE file");
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const uint32_t size = ReadLe<uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = ReadLe<uint16_t>(in);
      channels = ReadLe<uint16_t>(in);
      rate = ReadLe<uint32_t>(in);
      ReadLe<uint32_t>(in);
      ReadLe<uint16_t>(in);
      bits = ReadLe<uint16_t>(in);
      in.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt || format != 1 || bits != 16 || channels == 0)
        throw IoError(path + ": only 16-bit PCM is supported");
      Waveform w;
      w.sample_rate = rate;
      const uint32_t frames = size / (2u * channels);
      w.samples.resize(frames);
      for (uint32_t i = 0; i < frames; ++i) {
        w.samples[i] = static_cast<int16_t>(ReadLe<uint16_t>(in)) / 32768.0;
        for (uint16_t c = 1; c < channels; ++c) ReadLe<uint16_t>(in);
      }
      return w;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  throw IoError(path + ": no data chunk");
}

void WriteWav(const Waveform& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  const uint32_t rate = static_cast<uint32_t>(std::lround(w.sample_rate));
  out.write("RIFF", 4);
  WriteLe<uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  WriteLe<uint32_t>(out, 16);
  WriteLe<uint16_t>(out, 1);
  WriteLe<uint16_t>(out, 1);
  WriteLe<uint32_t>(out, rate);
  WriteLe<uint32_t>(out, rate * 2);
  WriteLe<uint16_t>(out, 2);
  WriteLe<uint16_t>(out, 16);
  out.write("data", 4);
  WriteLe<uint32_t>(out, data_bytes);
  for (double s : w.samples) {
    const long v = std::lround(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    WriteLe<uint16_t>(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace alignsv
