// include/alignsv/features.h

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

#ifndef ALIGNSV_FEATURES_H_
#define ALIGNSV_FEATURES_H_

#include <string>
#include <vector>

#include "alignsv/common.h"

namespace alignsv {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

// Defaults: 25 ms Hamming window, 10 ms shift, 24 mel filters, 20 cepstra.
struct MfccConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double preemphasis = 0.97;
  int num_mel_bins = 24;
  int num_ceps = 20;
  double low_freq = 0.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
  double log_floor = 1e-10;
  bool add_deltas = true;
  bool apply_cmn = true;
};

int FrameLength(const MfccConfig& cfg, double sample_rate);
int FrameShift(const MfccConfig& cfg, double sample_rate);
int FftSize(int frame_length);

// Triangular mel filterbank over the bins of a real FFT of size `fft_size`
// (num_mel_bins x fft_size/2+1), HTK mel scale.
Matrix MelFilterbank(const MfccConfig& cfg, double sample_rate, int fft_size);

// num_mel_bins x T log filterbank energies of the magnitude spectrum.
Matrix LogMelEnergies(const Waveform& w, const MfccConfig& cfg);

// num_ceps x T cepstra: orthonormal DCT-II of the log-mel energies.
Matrix ExtractMfcc(const Waveform& w, const MfccConfig& cfg);

// [f; delta f; delta-delta f] using the +-2 frame regression window with
// edge frames replicated. Needs at least 5 frames.
Matrix AddDeltas(const Matrix& f);

// Subtracts each row's mean.
void ApplyCmn(Matrix* f);

// MFCC, then deltas, then CMN, as configured.
Matrix ExtractFeatures(const Waveform& w, const MfccConfig& cfg);

// Per-row linear interpolation onto `target_frames` points uniformly spaced
// over [0, T-1]. Endpoints are reproduced exactly.
Matrix InterpolateTime(const Matrix& f, int target_frames);

struct ErasingConfig {
  double probability = 0.5;
  // Fraction of the matrix area covered by the block.
  double area_min = 0.02;
  double area_max = 0.25;
  // Block aspect relative to the matrix shape; 1 keeps the matrix's own
  // height/width proportion.
  double aspect_min = 0.3;
  double aspect_max = 1.0 / 0.3;
};

// With probability p, overwrites one random rectangle with the mean of the
// whole input. Everything outside the rectangle is left untouched.
Matrix RandomErasing(const Matrix& f, const ErasingConfig& cfg, Rng* rng);
Matrix RandomErasing(const Matrix& f, const ErasingConfig& cfg, uint64_t seed);

// 16-bit PCM RIFF/WAVE, mono or first channel of multichannel.
Waveform ReadWav(const std::string& path);
void WriteWav(const Waveform& w, const std::string& path);

}  // namespace alignsv

#endif  // ALIGNSV_FEATURES_H_
