#pragma once

#include <cstdint>
#include <vector>

#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"

namespace specmark {

// Synthetic mel-like spectrograms: a loud base with formant-style ridges,
// a slow temporal envelope, and multiplicative fine texture that is
// band-structured at the single-level Haar scale (row-parity, column-parity
// and checkerboard components with per-block random depth). The texture
// levels control how hostile each detail sub-band is to a correlation
// detector; the smooth part stays confined to LL where detrending removes
// it.
struct CorpusParams {
  std::size_t rows = 80;
  std::size_t cols = 200;
  double base = 2.0;
  int n_formants = 3;
  double texture_lh = 0.40;   // row-parity (frequency-direction) depth
  double texture_hl = 0.34;   // column-parity (time-direction) depth
  double texture_hh = 0.17;   // checkerboard depth
  double white_noise = 0.02;  // additive broadband floor
  double sigma_d = 0.3;       // data-model spread used by diffusion pipelines
};

inline Matrix make_clean_mel(Rng& rng, const CorpusParams& p = {}) {
  const std::size_t R = p.rows, C = p.cols;
  Matrix mu(R, C, p.base);

  for (int f = 0; f < p.n_formants; ++f) {
    const double center0 = rng.uniform(0.06, 0.85) * static_cast<double>(R);
    const double drift = rng.uniform(-8.0, 8.0);
    const double waves = rng.uniform(0.5, 2.0);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double bw = rng.uniform(3.0, 9.0);
    const double amp = rng.uniform(1.2, 2.5);
    for (std::size_t c = 0; c < C; ++c) {
      const double ctr =
          center0 + drift * std::sin(6.283185307179586 * waves * c / static_cast<double>(C) + phase);
      for (std::size_t r = 0; r < R; ++r) {
        const double d = (static_cast<double>(r) - ctr) / bw;
        mu(r, c) += amp * std::exp(-0.5 * d * d);
      }
    }
  }

  // Slow temporal envelope.
  {
    const double waves = rng.uniform(1.0, 3.0);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    for (std::size_t c = 0; c < C; ++c) {
      const double env =
          0.85 + 0.15 * std::sin(6.283185307179586 * waves * c / static_cast<double>(C) + phase);
      for (std::size_t r = 0; r < R; ++r) mu(r, c) *= env;
    }
  }

  // Band-structured multiplicative texture; modulators are constant inside
  // each 2x2 block so each component lands in exactly one detail band.
  const std::size_t hr = (R + 1) / 2, hc = (C + 1) / 2;
  std::vector<double> q1(hr * hc), q2(hr * hc), q3(hr * hc);
  for (auto* q : {&q1, &q2, &q3})
    for (double& x : *q) x = rng.uniform(-1.0, 1.0);
  for (std::size_t r = 0; r < R; ++r) {
    const double sr_ = (r % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double sc = (c % 2 == 0) ? 1.0 : -1.0;
      const std::size_t b = (r / 2) * hc + (c / 2);
      const double factor = 1.0 + p.texture_lh * sr_ * q1[b] + p.texture_hl * sc * q2[b] +
                            p.texture_hh * sr_ * sc * q3[b];
      mu(r, c) *= std::max(factor, 0.05);
    }
  }

  if (p.white_noise > 0.0)
    for (std::size_t i = 0; i < mu.size(); ++i) mu.data()[i] += p.white_noise * rng.gaussian();
  for (std::size_t i = 0; i < mu.size(); ++i) mu.data()[i] = std::max(0.0, mu.data()[i]);
  return mu;
}

inline std::vector<Matrix> make_corpus(std::uint64_t seed, std::size_t count,
                                       const CorpusParams& p = {}) {
  std::vector<Matrix> out;
  out.reserve(count);
  Rng rng(subseed(seed, "corpus"));
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_clean_mel(rng, p));
  return out;
}

// Smooth LL-scale background for experiments that operate on sub-bands
// directly (capacity sweeps).
inline Matrix make_ll_background(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols, 4.0);
  const int blobs = 4;
  for (int b = 0; b < blobs; ++b) {
    const double cr = rng.uniform(0.0, 1.0) * static_cast<double>(rows);
    const double cc = rng.uniform(0.0, 1.0) * static_cast<double>(cols);
    const double sr_ = rng.uniform(0.1, 0.35) * static_cast<double>(rows);
    const double sc = rng.uniform(0.1, 0.35) * static_cast<double>(cols);
    const double amp = rng.uniform(1.0, 3.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double dr = (static_cast<double>(r) - cr) / sr_;
        const double dc = (static_cast<double>(c) - cc) / sc;
        m(r, c) += amp * std::exp(-0.5 * (dr * dr + dc * dc));
      }
  }
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] += 0.05 * rng.gaussian();
  return m;
}

}  // namespace specmark
