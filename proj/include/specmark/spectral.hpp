#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "specmark/audio.hpp"
#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"

namespace specmark {

enum class SpecKind { Mel, LinearMagnitude };

struct Spectrogram {
  Matrix data;
  SpecKind kind = SpecKind::Mel;
};

struct MelConfig {
  int n_fft = 1024;  // power of two
  int hop = 256;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  enum class Window { Hann } window = Window::Hann;

  void validate(int sample_rate) const {
    if (n_fft < 4 || (n_fft & (n_fft - 1)) != 0)
      throw InvalidConfig("mel config: n_fft must be a power of two >= 4");
    if (hop <= 0 || hop > n_fft) throw InvalidConfig("mel config: need 0 < hop <= n_fft");
    if (n_mels < 2) throw InvalidConfig("mel config: need n_mels >= 2");
    if (!(fmin >= 0.0) || !(fmin < fmax)) throw InvalidConfig("mel config: need 0 <= fmin < fmax");
    if (fmax > sample_rate / 2.0 + 1e-9)
      throw InvalidConfig("mel config: fmax above Nyquist");
  }
};

namespace detail {

// Iterative radix-2 complex FFT, in place. n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / n));
  return w;
}

inline std::size_t frame_count(std::size_t len, const MelConfig& cfg) {
  if (len < static_cast<std::size_t>(cfg.n_fft)) throw InputTooShort("stft: signal shorter than one frame");
  return 1 + (len - static_cast<std::size_t>(cfg.n_fft)) / static_cast<std::size_t>(cfg.hop);
}

}  // namespace detail

// Complex STFT, one column per frame, bins 0..n_fft/2.
inline std::vector<std::vector<std::complex<double>>> stft_complex(const Waveform& w,
                                                                   const MelConfig& cfg) {
  cfg.validate(w.sample_rate);
  const std::size_t frames = detail::frame_count(w.samples.size(), cfg);
  const std::size_t nfft = static_cast<std::size_t>(cfg.n_fft);
  const auto win = detail::hann_window(cfg.n_fft);
  std::vector<std::vector<std::complex<double>>> out(frames);
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t off = f * static_cast<std::size_t>(cfg.hop);
    for (std::size_t i = 0; i < nfft; ++i)
      buf[i] = {w.samples[off + i] * win[i], 0.0};
    detail::fft_inplace(buf, false);
    out[f].assign(buf.begin(), buf.begin() + static_cast<long>(nfft / 2 + 1));
  }
  return out;
}

// Magnitude spectrogram: rows = n_fft/2+1 bins, cols = frames.
inline Spectrogram stft(const Waveform& w, const MelConfig& cfg) {
  const auto Z = stft_complex(w, cfg);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  Matrix m(bins, Z.size());
  for (std::size_t f = 0; f < Z.size(); ++f)
    for (std::size_t k = 0; k < bins; ++k) m(k, f) = std::abs(Z[f][k]);
  return {std::move(m), SpecKind::LinearMagnitude};
}

// Weighted overlap-add inverse of the complex STFT.
inline Waveform istft(const std::vector<std::vector<std::complex<double>>>& Z,
                      const MelConfig& cfg, int sample_rate) {
  if (Z.empty()) throw InputTooShort("istft: no frames");
  const std::size_t nfft = static_cast<std::size_t>(cfg.n_fft);
  const std::size_t bins = nfft / 2 + 1;
  if (Z.front().size() != bins) throw ShapeError("istft: bin count mismatch");
  const auto win = detail::hann_window(cfg.n_fft);
  const std::size_t len = nfft + (Z.size() - 1) * static_cast<std::size_t>(cfg.hop);
  std::vector<double> acc(len, 0.0), norm(len, 0.0);
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t f = 0; f < Z.size(); ++f) {
    for (std::size_t k = 0; k < bins; ++k) buf[k] = Z[f][k];
    for (std::size_t k = bins; k < nfft; ++k) buf[k] = std::conj(Z[f][nfft - k]);
    detail::fft_inplace(buf, true);
    const std::size_t off = f * static_cast<std::size_t>(cfg.hop);
    for (std::size_t i = 0; i < nfft; ++i) {
      acc[off + i] += buf[i].real() * win[i];
      norm[off + i] += win[i] * win[i];
    }
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i)
    w.samples[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  return w;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filters. The outermost triangle edges are stretched by one
// FFT-bin width so every bin inside [fmin, fmax] keeps nonzero total weight.
inline Matrix mel_filterbank(const MelConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / cfg.n_fft;
  std::vector<double> pts(static_cast<std::size_t>(cfg.n_mels) + 2);
  const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / (cfg.n_mels + 1));
  Matrix fb(static_cast<std::size_t>(cfg.n_mels), bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double lo = pts[static_cast<std::size_t>(m)];
    const double ctr = pts[static_cast<std::size_t>(m) + 1];
    double hi = pts[static_cast<std::size_t>(m) + 2];
    if (m == 0) lo -= bin_hz;
    if (m == cfg.n_mels - 1) hi += bin_hz;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double up = (f - lo) / std::max(ctr - lo, 1e-12);
      const double dn = (hi - f) / std::max(hi - ctr, 1e-12);
      fb(static_cast<std::size_t>(m), k) = std::max(0.0, std::min(up, dn));
    }
  }
  return fb;
}

// log(1 + filterbank * |STFT|); log1p keeps silence at exactly zero.
inline Spectrogram melspec(const Waveform& w, const MelConfig& cfg) {
  const Spectrogram lin = stft(w, cfg);
  const Matrix fb = mel_filterbank(cfg, w.sample_rate);
  Matrix out(fb.rows(), lin.data.cols());
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    for (std::size_t f = 0; f < lin.data.cols(); ++f) {
      double s = 0.0;
      for (std::size_t k = 0; k < fb.cols(); ++k) s += fb(m, k) * lin.data(k, f);
      out(m, f) = std::log1p(s);
    }
  }
  return {std::move(out), SpecKind::Mel};
}

namespace detail {

// Cholesky solve of (A A^T) z = b for the mel Gram; A is n_mels x bins.
class MelPinv {
 public:
  explicit MelPinv(const Matrix& fb) : fb_(fb), n_(fb.rows()), chol_(n_ * n_, 0.0) {
    std::vector<double> g(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < fb.cols(); ++k) s += fb(i, k) * fb(j, k);
        g[i * n_ + j] = g[j * n_ + i] = s;
      }
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = g[i * n_ + j];
        for (std::size_t k = 0; k < j; ++k) s -= chol_[i * n_ + k] * chol_[j * n_ + k];
        if (i == j) {
          if (s <= 0.0) throw InvalidConfig("mel filterbank Gram not positive definite");
          chol_[i * n_ + i] = std::sqrt(s);
        } else {
          chol_[i * n_ + j] = s / chol_[j * n_ + j];
        }
      }
    }
  }

  // Least-squares linear magnitudes for one mel column, clamped at zero.
  void column(const double* mel_amp, double* lin_out) const {
    std::vector<double> y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = mel_amp[i];
      for (std::size_t k = 0; k < i; ++k) s -= chol_[i * n_ + k] * y[k];
      y[i] = s / chol_[i * n_ + i];
    }
    std::vector<double> z(n_);
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) s -= chol_[k * n_ + ii] * z[k];
      z[ii] = s / chol_[ii * n_ + ii];
    }
    for (std::size_t k = 0; k < fb_.cols(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += fb_(i, k) * z[i];
      lin_out[k] = std::max(0.0, s);
    }
  }

 private:
  const Matrix& fb_;
  std::size_t n_;
  std::vector<double> chol_;
};

}  // namespace detail

// Phase reconstruction by alternating projections. Keeps the best iterate
// under the mel-domain relative error, so more iterations never report a
// worse waveform.
inline Waveform griffin_lim(const Spectrogram& s, const MelConfig& cfg, int sample_rate,
                            int iters, std::uint64_t rng_seed) {
  if (s.kind != SpecKind::Mel) throw InvalidConfig("griffin_lim: expected a mel spectrogram");
  if (iters < 1) throw InvalidConfig("griffin_lim: need iters >= 1");
  cfg.validate(sample_rate);
  if (s.data.rows() != static_cast<std::size_t>(cfg.n_mels))
    throw ShapeError("griffin_lim: mel row count does not match config");

  const Matrix fb = mel_filterbank(cfg, sample_rate);
  const detail::MelPinv pinv(fb);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  const std::size_t frames = s.data.cols();

  // Undo log compression, then lift mel to linear magnitudes per frame.
  Matrix target(bins, frames);
  {
    std::vector<double> amp(s.data.rows()), lin(bins);
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t m = 0; m < s.data.rows(); ++m)
        amp[m] = std::expm1(std::max(0.0, s.data(m, f)));
      pinv.column(amp.data(), lin.data());
      for (std::size_t k = 0; k < bins; ++k) target(k, f) = lin[k];
    }
  }

  Rng rng(rng_seed);
  std::vector<std::vector<std::complex<double>>> Z(frames,
                                                   std::vector<std::complex<double>>(bins));
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t k = 0; k < bins; ++k) {
      const double phi = rng.uniform() * 2.0 * 3.14159265358979323846;
      Z[f][k] = std::polar(target(k, f), phi);
    }

  const double target_norm = std::max(frobenius(s.data), 1e-12);
  Waveform best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    Waveform x = istft(Z, cfg, sample_rate);
    const auto Z2 = stft_complex(x, cfg);
    // Mel re-analysis error of this iterate.
    double err_sq = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t m = 0; m < fb.rows(); ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < bins; ++k) acc += fb(m, k) * std::abs(Z2[f][k]);
        const double d = std::log1p(acc) - s.data(m, f);
        err_sq += d * d;
      }
    }
    const double err = std::sqrt(err_sq) / target_norm;
    if (err < best_err) {
      best_err = err;
      best = x;
    }
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t k = 0; k < bins; ++k) {
        const double mag = std::abs(Z2[f][k]);
        Z[f][k] = mag > 1e-300 ? Z2[f][k] * (target(k, f) / mag)
                               : std::complex<double>(target(k, f), 0.0);
      }
  }
  return best;
}

// SPG container: "SPG1", u32 rows, u32 cols (little-endian), float32
// row-major payload.
inline void write_spg(const std::string& path, const Spectrogram& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("write_spg: cannot open " + path);
  std::string out = "SPG1";
  detail::put_u32(out, static_cast<std::uint32_t>(s.data.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(s.data.cols()));
  out.reserve(out.size() + s.data.size() * 4);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    const float v = static_cast<float>(s.data.data()[i]);
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    detail::put_u32(out, u);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write_spg: short write to " + path);
}

inline Spectrogram read_spg(const std::string& path, SpecKind kind = SpecKind::Mel) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("read_spg: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "SPG1", 4) != 0)
    throw FormatError("read_spg: bad magic");
  const std::uint32_t rows = detail::get_u32(buf.data() + 4);
  const std::uint32_t cols = detail::get_u32(buf.data() + 8);
  if (buf.size() != 12 + static_cast<std::size_t>(rows) * cols * 4)
    throw FormatError("read_spg: size does not match header");
  Spectrogram s;
  s.kind = kind;
  s.data = Matrix(rows, cols);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    std::uint32_t u = detail::get_u32(buf.data() + 12 + 4 * i);
    float v;
    std::memcpy(&v, &u, 4);
    s.data.data()[i] = static_cast<double>(v);
  }
  return s;
}

}  // namespace specmark
