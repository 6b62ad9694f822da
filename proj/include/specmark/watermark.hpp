#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"
#include "specmark/spectral.hpp"
#include "specmark/wavelet.hpp"

namespace specmark {

using Payload = std::vector<int>;  // bits, each 0 or 1

inline Payload random_payload(Rng& rng, std::size_t n) {
  Payload p(n);
  for (auto& b : p) b = static_cast<int>(rng.uniform_int(2));
  return p;
}

// Payload file format: lowercase hex, most-significant bit first, padded
// with zero bits up to a whole number of hex digits. N travels separately.
inline std::string payload_to_hex(const Payload& bits) {
  std::string out;
  int nibble = 0, filled = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    nibble = (nibble << 1) | (bits[i] ? 1 : 0);
    if (++filled == 4) {
      out.push_back("0123456789abcdef"[nibble]);
      nibble = 0;
      filled = 0;
    }
  }
  if (filled > 0) out.push_back("0123456789abcdef"[nibble << (4 - filled)]);
  return out;
}

inline Payload hex_to_payload(const std::string& hex, std::size_t n_bits) {
  Payload bits;
  bits.reserve(hex.size() * 4);
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    else throw FormatError("payload: invalid hex character");
    for (int k = 3; k >= 0; --k) bits.push_back((v >> k) & 1);
  }
  if (bits.size() < n_bits) throw FormatError("payload: fewer bits than requested");
  bits.resize(n_bits);
  return bits;
}

// Local-mean removal. A 5x5 box with clamped edges strips the smooth host
// structure a spectrogram carries while leaving the carrier patterns (white
// at sub-band scale) nearly untouched. Constants map exactly to zero.
inline Matrix detrend(const Matrix& x, int window = 5) {
  const int half = window / 2;
  Matrix out(x.rows(), x.cols());
  const long rows = static_cast<long>(x.rows()), cols = static_cast<long>(x.cols());
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (long dr = -half; dr <= half; ++dr) {
        long rr = r + dr;
        if (rr < 0) rr = 0;
        if (rr >= rows) rr = rows - 1;
        for (long dc = -half; dc <= half; ++dc) {
          long cc = c + dc;
          if (cc < 0) cc = 0;
          if (cc >= cols) cc = cols - 1;
          s += x(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          x(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) -
          s / (window * window);
    }
  }
  return out;
}

// Keyed +-1 carrier patterns, one per payload bit. Balanced sign counts,
// pairwise-correlation bound enforced by rejection, all derived
// deterministically from (key, N, shape). The detrended Gram factorization
// is cached here because extraction solves against it.
class CarrierSet {
 public:
  static constexpr double kMaxPairwiseCorr = 0.2;

  CarrierSet(std::uint64_t key, std::size_t n, std::size_t rows, std::size_t cols,
             double max_corr = kMaxPairwiseCorr)
      : key_(key), n_(n), rows_(rows), cols_(cols) {
    const std::size_t hw = rows * cols;
    if (n < 1) throw InvalidConfig("carriers: need N >= 1");
    if (n > hw / 4) throw CapacityError("carriers: N exceeds H*W/4 capacity guard");
    flat_.resize(n * hw);
    for (std::size_t i = 0; i < n; ++i) {
      bool ok = false;
      for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        gen_candidate(i, attempt, &flat_[i * hw], hw);
        ok = true;
        for (std::size_t j = 0; j < i && ok; ++j) {
          double d = 0.0;
          for (std::size_t t = 0; t < hw; ++t) d += flat_[i * hw + t] * flat_[j * hw + t];
          if (std::fabs(d) / static_cast<double>(hw) > max_corr) ok = false;
        }
        if (ok) break;
      }
      if (!ok) throw GenerationError("carriers: correlation bound unreachable after 1000 retries");
    }
    build_gram();
  }

  std::uint64_t key() const { return key_; }
  std::size_t size() const { return n_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Matrix carrier(std::size_t i) const {
    Matrix m(rows_, cols_);
    const std::size_t hw = rows_ * cols_;
    for (std::size_t t = 0; t < hw; ++t) m.data()[t] = flat_[i * hw + t];
    return m;
  }

  // pattern = (1/sqrt(N)) * sum_i sign_i * C_i with sign_i = 2 m_i - 1.
  Matrix pattern(const Payload& m) const {
    if (m.size() != n_) throw ShapeError("pattern: payload length != carrier count");
    const std::size_t hw = rows_ * cols_;
    Matrix out(rows_, cols_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      const double s = (m[i] ? 1.0 : -1.0) * scale;
      const double* src = &flat_[i * hw];
      for (std::size_t t = 0; t < hw; ++t) out.data()[t] += s * src[t];
    }
    return out;
  }

  // Least-squares coefficients of the detrended field on the detrended
  // carriers. With a zero host this returns the embedded coefficients
  // exactly, so recovery is exact for any N inside the capacity guard.
  std::vector<double> decorrelate(const Matrix& band) const {
    if (band.rows() != rows_ || band.cols() != cols_)
      throw ShapeError("extract: sub-band shape does not match carriers");
    const Matrix d = detrend(band);
    const std::size_t hw = rows_ * cols_;
    std::vector<double> t(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      const double* ci = &dflat_[i * hw];
      for (std::size_t k = 0; k < hw; ++k) s += ci[k] * d.data()[k];
      t[i] = s;
    }
    // Solve G c = t through the cached Cholesky factor.
    std::vector<double> y(n_), c(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = t[i];
      for (std::size_t k = 0; k < i; ++k) s -= chol_[i * n_ + k] * y[k];
      y[i] = s / chol_[i * n_ + i];
    }
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) s -= chol_[k * n_ + ii] * c[k];
      c[ii] = s / chol_[ii * n_ + ii];
    }
    return c;
  }

 private:
  void gen_candidate(std::size_t i, std::uint64_t attempt, double* dst, std::size_t hw) {
    Rng rng(splitmix64(key_ ^ splitmix64(i * 0x9e3779b97f4a7c15ULL + attempt)));
    std::vector<double> v(hw, 1.0);
    for (std::size_t t = 0; t < hw / 2; ++t) v[t] = -1.0;
    rng.shuffle(v);
    for (std::size_t t = 0; t < hw; ++t) dst[t] = v[t];
  }

  void build_gram() {
    const std::size_t hw = rows_ * cols_;
    dflat_.resize(n_ * hw);
    Matrix tmp(rows_, cols_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t t = 0; t < hw; ++t) tmp.data()[t] = flat_[i * hw + t];
      const Matrix d = detrend(tmp);
      for (std::size_t t = 0; t < hw; ++t) dflat_[i * hw + t] = d.data()[t];
    }
    std::vector<double> g(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < hw; ++t) s += dflat_[i * hw + t] * dflat_[j * hw + t];
        g[i * n_ + j] = g[j * n_ + i] = s;
      }
    chol_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = g[i * n_ + j];
        for (std::size_t k = 0; k < j; ++k) s -= chol_[i * n_ + k] * chol_[j * n_ + k];
        if (i == j) {
          if (s <= 0.0) throw GenerationError("carriers: detrended Gram not positive definite");
          chol_[i * n_ + i] = std::sqrt(s);
        } else {
          chol_[i * n_ + j] = s / chol_[j * n_ + j];
        }
      }
    }
  }

  std::uint64_t key_;
  std::size_t n_, rows_, cols_;
  std::vector<double> flat_;   // n x (rows*cols), entries +-1
  std::vector<double> dflat_;  // detrended carriers
  std::vector<double> chol_;   // lower Cholesky of detrended Gram
};

constexpr double kDefaultAlpha = 0.35;       // calibrated against the bundled corpus
constexpr std::uint64_t kDefaultKey = 0xC0FFEEULL;
constexpr int kDefaultEmbedStep = 45;

struct EmbedConfig {
  double alpha = kDefaultAlpha;
  Band subband = Band::LL;
  int embed_step = kDefaultEmbedStep;
  std::uint64_t key = kDefaultKey;
};

// Additive spread-spectrum rule: target sub-band += alpha * pattern(m).
// Only the configured sub-band changes.
inline SubBands embed_ss(const SubBands& b, const Payload& m, const EmbedConfig& cfg,
                         const CarrierSet& carriers) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha))
    throw InvalidConfig("embed: alpha must be finite and >= 0");
  const Matrix& target = band_of(b, cfg.subband);
  if (target.rows() != carriers.rows() || target.cols() != carriers.cols())
    throw ShapeError("embed: carrier shape does not match sub-band");
  SubBands out = b;
  if (cfg.alpha == 0.0) return out;
  Matrix pat = carriers.pattern(m);
  pat *= cfg.alpha;
  band_of(out, cfg.subband) += pat;
  return out;
}

// Decode: local-mean detrend, correlate, decorrelate against the carrier
// Gram, take coefficient signs. soft scores are normalized to ~+-1 when the
// nominal strength is supplied, otherwise raw coefficients.
inline std::pair<Payload, std::vector<double>> extract_ss(const SubBands& b,
                                                          const CarrierSet& carriers,
                                                          Band subband,
                                                          double alpha_nominal = 0.0) {
  const std::vector<double> c = carriers.decorrelate(band_of(b, subband));
  Payload bits(c.size());
  std::vector<double> soft(c.size());
  const double scale =
      alpha_nominal > 0.0 ? std::sqrt(static_cast<double>(c.size())) / alpha_nominal : 1.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    bits[i] = c[i] >= 0.0 ? 1 : 0;
    soft[i] = c[i] * scale;
  }
  return {std::move(bits), std::move(soft)};
}

inline Spectrogram embed_in_spectrogram(const Spectrogram& s, const Payload& m,
                                        const EmbedConfig& cfg, const CarrierSet& carriers) {
  SubBands b = dwt2(s.data);
  b = embed_ss(b, m, cfg, carriers);
  return {idwt2(b), s.kind};
}

// Mean squared distortion of the embedded sub-band.
inline double loss_emb(const Matrix& orig_ll, const Matrix& wm_ll) {
  return mean_sq_diff(orig_ll, wm_ll);
}

// Mean binary cross-entropy; probabilities clamped at 1e-7.
inline double loss_ext(const Payload& m, const std::vector<double>& probs) {
  if (m.size() != probs.size() || m.empty()) throw ShapeError("loss_ext: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double p = probs[i];
    if (p < 1e-7) p = 1e-7;
    if (p > 1.0 - 1e-7) p = 1.0 - 1e-7;
    s += m[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return s / static_cast<double>(m.size());
}

}  // namespace specmark
