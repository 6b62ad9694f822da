#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "specmark/audio.hpp"
#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"

namespace specmark {

// ---- waveform-domain attacks ----

// Clamp to +-level * peak. level = 1 is the identity.
inline Waveform clip(const Waveform& w, double level = 0.5) {
  if (!(level >= 0.0)) throw InvalidConfig("clip: level must be >= 0");
  double peak = 0.0;
  for (double x : w.samples) peak = std::max(peak, std::fabs(x));
  const double lim = level * peak;
  Waveform out = w;
  for (double& x : out.samples) x = std::max(-lim, std::min(lim, x));
  return out;
}

inline Waveform add_noise(const Waveform& w, double intensity, Rng& rng) {
  if (!(intensity >= 0.0)) throw InvalidConfig("noise: intensity must be >= 0");
  Waveform out = w;
  if (intensity == 0.0) return out;
  const double sigma = intensity * rms(w.samples);
  for (double& x : out.samples) x += sigma * rng.gaussian();
  return out;
}

namespace detail {

// Choose exactly k distinct indices in [0, n) via partial Fisher-Yates.
inline std::vector<std::size_t> pick_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace detail

// Zero out exactly round(fraction * len) samples, uniformly w/o replacement.
inline Waveform time_mask(const Waveform& w, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidConfig("time_mask: bad fraction");
  Waveform out = w;
  const std::size_t k =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(w.samples.size())));
  for (std::size_t i : detail::pick_indices(w.samples.size(), k, rng)) out.samples[i] = 0.0;
  return out;
}

inline Waveform amp_scale(const Waveform& w, double factor = 0.9) {
  Waveform out = w;
  for (double& x : out.samples) x *= factor;
  return out;
}

// y[n] = x[n] + gain * x[n - d], zero history; length preserved.
inline Waveform echo(const Waveform& w, double gain = 0.3, double delay_seconds = 0.015) {
  if (!(delay_seconds >= 0.0)) throw InvalidConfig("echo: negative delay");
  const std::size_t d =
      static_cast<std::size_t>(std::llround(delay_seconds * w.sample_rate));
  Waveform out = w;
  for (std::size_t i = d; i < w.samples.size(); ++i)
    out.samples[i] += gain * w.samples[i - d];
  return out;
}

// Linear-phase windowed-sinc FIR, 101 taps, Hamming window, unit DC gain,
// group delay compensated so the output aligns with the input.
inline Waveform lowpass(const Waveform& w, double cutoff_hz = 5000.0) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= w.sample_rate / 2.0)
    throw InvalidConfig("lowpass: cutoff must lie inside (0, Nyquist)");
  constexpr int kTaps = 101;
  constexpr int kHalf = kTaps / 2;
  const double fc = cutoff_hz / w.sample_rate;
  std::vector<double> h(kTaps);
  double sum = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const int n = i - kHalf;
    const double x = 2.0 * 3.14159265358979323846 * fc * n;
    const double sinc = n == 0 ? 2.0 * fc : std::sin(x) / (3.14159265358979323846 * n);
    const double ham =
        0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i / (kTaps - 1));
    h[static_cast<std::size_t>(i)] = sinc * ham;
    sum += h[static_cast<std::size_t>(i)];
  }
  for (double& t : h) t /= sum;

  Waveform out = w;
  const long len = static_cast<long>(w.samples.size());
  for (long i = 0; i < len; ++i) {
    double acc = 0.0;
    for (int t = 0; t < kTaps; ++t) {
      const long j = i + kHalf - t;  // delay-compensated
      if (j >= 0 && j < len) acc += h[static_cast<std::size_t>(t)] * w.samples[static_cast<std::size_t>(j)];
    }
    out.samples[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

// ---- spectrogram-domain variants (noise / mask / scale / echo) ----

inline Matrix add_noise(const Matrix& m, double intensity, Rng& rng) {
  if (!(intensity >= 0.0)) throw InvalidConfig("noise: intensity must be >= 0");
  Matrix out = m;
  if (intensity == 0.0) return out;
  const double sigma = intensity * std::sqrt(mean_sq(m));
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += sigma * rng.gaussian();
  return out;
}

// Masks whole time frames (columns).
inline Matrix time_mask(const Matrix& m, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidConfig("time_mask: bad fraction");
  Matrix out = m;
  const std::size_t k =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m.cols())));
  for (std::size_t c : detail::pick_indices(m.cols(), k, rng))
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) = 0.0;
  return out;
}

inline Matrix amp_scale(const Matrix& m, double factor = 0.9) {
  Matrix out = m;
  out *= factor;
  return out;
}

// Frame-shifted attenuated copy.
inline Matrix echo(const Matrix& m, double gain = 0.3, int delay_frames = 2) {
  if (delay_frames < 0) throw InvalidConfig("echo: negative delay");
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = static_cast<std::size_t>(delay_frames); c < m.cols(); ++c)
      out(r, c) += gain * m(r, c - static_cast<std::size_t>(delay_frames));
  return out;
}

// ---- attack specs, chains, composites ----

enum class AttackKind { Clip, Noise, TimeMask, AmpScale, Echo, Lowpass };

struct AttackSpec {
  AttackKind kind = AttackKind::Noise;
  double p1 = 0.0;   // main parameter
  double p2 = 0.0;   // echo delay (seconds or frames); unused otherwise
};

inline AttackSpec default_spec(AttackKind k) {
  switch (k) {
    case AttackKind::Clip: return {k, 0.5, 0.0};
    case AttackKind::Noise: return {k, 0.2, 0.0};
    case AttackKind::TimeMask: return {k, 0.1, 0.0};
    case AttackKind::AmpScale: return {k, 0.9, 0.0};
    case AttackKind::Echo: return {k, 0.3, -1.0};  // -1: per-domain default delay
    default: return {k, 5000.0, 0.0};
  }
}

inline const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::Clip: return "clip";
    case AttackKind::Noise: return "noise";
    case AttackKind::TimeMask: return "time_mask";
    case AttackKind::AmpScale: return "amp_scale";
    case AttackKind::Echo: return "echo";
    default: return "lowpass";
  }
}

inline Waveform apply_attack(const Waveform& w, const AttackSpec& s, Rng& rng) {
  switch (s.kind) {
    case AttackKind::Clip: return clip(w, s.p1);
    case AttackKind::Noise: return add_noise(w, s.p1, rng);
    case AttackKind::TimeMask: return time_mask(w, s.p1, rng);
    case AttackKind::AmpScale: return amp_scale(w, s.p1);
    case AttackKind::Echo: return echo(w, s.p1, s.p2 < 0.0 ? 0.015 : s.p2);
    default: return lowpass(w, s.p1);
  }
}

inline Matrix apply_attack(const Matrix& m, const AttackSpec& s, Rng& rng) {
  switch (s.kind) {
    case AttackKind::Noise: return add_noise(m, s.p1, rng);
    case AttackKind::TimeMask: return time_mask(m, s.p1, rng);
    case AttackKind::AmpScale: return amp_scale(m, s.p1);
    case AttackKind::Echo:
      return echo(m, s.p1, s.p2 < 0.0 ? 2 : static_cast<int>(std::llround(s.p2)));
    default:
      throw Unsupported(std::string(attack_name(s.kind)) +
                        ": waveform-domain attack applied to a spectrogram");
  }
}

template <typename T>
inline T apply_chain(const T& x, const std::vector<AttackSpec>& chain, Rng& rng) {
  T cur = x;
  for (const auto& s : chain) cur = apply_attack(cur, s, rng);
  return cur;
}

// 2-4 attacks applied successively in an order drawn from order_seed.
struct CompositeSpec {
  std::vector<AttackSpec> specs;
  std::uint64_t order_seed = 0;
};

template <typename T>
inline T compose(const T& x, const CompositeSpec& cs, Rng& rng) {
  if (cs.specs.size() < 2 || cs.specs.size() > 4)
    throw InvalidConfig("composite: need 2 to 4 attacks");
  std::vector<AttackSpec> order = cs.specs;
  Rng order_rng(cs.order_seed);
  order_rng.shuffle(order);
  return apply_chain(x, order, rng);
}

// Chain strings look like "clip:0.5+noise:0.2+lowpass:5000"; echo takes an
// optional second parameter ("echo:0.3:2"). Missing parameters fall back to
// the prose defaults.
inline std::vector<AttackSpec> parse_chain(const std::string& text) {
  std::vector<AttackSpec> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '+')) {
    if (item.empty()) throw InvalidConfig("chain: empty attack entry");
    std::vector<std::string> parts;
    std::stringstream ps(item);
    std::string tok;
    while (std::getline(ps, tok, ':')) parts.push_back(tok);
    AttackKind kind;
    if (parts[0] == "clip") kind = AttackKind::Clip;
    else if (parts[0] == "noise") kind = AttackKind::Noise;
    else if (parts[0] == "time_mask") kind = AttackKind::TimeMask;
    else if (parts[0] == "amp_scale") kind = AttackKind::AmpScale;
    else if (parts[0] == "echo") kind = AttackKind::Echo;
    else if (parts[0] == "lowpass") kind = AttackKind::Lowpass;
    else throw InvalidConfig("chain: unknown attack '" + parts[0] + "'");
    AttackSpec spec = default_spec(kind);
    try {
      if (parts.size() > 1 && !parts[1].empty()) spec.p1 = std::stod(parts[1]);
      if (parts.size() > 2 && !parts[2].empty()) spec.p2 = std::stod(parts[2]);
    } catch (const std::exception&) {
      throw InvalidConfig("chain: bad parameter in '" + item + "'");
    }
    if (parts.size() > 3) throw InvalidConfig("chain: too many parameters in '" + item + "'");
    out.push_back(spec);
  }
  return out;
}

inline std::string print_chain(const std::vector<AttackSpec>& chain) {
  std::ostringstream os;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) os << '+';
    os << attack_name(chain[i].kind) << ':' << chain[i].p1;
    if (chain[i].kind == AttackKind::Echo && chain[i].p2 >= 0.0) os << ':' << chain[i].p2;
  }
  return os.str();
}

}  // namespace specmark
