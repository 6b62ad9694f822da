#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"

namespace specmark {

// Pr(X >= k) for X ~ Binomial(N, p). Exact summation, no normal
// approximation: N stays small enough that extended-precision log-space
// terms with compensated accumulation hold 1e-12 absolute error.
inline double binom_tail(int n, int k, double p) {
  if (n < 0 || k < 0 || k > n || !(p >= 0.0 && p <= 1.0))
    throw InvalidConfig("binom_tail: need 0 <= k <= N and p in [0,1]");
  if (k == 0) return 1.0;
  if (p == 0.0) return 0.0;  // k >= 1 here
  if (p == 1.0) return 1.0;
  if (k == n) {
    // Single term p^N; repeated multiplication keeps dyadic p exact.
    long double t = 1.0L;
    for (int i = 0; i < n; ++i) t *= static_cast<long double>(p);
    return static_cast<double>(t);
  }
  const long double lp = std::log(static_cast<long double>(p));
  const long double lq = std::log1p(static_cast<long double>(-p));
  const long double lgn = std::lgammal(static_cast<long double>(n) + 1.0L);
  long double sum = 0.0L, comp = 0.0L;  // Kahan
  for (int i = k; i <= n; ++i) {
    const long double lt = lgn - std::lgammal(static_cast<long double>(i) + 1.0L) -
                           std::lgammal(static_cast<long double>(n - i) + 1.0L) +
                           static_cast<long double>(i) * lp +
                           static_cast<long double>(n - i) * lq;
    const long double t = std::exp(lt);
    const long double y = t - comp;
    const long double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  if (sum > 1.0L) sum = 1.0L;
  return static_cast<double>(sum);
}

struct Threshold {
  int k = 0;
  double tau = 0.0;
  bool unsatisfiable = false;  // fpr_bound below 2^-N; k=N returned anyway
};

// Smallest k whose H0 tail probability stays within fpr_bound; tau = k/N.
inline Threshold solve_threshold(int n, double fpr_bound) {
  if (n <= 0 || !(fpr_bound >= 0.0)) throw InvalidConfig("solve_threshold: bad arguments");
  for (int k = 0; k <= n; ++k) {
    if (binom_tail(n, k, 0.5) <= fpr_bound)
      return {k, static_cast<double>(k) / n, false};
  }
  return {n, 1.0, true};
}

// Pr(X < k) under the H1 success probability p1.
inline double fnr(int n, int k, double p1) { return 1.0 - binom_tail(n, k, p1); }

inline double bit_accuracy(const std::vector<int>& m, const std::vector<int>& m_prime) {
  if (m.size() != m_prime.size() || m.empty())
    throw ShapeError("bit_accuracy: payload lengths differ");
  std::size_t match = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] == m_prime[i]) ++match;
  return static_cast<double>(match) / static_cast<double>(m.size());
}

struct VerificationReport {
  int n_bits = 0;
  int matched = 0;
  double accuracy = 0.0;
  double threshold_tau = 0.0;
  double p_value = 1.0;
  bool watermarked = false;
};

inline VerificationReport verify(const std::vector<int>& m, const std::vector<int>& m_prime,
                                 double tau) {
  VerificationReport r;
  r.n_bits = static_cast<int>(m.size());
  r.accuracy = bit_accuracy(m, m_prime);
  r.matched = static_cast<int>(std::lround(r.accuracy * r.n_bits));
  r.threshold_tau = tau;
  r.p_value = binom_tail(r.n_bits, r.matched, 0.5);
  r.watermarked = r.accuracy >= tau;
  return r;
}

inline std::string format_report(const VerificationReport& r) {
  std::ostringstream os;
  os << "n=" << r.n_bits << " k=" << r.matched << " acc=" << r.accuracy
     << " tau=" << r.threshold_tau << " p=" << r.p_value
     << " decision=" << (r.watermarked ? "watermarked" : "not_watermarked");
  return os.str();
}

inline double ll_mse(const Matrix& a, const Matrix& b) { return mean_sq_diff(a, b); }

// Signal-to-distortion in dB; identical inputs report +inf.
inline double spectral_snr(const Matrix& ref, const Matrix& test) {
  ref.require_same_shape(test);
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref.data()[i] - test.data()[i];
    sig += ref.data()[i] * ref.data()[i];
    err += d * d;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

}  // namespace specmark
