#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"

namespace specmark {

struct Schedule {
  int T = 0;
  std::vector<double> betas;       // beta_1 .. beta_T
  std::vector<double> alphas;      // 1 - beta_t
  std::vector<double> alpha_bars;  // cumulative products
};

inline Schedule make_schedule(int T, double beta_min, double beta_max) {
  if (T < 2) throw InvalidConfig("schedule: need T >= 2");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
    throw InvalidConfig("schedule: need 0 < beta_min <= beta_max < 1");
  Schedule s;
  s.T = T;
  s.betas.resize(static_cast<std::size_t>(T));
  s.alphas.resize(static_cast<std::size_t>(T));
  s.alpha_bars.resize(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double b = beta_min + (beta_max - beta_min) * static_cast<double>(t) / (T - 1);
    s.betas[static_cast<std::size_t>(t)] = b;
    s.alphas[static_cast<std::size_t>(t)] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bars[static_cast<std::size_t>(t)] = prod;
  }
  return s;
}

inline Schedule default_schedule() { return make_schedule(50, 1e-4, 0.05); }

// Analytic stand-in for a trained denoiser: the clean data distribution is
// N(mu, sigma_d^2 I), so every marginal and score is closed-form.
struct GaussianDataModel {
  Matrix mu;
  double sigma_d = 0.0;
};

// q(x_t | x_0): sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. t = 0 returns x0.
inline Matrix forward_noise(const Matrix& x0, int t, const Schedule& sched, Rng& rng) {
  if (t < 0 || t > sched.T) throw IndexError("forward_noise: t out of range");
  if (t == 0) return x0;
  const double ab = sched.alpha_bars[static_cast<std::size_t>(t - 1)];
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Matrix out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < x0.size(); ++i)
    out.data()[i] = a * x0.data()[i] + b * rng.gaussian();
  return out;
}

// Score of the diffused marginal N(sqrt(abar_t) mu, (abar_t sigma_d^2 +
// 1 - abar_t) I) at x_t.
inline Matrix analytic_score(const Matrix& x_t, int t, const GaussianDataModel& model,
                             const Schedule& sched) {
  if (t < 1 || t > sched.T) throw IndexError("analytic_score: t out of range");
  x_t.require_same_shape(model.mu);
  const double ab = sched.alpha_bars[static_cast<std::size_t>(t - 1)];
  const double var = ab * model.sigma_d * model.sigma_d + 1.0 - ab;
  const double root = std::sqrt(ab);
  Matrix out(x_t.rows(), x_t.cols());
  for (std::size_t i = 0; i < x_t.size(); ++i)
    out.data()[i] = -(x_t.data()[i] - root * model.mu.data()[i]) / var;
  return out;
}

// Watermarking hook: invoked exactly once per run, after `embed_step`
// completed reverse steps. embed_step = 0 transforms the initial noise,
// embed_step = T the final sample.
struct EmbedHook {
  int embed_step = 0;
  std::function<Matrix(const Matrix&)> fn;
};

// Ancestral sampling x_T -> x_0 with posterior variance beta_t and no noise
// on the final step. Returns the whole trace (T+1 states, hooked states
// recorded in place).
inline std::vector<Matrix> generate(const GaussianDataModel& model, const Schedule& sched,
                                    const EmbedHook* hook, Rng& rng) {
  if (hook && (hook->embed_step < 0 || hook->embed_step > sched.T))
    throw IndexError("generate: embed_step out of range");
  std::vector<Matrix> trace;
  trace.reserve(static_cast<std::size_t>(sched.T) + 1);

  Matrix x(model.mu.rows(), model.mu.cols());
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();

  auto apply_hook = [&](int completed) {
    if (hook && hook->fn && hook->embed_step == completed) {
      Matrix hooked = hook->fn(x);
      if (!hooked.same_shape(x)) throw ShapeError("generate: hook changed the shape");
      x = std::move(hooked);
    }
  };

  apply_hook(0);
  trace.push_back(x);

  for (int t = sched.T; t >= 1; --t) {
    const double beta = sched.betas[static_cast<std::size_t>(t - 1)];
    const double alpha = sched.alphas[static_cast<std::size_t>(t - 1)];
    const Matrix score = analytic_score(x, t, model, sched);
    const double inv_root = 1.0 / std::sqrt(alpha);
    for (std::size_t i = 0; i < x.size(); ++i)
      x.data()[i] = inv_root * (x.data()[i] + beta * score.data()[i]);
    if (t > 1) {
      const double sig = std::sqrt(beta);
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += sig * rng.gaussian();
    }
    apply_hook(sched.T - t + 1);
    trace.push_back(x);
  }
  return trace;
}

}  // namespace specmark
