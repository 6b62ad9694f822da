#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"
#include "specmark/rng.hpp"
#include "specmark/watermark.hpp"

namespace specmark {

// Scaled-down trainable embedder/extractor pair.
//
// Embedder: payload -> FC(N,64) -> ReLU -> FC(64,HW) -> 3x3 conv -> sigmoid
// pattern in [0,1]; a strength head FC(64,1) squashes into
// [alpha_min, alpha_max]. Embedding: LL + alpha_dyn * (2*pattern - 1).
// Extractor: 3x3 conv (1->8 channels) -> ReLU -> global average pool ->
// FC(8,N) -> sigmoid probabilities.
struct TinyNets {
  std::size_t n_bits = 0;
  std::size_t rows = 0, cols = 0;  // LL shape
  double alpha_min = 0.05, alpha_max = 0.6;

  static constexpr std::size_t kHidden = 64;
  static constexpr std::size_t kChannels = 8;

  // Embedder parameters.
  std::vector<double> w1, b1;  // kHidden x N, kHidden
  std::vector<double> w2, b2;  // HW x kHidden, HW
  std::vector<double> kc;      // 9 (single 3x3 kernel)
  double bc = 0.0;
  std::vector<double> ws;  // kHidden (strength head)
  double bs = 0.0;

  // Extractor parameters.
  std::vector<double> ke, be;    // kChannels x 9, kChannels
  std::vector<double> we, be2;   // N x kChannels, N

  TinyNets() = default;
  TinyNets(std::size_t n, std::size_t r, std::size_t c) : n_bits(n), rows(r), cols(c) {
    const std::size_t hw = r * c;
    w1.assign(kHidden * n, 0.0);
    b1.assign(kHidden, 0.0);
    w2.assign(hw * kHidden, 0.0);
    b2.assign(hw, 0.0);
    kc.assign(9, 0.0);
    ws.assign(kHidden, 0.0);
    ke.assign(kChannels * 9, 0.0);
    be.assign(kChannels, 0.0);
    we.assign(n * kChannels, 0.0);
    be2.assign(n, 0.0);
  }

  void init(Rng& rng, double scale = 0.1) {
    auto fill = [&](std::vector<double>& v, double s) {
      for (double& x : v) x = s * rng.gaussian();
    };
    fill(w1, scale);
    fill(b1, scale * 0.1);
    fill(w2, scale / std::sqrt(static_cast<double>(kHidden)));
    fill(b2, scale * 0.1);
    fill(kc, scale);
    bc = scale * 0.1 * rng.gaussian();
    fill(ws, scale);
    bs = scale * 0.1 * rng.gaussian();
    fill(ke, scale);
    fill(be, scale * 0.1);
    fill(we, scale);
    fill(be2, scale * 0.1);
  }

  std::vector<std::vector<double>*> embedder_tensors() {
    return {&w1, &b1, &w2, &b2, &kc, &ws};
  }
  std::vector<std::vector<double>*> extractor_tensors() { return {&ke, &be, &we, &be2}; }
};

struct TrainConfig {
  double lr = 1e-3;
  double lambda_emb = 2.0;
  double lambda_ext = 10.0;
  double lambda_tts = 1.0;  // term is identically zero in this toolkit
  int steps = 200;
  std::pair<double, double> alpha_anneal = {1.5, 1.0};

  void validate() const {
    if (!(lr > 0.0)) throw InvalidConfig("train config: lr must be positive");
    if (!(lambda_emb > 0.0) || !(lambda_ext >= 0.0))
      throw InvalidConfig("train config: loss weights must be positive");
    if (steps < 1) throw InvalidConfig("train config: need steps >= 1");
  }
};

namespace tiny_detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// 3x3 convolution, zero padding, same shape.
inline void conv3x3(const double* in, std::size_t rows, std::size_t cols, const double* k,
                    double bias, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double s = bias;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols))
            continue;
          s += in[static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc)] *
               k[(dr + 1) * 3 + (dc + 1)];
        }
      out[r * cols + c] = s;
    }
}

// Accumulate kernel/input gradients of the 3x3 convolution.
inline void conv3x3_backward(const double* in, std::size_t rows, std::size_t cols,
                             const double* k, const double* dout, double* dk, double* dbias,
                             double* din) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = dout[r * cols + c];
      if (dbias) *dbias += g;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols))
            continue;
          const std::size_t idx =
              static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
          if (dk) dk[(dr + 1) * 3 + (dc + 1)] += in[idx] * g;
          if (din) din[idx] += k[(dr + 1) * 3 + (dc + 1)] * g;
        }
    }
}

}  // namespace tiny_detail

struct TinyEmbedOut {
  Matrix pattern;     // entries in (0,1)
  double alpha_dyn;   // in [alpha_min, alpha_max]
};

inline TinyEmbedOut tiny_forward_embed(const TinyNets& nets, const Payload& m) {
  if (m.size() != nets.n_bits) throw ShapeError("tiny embed: payload length mismatch");
  const std::size_t H = TinyNets::kHidden, hw = nets.rows * nets.cols;
  std::vector<double> h(H);
  for (std::size_t i = 0; i < H; ++i) {
    double s = nets.b1[i];
    for (std::size_t j = 0; j < nets.n_bits; ++j) s += nets.w1[i * nets.n_bits + j] * m[j];
    h[i] = s > 0.0 ? s : 0.0;
  }
  std::vector<double> u(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    double s = nets.b2[i];
    for (std::size_t j = 0; j < H; ++j) s += nets.w2[i * H + j] * h[j];
    u[i] = s;
  }
  std::vector<double> v(hw);
  tiny_detail::conv3x3(u.data(), nets.rows, nets.cols, nets.kc.data(), nets.bc, v.data());
  TinyEmbedOut out;
  out.pattern = Matrix(nets.rows, nets.cols);
  for (std::size_t i = 0; i < hw; ++i) out.pattern.data()[i] = tiny_detail::sigmoid(v[i]);
  double s = nets.bs;
  for (std::size_t j = 0; j < H; ++j) s += nets.ws[j] * h[j];
  out.alpha_dyn = nets.alpha_min + (nets.alpha_max - nets.alpha_min) * tiny_detail::sigmoid(s);
  return out;
}

inline std::vector<double> tiny_forward_extract(const TinyNets& nets, const Matrix& ll) {
  if (ll.rows() != nets.rows || ll.cols() != nets.cols)
    throw ShapeError("tiny extract: LL shape mismatch");
  const std::size_t hw = nets.rows * nets.cols;
  std::vector<double> z(hw), pooled(TinyNets::kChannels);
  for (std::size_t ch = 0; ch < TinyNets::kChannels; ++ch) {
    tiny_detail::conv3x3(ll.data(), nets.rows, nets.cols, &nets.ke[ch * 9], nets.be[ch],
                         z.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += z[i] > 0.0 ? z[i] : 0.0;
    pooled[ch] = acc / static_cast<double>(hw);
  }
  std::vector<double> probs(nets.n_bits);
  for (std::size_t i = 0; i < nets.n_bits; ++i) {
    double s = nets.be2[i];
    for (std::size_t ch = 0; ch < TinyNets::kChannels; ++ch)
      s += nets.we[i * TinyNets::kChannels + ch] * pooled[ch];
    probs[i] = tiny_detail::sigmoid(s);
  }
  return probs;
}

// Flat parameter access in serialization order, scalars included.
namespace tiny_detail {

struct ParamView {
  std::vector<std::pair<double*, std::size_t>> blocks;
  std::size_t total = 0;
  double* at(std::size_t idx) {
    for (auto& [p, n] : blocks) {
      if (idx < n) return p + idx;
      idx -= n;
    }
    throw IndexError("tiny params: flat index out of range");
  }
};

inline ParamView param_view(TinyNets& n) {
  ParamView v;
  auto add = [&](double* p, std::size_t len) {
    v.blocks.push_back({p, len});
    v.total += len;
  };
  add(n.w1.data(), n.w1.size());
  add(n.b1.data(), n.b1.size());
  add(n.w2.data(), n.w2.size());
  add(n.b2.data(), n.b2.size());
  add(n.kc.data(), n.kc.size());
  add(&n.bc, 1);
  add(n.ws.data(), n.ws.size());
  add(&n.bs, 1);
  add(n.ke.data(), n.ke.size());
  add(n.be.data(), n.be.size());
  add(n.we.data(), n.we.size());
  add(n.be2.data(), n.be2.size());
  return v;
}

}  // namespace tiny_detail

// Joint loss lambda_emb * L_emb + lambda_ext * L_ext over a batch, with
// analytic gradients into a TinyNets-shaped accumulator. gamma scales the
// applied strength (annealing). The L_ext path backpropagates through the
// embedded LL, so embedder parameters feel both terms.
inline double tiny_loss_and_grad(const TinyNets& nets,
                                 const std::vector<std::pair<Matrix, Payload>>& batch,
                                 double lambda_emb, double lambda_ext, double gamma,
                                 TinyNets* grad) {
  if (batch.empty()) throw InvalidConfig("tiny loss: empty batch");
  const std::size_t H = TinyNets::kHidden, C = TinyNets::kChannels;
  const std::size_t hw = nets.rows * nets.cols;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (const auto& [ll, m] : batch) {
    if (ll.rows() != nets.rows || ll.cols() != nets.cols)
      throw ShapeError("tiny loss: LL shape mismatch");
    if (m.size() != nets.n_bits) throw ShapeError("tiny loss: payload length mismatch");

    // ---- embedder forward ----
    std::vector<double> h_pre(H), h(H);
    for (std::size_t i = 0; i < H; ++i) {
      double s = nets.b1[i];
      for (std::size_t j = 0; j < nets.n_bits; ++j) s += nets.w1[i * nets.n_bits + j] * m[j];
      h_pre[i] = s;
      h[i] = s > 0.0 ? s : 0.0;
    }
    std::vector<double> u(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      double s = nets.b2[i];
      for (std::size_t j = 0; j < H; ++j) s += nets.w2[i * H + j] * h[j];
      u[i] = s;
    }
    std::vector<double> v(hw), p(hw);
    tiny_detail::conv3x3(u.data(), nets.rows, nets.cols, nets.kc.data(), nets.bc, v.data());
    for (std::size_t i = 0; i < hw; ++i) p[i] = tiny_detail::sigmoid(v[i]);
    double s_pre = nets.bs;
    for (std::size_t j = 0; j < H; ++j) s_pre += nets.ws[j] * h[j];
    const double sg = tiny_detail::sigmoid(s_pre);
    const double alpha_dyn = nets.alpha_min + (nets.alpha_max - nets.alpha_min) * sg;

    std::vector<double> d(hw), llwm(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      d[i] = gamma * alpha_dyn * (2.0 * p[i] - 1.0);
      llwm[i] = ll.data()[i] + d[i];
    }

    double l_emb = 0.0;
    for (std::size_t i = 0; i < hw; ++i) l_emb += d[i] * d[i];
    l_emb /= static_cast<double>(hw);

    // ---- extractor forward ----
    std::vector<double> z(C * hw), pooled(C);
    for (std::size_t ch = 0; ch < C; ++ch) {
      tiny_detail::conv3x3(llwm.data(), nets.rows, nets.cols, &nets.ke[ch * 9], nets.be[ch],
                           &z[ch * hw]);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double zz = z[ch * hw + i];
        acc += zz > 0.0 ? zz : 0.0;
      }
      pooled[ch] = acc / static_cast<double>(hw);
    }
    std::vector<double> logit(nets.n_bits), q(nets.n_bits);
    for (std::size_t i = 0; i < nets.n_bits; ++i) {
      double s = nets.be2[i];
      for (std::size_t ch = 0; ch < C; ++ch) s += nets.we[i * C + ch] * pooled[ch];
      logit[i] = s;
      q[i] = tiny_detail::sigmoid(s);
    }
    const double l_ext = loss_ext(m, q);
    total += (lambda_emb * l_emb + lambda_ext * l_ext) * inv_batch;
    if (!grad) continue;

    // ---- extractor backward ----
    std::vector<double> dpooled(C, 0.0);
    for (std::size_t i = 0; i < nets.n_bits; ++i) {
      const double dlogit =
          lambda_ext * (q[i] - m[i]) / static_cast<double>(nets.n_bits) * inv_batch;
      grad->be2[i] += dlogit;
      for (std::size_t ch = 0; ch < C; ++ch) {
        grad->we[i * C + ch] += dlogit * pooled[ch];
        dpooled[ch] += dlogit * nets.we[i * C + ch];
      }
    }
    std::vector<double> dllwm(hw, 0.0), dz(hw);
    for (std::size_t ch = 0; ch < C; ++ch) {
      const double per = dpooled[ch] / static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) dz[i] = z[ch * hw + i] > 0.0 ? per : 0.0;
      tiny_detail::conv3x3_backward(llwm.data(), nets.rows, nets.cols, &nets.ke[ch * 9],
                                    dz.data(), &grad->ke[ch * 9], &grad->be[ch],
                                    dllwm.data());
    }

    // ---- embedder backward ----
    std::vector<double> dd(hw);
    for (std::size_t i = 0; i < hw; ++i)
      dd[i] = lambda_emb * 2.0 * d[i] / static_cast<double>(hw) * inv_batch + dllwm[i];
    double dalpha = 0.0;
    std::vector<double> dp(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      dalpha += dd[i] * gamma * (2.0 * p[i] - 1.0);
      dp[i] = dd[i] * gamma * alpha_dyn * 2.0;
    }
    const double ds_pre = dalpha * (nets.alpha_max - nets.alpha_min) * sg * (1.0 - sg);
    grad->bs += ds_pre;
    std::vector<double> dh(H, 0.0);
    for (std::size_t j = 0; j < H; ++j) {
      grad->ws[j] += ds_pre * h[j];
      dh[j] += ds_pre * nets.ws[j];
    }
    std::vector<double> dv(hw), du(hw, 0.0);
    for (std::size_t i = 0; i < hw; ++i) dv[i] = dp[i] * p[i] * (1.0 - p[i]);
    tiny_detail::conv3x3_backward(u.data(), nets.rows, nets.cols, nets.kc.data(), dv.data(),
                                  grad->kc.data(), &grad->bc, du.data());
    for (std::size_t i = 0; i < hw; ++i) {
      grad->b2[i] += du[i];
      for (std::size_t j = 0; j < H; ++j) {
        grad->w2[i * H + j] += du[i] * h[j];
        dh[j] += nets.w2[i * H + j] * du[i];
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      const double g = h_pre[i] > 0.0 ? dh[i] : 0.0;
      grad->b1[i] += g;
      for (std::size_t j = 0; j < nets.n_bits; ++j) grad->w1[i * nets.n_bits + j] += g * m[j];
    }
  }
  return total;
}

// Full-batch gradient descent. The extractor weight ramps in over the first
// quarter of the steps and the applied strength anneals linearly; the
// recorded history is always the fixed-weight evaluation loss so entries
// stay comparable across steps.
inline std::vector<double> train_tiny(TinyNets& nets,
                                      const std::vector<std::pair<Matrix, Payload>>& corpus,
                                      const TrainConfig& tc) {
  tc.validate();
  if (corpus.empty()) throw InvalidConfig("train: empty corpus");
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(tc.steps) + 1);
  const double ramp_steps = std::max(1.0, 0.25 * tc.steps);
  for (int step = 0; step < tc.steps; ++step) {
    const double frac = tc.steps > 1 ? static_cast<double>(step) / (tc.steps - 1) : 1.0;
    const double gamma =
        tc.alpha_anneal.first + (tc.alpha_anneal.second - tc.alpha_anneal.first) * frac;
    const double lam_ext = tc.lambda_ext * std::min(1.0, (step + 1) / ramp_steps);

    const double eval = tiny_loss_and_grad(nets, corpus, tc.lambda_emb, tc.lambda_ext,
                                           tc.alpha_anneal.second, nullptr);
    if (!std::isfinite(eval))
      throw DivergenceError("train: loss became non-finite", static_cast<std::size_t>(step));
    history.push_back(eval);

    TinyNets grad(nets.n_bits, nets.rows, nets.cols);
    tiny_loss_and_grad(nets, corpus, tc.lambda_emb, lam_ext, gamma, &grad);
    auto view_n = tiny_detail::param_view(nets);
    auto view_g = tiny_detail::param_view(grad);
    for (std::size_t b = 0; b < view_n.blocks.size(); ++b) {
      double* pn = view_n.blocks[b].first;
      const double* pg = view_g.blocks[b].first;
      for (std::size_t i = 0; i < view_n.blocks[b].second; ++i) pn[i] -= tc.lr * pg[i];
    }
  }
  const double final_eval = tiny_loss_and_grad(nets, corpus, tc.lambda_emb, tc.lambda_ext,
                                               tc.alpha_anneal.second, nullptr);
  if (!std::isfinite(final_eval))
    throw DivergenceError("train: loss became non-finite", static_cast<std::size_t>(tc.steps));
  history.push_back(final_eval);
  return history;
}

// TNW1 container: magic, u32 section count, then u32 length + float32 data
// per section. Sections follow the parameter order of param_view.
inline void save_tinynets(const std::string& path, TinyNets& nets) {
  auto view = tiny_detail::param_view(nets);
  std::string out = "TNW1";
  detail::put_u32(out, static_cast<std::uint32_t>(view.blocks.size()));
  for (auto& [p, n] : view.blocks) {
    detail::put_u32(out, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const float f = static_cast<float>(p[i]);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put_u32(out, u);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("save_tinynets: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("save_tinynets: short write");
}

// `nets` must already carry the right dims (N, LL shape); the file holds
// only raw parameter sections.
inline void load_tinynets(const std::string& path, TinyNets& nets) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_tinynets: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), "TNW1", 4) != 0)
    throw FormatError("load_tinynets: bad magic");
  auto view = tiny_detail::param_view(nets);
  const std::uint32_t sections = detail::get_u32(buf.data() + 4);
  if (sections != view.blocks.size()) throw FormatError("load_tinynets: wrong section count");
  std::size_t pos = 8;
  for (auto& [p, n] : view.blocks) {
    if (pos + 4 > buf.size()) throw FormatError("load_tinynets: truncated");
    const std::uint32_t len = detail::get_u32(buf.data() + pos);
    pos += 4;
    if (len != n) throw FormatError("load_tinynets: section length mismatch");
    if (pos + 4 * static_cast<std::size_t>(len) > buf.size())
      throw FormatError("load_tinynets: truncated");
    for (std::uint32_t i = 0; i < len; ++i) {
      std::uint32_t u = detail::get_u32(buf.data() + pos + 4 * i);
      float v;
      std::memcpy(&v, &u, 4);
      p[i] = static_cast<double>(v);
    }
    pos += 4 * static_cast<std::size_t>(len);
  }
  if (pos != buf.size()) throw FormatError("load_tinynets: trailing bytes");
}

}  // namespace specmark
