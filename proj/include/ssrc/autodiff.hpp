#ifndef SSRC_AUTODIFF_HPP
#define SSRC_AUTODIFF_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrc/rng.hpp"

namespace ssrc::ad {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }

  static size_t count(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= size_t(d);
    return n;
  }
  size_t size() const { return data.size(); }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }
  static Tensor randn(std::vector<int> s, Rng& rng, double std = 1.0) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = std * rng.gaussian();
    return t;
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Dynamic (define-by-run) tape. Node creation order is a topological order,
// so reverse traversal implements the chain rule.
class Tape {
 public:
  using Var = int;

  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily in backward()
    std::vector<Var> inputs;
    std::function<void(Tape&, Var)> backprop;  // accumulates into input grads
  };

  Var leaf(Tensor t) {
    nodes_.push_back(Node{std::move(t), {}, {}, nullptr});
    return Var(nodes_.size() - 1);
  }

  Var record(Tensor value, std::vector<Var> inputs, std::function<void(Tape&, Var)> backprop) {
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(backprop)});
    return Var(nodes_.size() - 1);
  }

  const Tensor& value(Var v) const { return nodes_.at(v).value; }
  Tensor& mutable_value(Var v) { return nodes_.at(v).value; }

  Tensor& grad(Var v) {
    Node& n = nodes_.at(v);
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  // Reverse-mode sweep from a scalar loss node.
  void backward(Var loss) {
    if (loss < 0 || loss >= Var(nodes_.size()))
      throw std::invalid_argument("backward: loss not on tape");
    if (nodes_[loss].value.size() != 1)
      throw std::invalid_argument("backward: loss is not a scalar");
    grad(loss).data[0] = 1.0;
    for (Var v = loss; v >= 0; --v) {
      Node& n = nodes_[v];
      if (n.backprop && !n.grad.data.empty()) n.backprop(*this, v);
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

using Var = Tape::Var;

// ---- elementwise ----

inline Var add(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "add");
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += t.value(b).data[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "sub");
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= t.value(b).data[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  });
}

inline Var mul(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "mul");
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= t.value(b).data[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * vb.data[i];
      gb.data[i] += g.data[i] * va.data[i];
    }
  });
}

inline Var scale(Tape& t, Var a, double c) {
  Tensor out = t.value(a);
  for (double& v : out.data) v *= c;
  return t.record(std::move(out), {a}, [a, c](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
  });
}

inline Var relu(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.data) v = v > 0 ? v : 0.0;
  return t.record(std::move(out), {a}, [a](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < g.size(); ++i)
      if (va.data[i] > 0) ga.data[i] += g.data[i];
  });
}

// ---- reductions ----

inline Var sum(Tape& t, Var a) {
  double s = std::accumulate(t.value(a).data.begin(), t.value(a).data.end(), 0.0);
  return t.record(Tensor::scalar(s), {a}, [a](Tape& t, Var self) {
    double g = t.grad(self).data[0];
    Tensor& ga = t.grad(a);
    for (double& v : ga.data) v += g;
  });
}

inline Var sum_sq(Tape& t, Var a) {
  const Tensor& va = t.value(a);
  double s = 0;
  for (double v : va.data) s += v * v;
  return t.record(Tensor::scalar(s), {a}, [a](Tape& t, Var self) {
    double g = t.grad(self).data[0];
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.size(); ++i) ga.data[i] += 2.0 * g * va.data[i];
  });
}

inline Var sum_abs(Tape& t, Var a) {
  const Tensor& va = t.value(a);
  double s = 0;
  for (double v : va.data) s += std::abs(v);
  return t.record(Tensor::scalar(s), {a}, [a](Tape& t, Var self) {
    double g = t.grad(self).data[0];
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.size(); ++i)
      ga.data[i] += g * (va.data[i] > 0 ? 1.0 : (va.data[i] < 0 ? -1.0 : 0.0));
  });
}

// ---- shape ops on {C,H,W} tensors ----

inline void check_chw(const Tensor& x, const char* op) {
  if (x.shape.size() != 3) throw std::invalid_argument(std::string(op) + ": expected {C,H,W}");
}

inline Var concat_channels(Tape& t, Var a, Var b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  check_chw(va, "concat");
  check_chw(vb, "concat");
  if (va.shape[1] != vb.shape[1] || va.shape[2] != vb.shape[2])
    throw std::invalid_argument("concat: spatial shape mismatch");
  Tensor out({va.shape[0] + vb.shape[0], va.shape[1], va.shape[2]});
  std::copy(va.data.begin(), va.data.end(), out.data.begin());
  std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.size());
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += g.data[i];
    for (size_t i = 0; i < gb.size(); ++i) gb.data[i] += g.data[ga.size() + i];
  });
}

// conv2d, stride 1, zero padding (k-1)/2 — spatial size preserved. k in {1,3}.
inline Var conv2d(Tape& t, Var x, Var w, Var b) {
  const Tensor& vx = t.value(x);
  const Tensor& vw = t.value(w);
  const Tensor& vb = t.value(b);
  check_chw(vx, "conv2d");
  if (vw.shape.size() != 4) throw std::invalid_argument("conv2d: weight must be {Co,Ci,k,k}");
  const int ci = vx.shape[0], h = vx.shape[1], wd = vx.shape[2];
  const int co = vw.shape[0], k = vw.shape[2];
  if (vw.shape[1] != ci || vw.shape[3] != k)
    throw std::invalid_argument("conv2d: weight/input channel mismatch");
  if (vb.shape != std::vector<int>{co})
    throw std::invalid_argument("conv2d: bias shape mismatch");
  const int pad = (k - 1) / 2;

  Tensor out({co, h, wd});
  for (int oc = 0; oc < co; ++oc) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < wd; ++c) {
        double acc = vb.data[oc];
        for (int ic = 0; ic < ci; ++ic)
          for (int kr = 0; kr < k; ++kr) {
            int rr = r + kr - pad;
            if (rr < 0 || rr >= h) continue;
            for (int kc = 0; kc < k; ++kc) {
              int cc = c + kc - pad;
              if (cc < 0 || cc >= wd) continue;
              acc += vx.data[(size_t(ic) * h + rr) * wd + cc] *
                     vw.data[((size_t(oc) * ci + ic) * k + kr) * k + kc];
            }
          }
        out.data[(size_t(oc) * h + r) * wd + c] = acc;
      }
  }
  return t.record(std::move(out), {x, w, b},
                  [x, w, b, ci, co, h, wd, k, pad](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    Tensor& gx = t.grad(x);
    Tensor& gw = t.grad(w);
    Tensor& gb = t.grad(b);
    for (int oc = 0; oc < co; ++oc)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < wd; ++c) {
          double go = g.data[(size_t(oc) * h + r) * wd + c];
          if (go == 0.0) continue;
          gb.data[oc] += go;
          for (int ic = 0; ic < ci; ++ic)
            for (int kr = 0; kr < k; ++kr) {
              int rr = r + kr - pad;
              if (rr < 0 || rr >= h) continue;
              for (int kc = 0; kc < k; ++kc) {
                int cc = c + kc - pad;
                if (cc < 0 || cc >= wd) continue;
                size_t xi = (size_t(ic) * h + rr) * wd + cc;
                size_t wi = ((size_t(oc) * ci + ic) * k + kr) * k + kc;
                gx.data[xi] += go * vw.data[wi];
                gw.data[wi] += go * vx.data[xi];
              }
            }
        }
  });
}

// Bilinear x2 upsampling (half-pixel centers, clamped borders).
inline Var bilinear_upsample_x2(Tape& t, Var x) {
  const Tensor& vx = t.value(x);
  check_chw(vx, "bilinear_upsample_x2");
  const int c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  const int oh = 2 * h, ow = 2 * w;

  // precompute per output-pixel source taps (shared across channels)
  auto taps_1d = [](int out_n, int in_n) {
    std::vector<std::array<std::pair<int, double>, 2>> taps(out_n);
    for (int o = 0; o < out_n; ++o) {
      double src = (o + 0.5) / 2.0 - 0.5;
      int i0 = int(std::floor(src));
      double f = src - i0;
      int a = std::clamp(i0, 0, in_n - 1);
      int b = std::clamp(i0 + 1, 0, in_n - 1);
      taps[o] = {std::make_pair(a, 1.0 - f), std::make_pair(b, f)};
    }
    return taps;
  };
  auto rt = taps_1d(oh, h);
  auto ct = taps_1d(ow, w);

  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int cc = 0; cc < ow; ++cc) {
        double acc = 0;
        for (auto [ri, rw] : rt[r])
          for (auto [cj, cw] : ct[cc])
            acc += rw * cw * vx.data[(size_t(ch) * h + ri) * w + cj];
        out.data[(size_t(ch) * oh + r) * ow + cc] = acc;
      }
  return t.record(std::move(out), {x}, [x, c, h, w, oh, ow, rt, ct](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < oh; ++r)
        for (int cc = 0; cc < ow; ++cc) {
          double go = g.data[(size_t(ch) * oh + r) * ow + cc];
          if (go == 0.0) continue;
          for (auto [ri, rw] : rt[r])
            for (auto [cj, cw] : ct[cc])
              gx.data[(size_t(ch) * h + ri) * w + cj] += go * rw * cw;
        }
  });
}

// 2x2 average pooling, stride 2. Requires even spatial dims.
inline Var avgpool_x2(Tape& t, Var x) {
  const Tensor& vx = t.value(x);
  check_chw(vx, "avgpool_x2");
  const int c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  if (h % 2 || w % 2) throw std::invalid_argument("avgpool_x2: odd spatial dims");
  const int oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int cc = 0; cc < ow; ++cc) {
        const double* base = &vx.data[(size_t(ch) * h + 2 * r) * w + 2 * cc];
        out.data[(size_t(ch) * oh + r) * ow + cc] =
            0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
      }
  return t.record(std::move(out), {x}, [x, c, h, w, oh, ow](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < oh; ++r)
        for (int cc = 0; cc < ow; ++cc) {
          double go = 0.25 * g.data[(size_t(ch) * oh + r) * ow + cc];
          double* base = &gx.data[(size_t(ch) * h + 2 * r) * w + 2 * cc];
          base[0] += go;
          base[1] += go;
          base[w] += go;
          base[w + 1] += go;
        }
  });
}

// Per-channel standardization over the spatial dims with learnable affine.
inline Var channel_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5) {
  const Tensor& vx = t.value(x);
  check_chw(vx, "channel_norm");
  const int c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  const size_t n = size_t(h) * w;
  if (t.value(gamma).shape != std::vector<int>{c} ||
      t.value(beta).shape != std::vector<int>{c})
    throw std::invalid_argument("channel_norm: affine shape mismatch");

  Tensor out(vx.shape);
  std::vector<double> inv_std(c), mean(c);
  for (int ch = 0; ch < c; ++ch) {
    const double* xd = &vx.data[size_t(ch) * n];
    double mu = 0;
    for (size_t i = 0; i < n; ++i) mu += xd[i];
    mu /= double(n);
    double var = 0;
    for (size_t i = 0; i < n; ++i) var += (xd[i] - mu) * (xd[i] - mu);
    var /= double(n);
    mean[ch] = mu;
    inv_std[ch] = 1.0 / std::sqrt(var + eps);
    double gm = t.value(gamma).data[ch], bt = t.value(beta).data[ch];
    for (size_t i = 0; i < n; ++i)
      out.data[size_t(ch) * n + i] = gm * (xd[i] - mu) * inv_std[ch] + bt;
  }
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, c, n, mean, inv_std](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    const Tensor& vx = t.value(x);
    const Tensor& vgamma = t.value(gamma);
    Tensor& gx = t.grad(x);
    Tensor& ggamma = t.grad(gamma);
    Tensor& gbeta = t.grad(beta);
    for (int ch = 0; ch < c; ++ch) {
      const double* xd = &vx.data[size_t(ch) * n];
      const double* gd = &g.data[size_t(ch) * n];
      double gm = vgamma.data[ch];
      double sum_g = 0, sum_gy = 0;
      for (size_t i = 0; i < n; ++i) {
        double y = (xd[i] - mean[ch]) * inv_std[ch];
        sum_g += gd[i];
        sum_gy += gd[i] * y;
      }
      ggamma.data[ch] += sum_gy;
      gbeta.data[ch] += sum_g;
      double mg = sum_g / double(n), mgy = sum_gy / double(n);
      for (size_t i = 0; i < n; ++i) {
        double y = (xd[i] - mean[ch]) * inv_std[ch];
        gx.data[size_t(ch) * n + i] += gm * inv_std[ch] * (gd[i] - mg - y * mgy);
      }
    }
  });
}

// ---- Adam ----

struct AdamState {
  int64_t step = 0;
  std::vector<Tensor> m, v;  // one slot per parameter tensor
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                      AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: param/grad count mismatch");
  if (state.m.empty()) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->shape);
      state.v.emplace_back(p->shape);
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    check_same_shape(p, g, "adam_step");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g.data[j];
      v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g.data[j] * g.data[j];
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      p.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace ssrc::ad

#endif
