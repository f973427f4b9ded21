#include "ssrc/autodiff.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ssrc;
using namespace ssrc::ad;

namespace {

Tensor randn(std::vector<int> shape, uint64_t seed, double std = 1.0) {
  Rng rng(seed);
  return Tensor::randn(std::move(shape), rng, std);
}

// Builds loss = <w, op(inputs)> on a fresh tape and returns (loss value,
// gradients of each input). `build` maps input vars to the op output var.
struct FdCase {
  std::vector<Tensor> inputs;
  std::function<Var(Tape&, const std::vector<Var>&)> build;
  Tensor weights;  // same shape as the op output

  double loss_at(const std::vector<Tensor>& ins) const {
    Tape t;
    std::vector<Var> vars;
    for (const Tensor& x : ins) vars.push_back(t.leaf(x));
    Var out = build(t, vars);
    Var w = t.leaf(weights);
    return t.value(sum(t, mul(t, out, w))).data[0];
  }

  std::vector<Tensor> tape_grads() const {
    Tape t;
    std::vector<Var> vars;
    for (const Tensor& x : inputs) vars.push_back(t.leaf(x));
    Var out = build(t, vars);
    Var w = t.leaf(weights);
    Var loss = sum(t, mul(t, out, w));
    t.backward(loss);
    std::vector<Tensor> gs;
    for (Var v : vars) gs.push_back(t.grad(v));
    return gs;
  }
};

// max relative error of analytic vs central finite differences
double fd_check(const FdCase& fc, double eps = 1e-5) {
  std::vector<Tensor> gs = fc.tape_grads();
  double worst = 0;
  for (size_t vi = 0; vi < fc.inputs.size(); ++vi) {
    for (size_t j = 0; j < fc.inputs[vi].size(); ++j) {
      std::vector<Tensor> plus = fc.inputs, minus = fc.inputs;
      plus[vi].data[j] += eps;
      minus[vi].data[j] -= eps;
      double fd = (fc.loss_at(plus) - fc.loss_at(minus)) / (2 * eps);
      double g = gs[vi].data[j];
      double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
      worst = std::max(worst, std::abs(fd - g) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("relu forward") {
  Tape t;
  Tensor x({3});
  x.data = {-1.0, 0.0, 2.0};
  Var y = relu(t, t.leaf(x));
  REQUIRE(t.value(y).data == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("1x1 conv with identity weights is the identity") {
  const int c = 3, h = 4, w = 4;
  Tensor x = randn({c, h, w}, 10);
  Tensor wt({c, c, 1, 1});
  for (int i = 0; i < c; ++i) wt.data[size_t(i) * c + i] = 1.0;
  Tape t;
  Var y = conv2d(t, t.leaf(x), t.leaf(wt), t.leaf(Tensor({c})));
  for (size_t i = 0; i < x.size(); ++i) REQUIRE(t.value(y).data[i] == x.data[i]);
}

TEST_CASE("3x3 conv matches a sliding-window sum oracle on 5x5") {
  Tensor x = randn({1, 5, 5}, 11);
  Tensor wt = randn({1, 1, 3, 3}, 12);
  Tensor b({1});
  b.data[0] = 0.37;
  Tape t;
  Var y = conv2d(t, t.leaf(x), t.leaf(wt), t.leaf(b));
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      double acc = b.data[0];
      for (int kr = -1; kr <= 1; ++kr)
        for (int kc = -1; kc <= 1; ++kc) {
          int rr = r + kr, cc = c + kc;
          if (rr < 0 || rr >= 5 || cc < 0 || cc >= 5) continue;
          acc += x.data[size_t(rr) * 5 + cc] * wt.data[size_t(kr + 1) * 3 + (kc + 1)];
        }
      REQUIRE(std::abs(t.value(y).data[size_t(r) * 5 + c] - acc) < 1e-12);
    }
}

TEST_CASE("sum gradient is all ones; sum_sq gradient is 2x") {
  Tensor x = randn({7}, 13);
  {
    Tape t;
    Var v = t.leaf(x);
    t.backward(sum(t, v));
    for (double g : t.grad(v).data) REQUIRE(g == 1.0);
  }
  {
    Tape t;
    Var v = t.leaf(x);
    t.backward(sum_sq(t, v));
    for (size_t i = 0; i < x.size(); ++i)
      REQUIRE(std::abs(t.grad(v).data[i] - 2 * x.data[i]) < 1e-12);
  }
}

TEST_CASE("finite differences: elementwise and reduction ops") {
  auto shifted = [](Tensor t) {  // keep relu/abs inputs away from their kinks
    for (double& v : t.data) v += (v >= 0 ? 0.5 : -0.5);
    return t;
  };
  std::vector<FdCase> cases;
  cases.push_back({{randn({2, 3, 3}, 20), randn({2, 3, 3}, 21)},
                   [](Tape& t, const std::vector<Var>& v) { return add(t, v[0], v[1]); },
                   randn({2, 3, 3}, 22)});
  cases.push_back({{randn({2, 3, 3}, 23), randn({2, 3, 3}, 24)},
                   [](Tape& t, const std::vector<Var>& v) { return sub(t, v[0], v[1]); },
                   randn({2, 3, 3}, 25)});
  cases.push_back({{randn({2, 3, 3}, 26), randn({2, 3, 3}, 27)},
                   [](Tape& t, const std::vector<Var>& v) { return mul(t, v[0], v[1]); },
                   randn({2, 3, 3}, 28)});
  cases.push_back({{randn({2, 3, 3}, 29)},
                   [](Tape& t, const std::vector<Var>& v) { return scale(t, v[0], -1.7); },
                   randn({2, 3, 3}, 30)});
  cases.push_back({{shifted(randn({2, 3, 3}, 31))},
                   [](Tape& t, const std::vector<Var>& v) { return relu(t, v[0]); },
                   randn({2, 3, 3}, 32)});
  Tensor ones({1}, 1.0);
  cases.push_back({{shifted(randn({9}, 33))},
                   [](Tape& t, const std::vector<Var>& v) { return sum_abs(t, v[0]); },
                   ones});
  cases.push_back({{randn({2, 4, 4}, 34), randn({3, 4, 4}, 35)},
                   [](Tape& t, const std::vector<Var>& v) {
                     return concat_channels(t, v[0], v[1]);
                   },
                   randn({5, 4, 4}, 36)});
  for (const FdCase& fc : cases) REQUIRE(fd_check(fc) < 1e-4);
}

TEST_CASE("finite differences: conv2d, upsample, pool, channel_norm") {
  std::vector<FdCase> cases;
  cases.push_back({{randn({2, 4, 4}, 40), randn({3, 2, 3, 3}, 41, 0.4), randn({3}, 42)},
                   [](Tape& t, const std::vector<Var>& v) {
                     return conv2d(t, v[0], v[1], v[2]);
                   },
                   randn({3, 4, 4}, 43)});
  cases.push_back({{randn({3, 4, 4}, 44), randn({2, 3, 1, 1}, 45, 0.6), randn({2}, 46)},
                   [](Tape& t, const std::vector<Var>& v) {
                     return conv2d(t, v[0], v[1], v[2]);
                   },
                   randn({2, 4, 4}, 47)});
  cases.push_back({{randn({2, 3, 3}, 48)},
                   [](Tape& t, const std::vector<Var>& v) {
                     return bilinear_upsample_x2(t, v[0]);
                   },
                   randn({2, 6, 6}, 49)});
  cases.push_back({{randn({2, 4, 4}, 50)},
                   [](Tape& t, const std::vector<Var>& v) { return avgpool_x2(t, v[0]); },
                   randn({2, 2, 2}, 51)});
  cases.push_back({{randn({3, 4, 4}, 52), randn({3}, 53, 0.5), randn({3}, 54, 0.5)},
                   [](Tape& t, const std::vector<Var>& v) {
                     return channel_norm(t, v[0], v[1], v[2]);
                   },
                   randn({3, 4, 4}, 55)});
  for (const FdCase& fc : cases) REQUIRE(fd_check(fc) < 1e-4);
}

TEST_CASE("composite network gradient matches finite differences") {
  FdCase fc{{randn({2, 4, 4}, 60), randn({4, 2, 3, 3}, 61, 0.4), randn({4}, 62),
             randn({4}, 63, 0.3), randn({4}, 64, 0.3)},
            [](Tape& t, const std::vector<Var>& v) {
              Var x = conv2d(t, v[0], v[1], v[2]);
              x = relu(t, x);
              x = bilinear_upsample_x2(t, x);
              x = channel_norm(t, x, v[3], v[4]);
              return avgpool_x2(t, x);
            },
            randn({4, 4, 4}, 65)};
  REQUIRE(fd_check(fc) < 1e-4);
}

TEST_CASE("nodes not contributing to the loss get zero gradient") {
  Tape t;
  Var a = t.leaf(randn({4}, 70));
  Var b = t.leaf(randn({4}, 71));
  Var unused = mul(t, b, b);
  (void)unused;
  t.backward(sum_sq(t, a));
  for (double g : t.grad(b).data) REQUIRE(g == 0.0);
}

TEST_CASE("backward error cases") {
  Tape t;
  Var a = t.leaf(randn({4}, 72));
  REQUIRE_THROWS_AS(t.backward(a), std::invalid_argument);        // non-scalar
  REQUIRE_THROWS_AS(t.backward(Var(99)), std::invalid_argument);  // not on tape
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = randn({5}, 80);
  Tensor p0 = p;
  Tensor g({5});
  AdamState st;
  std::vector<Tensor*> ps{&p};
  std::vector<const Tensor*> gs{&g};
  for (int i = 0; i < 3; ++i) adam_step(ps, gs, st, AdamConfig{});
  REQUIRE(p.data == p0.data);
  REQUIRE(st.step == 3);
}

TEST_CASE("adam: hand-computed bias-corrected first step") {
  Tensor p({1});
  p.data[0] = 1.0;
  Tensor g({1});
  g.data[0] = 0.1;
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.01;
  std::vector<Tensor*> ps{&p};
  std::vector<const Tensor*> gs{&g};
  adam_step(ps, gs, st, cfg);
  // mhat = g, vhat = g^2 after bias correction; delta = -lr*g/(|g|+eps)
  double expect = 1.0 - 0.01 * 0.1 / (0.1 + 1e-8);
  REQUIRE(std::abs(p.data[0] - expect) < 1e-9);
}

TEST_CASE("tape replay determinism: identical losses and gradients") {
  auto run = [] {
    Tape t;
    Var x = t.leaf(randn({2, 4, 4}, 90));
    Var w = t.leaf(randn({2, 2, 3, 3}, 91, 0.4));
    Var b = t.leaf(randn({2}, 92));
    Var loss = sum_sq(t, relu(t, conv2d(t, x, w, b)));
    t.backward(loss);
    std::vector<double> out = t.value(loss).data;
    for (Var v : {x, w, b})
      out.insert(out.end(), t.grad(v).data.begin(), t.grad(v).data.end());
    return out;
  };
  REQUIRE(run() == run());
}
