#include "ssrc/recon_ops.hpp"

#include "helpers.hpp"
#include "ssrc/solvers.hpp"

using namespace ssrc;
using namespace test_helpers;

namespace {

// Central finite differences of a scalar-valued tape build w.r.t. one leaf.
template <typename Build>
double fd_max_rel_err(ad::Tensor input, Build build, double eps = 1e-6) {
  auto loss_at = [&](const ad::Tensor& x) {
    ad::Tape t;
    ad::Var v = t.leaf(x);
    return t.value(build(t, v)).data[0];
  };
  ad::Tape t;
  ad::Var v = t.leaf(input);
  t.backward(build(t, v));
  const ad::Tensor& g = t.grad(v);
  double worst = 0;
  for (size_t j = 0; j < input.size(); ++j) {
    ad::Tensor plus = input, minus = input;
    plus.data[j] += eps;
    minus.data[j] -= eps;
    double fd = (loss_at(plus) - loss_at(minus)) / (2 * eps);
    double denom = std::max({std::abs(fd), std::abs(g.data[j]), 1e-6});
    worst = std::max(worst, std::abs(fd - g.data[j]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("image/tensor conversion round-trips and validates shape") {
  Rng rng(1);
  ComplexImage img = random_image(6, 5, rng);
  ad::Tensor t = image_to_tensor(img);
  REQUIRE(t.shape == std::vector<int>{2, 6, 5});
  ComplexImage back = tensor_to_image(t);
  REQUIRE(max_abs_diff(back, img) == 0.0);
  REQUIRE_THROWS_AS(tensor_to_image(ad::Tensor({3, 4, 4})), std::invalid_argument);
  REQUIRE_THROWS_AS(tensor_to_image(ad::Tensor({8})), std::invalid_argument);
}

TEST_CASE("dc_loss value equals the direct residual norm") {
  Rng rng(2);
  auto op = std::make_shared<ForwardOperator>(random_mask(8, 8, 0.5, rng),
                                              random_maps(2, 8, 8, rng));
  auto y = std::make_shared<MultiCoilKSpace>(random_kspace(2, 8, 8, rng));
  ComplexImage xi = random_image(8, 8, rng);
  ad::Tape t;
  ad::Var loss = dc_loss(t, t.leaf(image_to_tensor(xi)), op, y);

  MultiCoilKSpace ax = apply_forward(*op, xi);
  double expect = 0;
  for (int i = 0; i < 2; ++i)
    for (size_t p = 0; p < ax.data[i].size(); ++p)
      expect += std::norm(ax.data[i][p] - y->data[i][p]);
  REQUIRE(std::abs(t.value(loss).data[0] - expect) < 1e-10 * std::max(1.0, expect));
}

TEST_CASE("dc_loss gradient matches finite differences") {
  Rng rng(3);
  auto op = std::make_shared<ForwardOperator>(random_mask(8, 8, 0.5, rng),
                                              random_maps(2, 8, 8, rng));
  auto y = std::make_shared<MultiCoilKSpace>(random_kspace(2, 8, 8, rng));
  ad::Tensor x = image_to_tensor(random_image(8, 8, rng));
  double err = fd_max_rel_err(
      x, [&](ad::Tape& t, ad::Var v) { return dc_loss(t, v, op, y); });
  REQUIRE(err < 1e-4);
}

TEST_CASE("dc_solve_node forward agrees with dc_solve") {
  SimProblem sp = make_sim_problem(16, 2, 2.0, 0.01, 4);
  auto op = std::make_shared<ForwardOperator>(make_operator(sp.problem));
  auto adj = std::make_shared<ComplexImage>(apply_adjoint(*op, sp.problem.kspace));
  Rng rng(5);
  ComplexImage xh = random_image(16, 16, rng);
  double lam = 0.2;

  ad::Tape t;
  ad::Var node = dc_solve_node(t, t.leaf(image_to_tensor(xh)),
                               t.leaf(ad::Tensor::scalar(lam)), op, adj, 400, 1e-12);
  ComplexImage direct = dc_solve(xh, sp.problem, lam, nullptr, 400, 1e-12);
  REQUIRE(max_abs_diff(tensor_to_image(t.value(node)), direct) < 1e-9);
}

TEST_CASE("dc_solve_node gradients (x_hat and lambda) match finite differences") {
  SimProblem sp = make_sim_problem(8, 2, 1.6, 0.01, 6);
  auto op = std::make_shared<ForwardOperator>(make_operator(sp.problem));
  auto adj = std::make_shared<ComplexImage>(apply_adjoint(*op, sp.problem.kspace));
  Rng rng(7);
  ComplexImage xh = random_image(8, 8, rng);
  ad::Tensor weights = ad::Tensor::randn({2, 8, 8}, rng);
  const double lam = 0.35;

  // scalar probe loss: <w, dc_solve(xhat, lam)>
  auto build = [&](ad::Tape& t, ad::Var vx, ad::Var vl) {
    ad::Var out = dc_solve_node(t, vx, vl, op, adj, 800, 1e-13);
    return ad::sum(t, ad::mul(t, out, t.leaf(weights)));
  };

  ad::Tape t;
  ad::Var vx = t.leaf(image_to_tensor(xh));
  ad::Var vl = t.leaf(ad::Tensor::scalar(lam));
  t.backward(build(t, vx, vl));
  const ad::Tensor gx = t.grad(vx);
  const double glam = t.grad(vl).data[0];

  auto loss_at = [&](const ComplexImage& x, double l) {
    ad::Tape tt;
    return tt.value(build(tt, tt.leaf(image_to_tensor(x)), tt.leaf(ad::Tensor::scalar(l))))
        .data[0];
  };
  const double eps = 1e-5;
  // spot-check a handful of x_hat coordinates plus the lambda scalar
  ad::Tensor xt = image_to_tensor(xh);
  for (size_t j : {size_t(0), size_t(13), size_t(40), size_t(77), size_t(100)}) {
    ad::Tensor plus = xt, minus = xt;
    plus.data[j] += eps;
    minus.data[j] -= eps;
    double fd = (loss_at(tensor_to_image(plus), lam) - loss_at(tensor_to_image(minus), lam)) /
                (2 * eps);
    REQUIRE(std::abs(fd - gx.data[j]) < 1e-3 * std::max({std::abs(fd), std::abs(gx.data[j]), 1e-3}));
  }
  double fd_lam = (loss_at(xh, lam + eps) - loss_at(xh, lam - eps)) / (2 * eps);
  REQUIRE(std::abs(fd_lam - glam) < 1e-3 * std::max({std::abs(fd_lam), std::abs(glam), 1e-3}));
}

TEST_CASE("ssdu_split_loss value matches a direct computation") {
  SimProblem sp = make_sim_problem(16, 2, 2.0, 0.02, 8);
  SplitPair split = ssdu_split(sp.problem.mask, 0.6, 3);
  auto op_l = std::make_shared<ForwardOperator>(split.lambda_mask, sp.problem.maps);
  auto y_l =
      std::make_shared<MultiCoilKSpace>(restrict_kspace(sp.problem.kspace, split.lambda_mask));
  Rng rng(9);
  ComplexImage xi = random_image(16, 16, rng);

  ad::Tape t;
  ad::Var loss = ssdu_split_loss(t, t.leaf(image_to_tensor(xi)), op_l, y_l);

  MultiCoilKSpace ax = apply_forward(*op_l, xi);
  double r2 = 0, r1 = 0, y2 = 0, y1 = 0;
  for (int i = 0; i < ax.num_coils; ++i)
    for (size_t p = 0; p < ax.data[i].size(); ++p) {
      if (!split.lambda_mask.values[p]) continue;
      cplx d = ax.data[i][p] - y_l->data[i][p];
      r2 += std::norm(d);
      r1 += std::abs(d);
      y2 += std::norm(y_l->data[i][p]);
      y1 += std::abs(y_l->data[i][p]);
    }
  double expect = 0.5 * std::sqrt(r2) / std::sqrt(y2) + 0.5 * r1 / y1;
  REQUIRE(std::abs(t.value(loss).data[0] - expect) < 1e-12);
}

TEST_CASE("ssdu_split_loss gradient matches finite differences") {
  SimProblem sp = make_sim_problem(8, 2, 1.6, 0.02, 10);
  SplitPair split = ssdu_split(sp.problem.mask, 0.5, 4);
  auto op_l = std::make_shared<ForwardOperator>(split.lambda_mask, sp.problem.maps);
  auto y_l =
      std::make_shared<MultiCoilKSpace>(restrict_kspace(sp.problem.kspace, split.lambda_mask));
  Rng rng(11);
  ad::Tensor x = image_to_tensor(random_image(8, 8, rng));
  double err = fd_max_rel_err(
      x, [&](ad::Tape& t, ad::Var v) { return ssdu_split_loss(t, v, op_l, y_l); });
  REQUIRE(err < 1e-5);
}

TEST_CASE("ssdu_split_loss rejects an empty held-out set") {
  Rng rng(12);
  auto op_l = std::make_shared<ForwardOperator>(SamplingMask(8, 8), random_maps(2, 8, 8, rng));
  auto y_l = std::make_shared<MultiCoilKSpace>(2, 8, 8);
  ad::Tape t;
  ad::Var x = t.leaf(image_to_tensor(random_image(8, 8, rng)));
  REQUIRE_THROWS_AS(ssdu_split_loss(t, x, op_l, y_l), std::runtime_error);
}
