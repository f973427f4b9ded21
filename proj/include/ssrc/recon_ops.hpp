#ifndef SSRC_RECON_OPS_HPP
#define SSRC_RECON_OPS_HPP

// Tape nodes that bridge the real-valued autodiff stack and the complex
// forward model. Complex arithmetic stays on this side; gradients are the
// closed-form adjoint expressions, so the FFT itself is never taped.

#include <memory>

#include "ssrc/autodiff.hpp"
#include "ssrc/cg.hpp"
#include "ssrc/forward_model.hpp"

namespace ssrc {

inline ad::Tensor image_to_tensor(const ComplexImage& img) {
  ad::Tensor t({2, img.height, img.width});
  const size_t n = img.data.size();
  for (size_t i = 0; i < n; ++i) {
    t.data[i] = img.data[i].real();
    t.data[n + i] = img.data[i].imag();
  }
  return t;
}

inline ComplexImage tensor_to_image(const ad::Tensor& t) {
  if (t.shape.size() != 3 || t.shape[0] != 2)
    throw std::invalid_argument("tensor_to_image: expected {2,H,W}");
  ComplexImage img(t.shape[1], t.shape[2]);
  const size_t n = img.data.size();
  for (size_t i = 0; i < n; ++i) img.data[i] = cplx(t.data[i], t.data[n + i]);
  return img;
}

// loss = Σ_i ‖A_i x − y_i‖²  with gradient 2 Aᴴ(Ax − y).
inline ad::Var dc_loss(ad::Tape& t, ad::Var x,
                       std::shared_ptr<const ForwardOperator> op,
                       std::shared_ptr<const MultiCoilKSpace> y) {
  ComplexImage xi = tensor_to_image(t.value(x));
  MultiCoilKSpace ax = apply_forward(*op, xi);
  double loss = 0;
  for (int i = 0; i < ax.num_coils; ++i)
    for (size_t p = 0; p < ax.data[i].size(); ++p) {
      ax.data[i][p] -= y->data[i][p];
      loss += std::norm(ax.data[i][p]);
    }
  return t.record(ad::Tensor::scalar(loss), {x}, [x, op, y](ad::Tape& t, ad::Var self) {
    double g = t.grad(self).data[0];
    ComplexImage xi = tensor_to_image(t.value(x));
    MultiCoilKSpace r = apply_forward(*op, xi);
    for (int i = 0; i < r.num_coils; ++i)
      for (size_t p = 0; p < r.data[i].size(); ++p) r.data[i][p] -= y->data[i][p];
    ComplexImage gc = apply_adjoint(*op, r);
    ad::Tensor& gx = t.grad(x);
    const size_t n = gc.data.size();
    for (size_t p = 0; p < n; ++p) {
      gx.data[p] += g * 2.0 * gc.data[p].real();
      gx.data[n + p] += g * 2.0 * gc.data[p].imag();
    }
  });
}

// Differentiable data-consistency solve: x* = argmin ‖Ax − y‖² + lam‖x − x̂‖²,
// i.e. (AᴴA + lam I) x* = Aᴴy + lam x̂. Backward uses the implicit-function
// relation: with u = (AᴴA + lam I)⁻¹ g,
//   ∂L/∂x̂ = lam·u,   ∂L/∂lam = ⟨u, x̂ − x*⟩.
inline ad::Var dc_solve_node(ad::Tape& t, ad::Var xhat, ad::Var lam,
                             std::shared_ptr<const ForwardOperator> op,
                             std::shared_ptr<const ComplexImage> adj_y,
                             int cg_iters, double cg_tol) {
  double lam_v = t.value(lam).data[0];
  ComplexImage xh = tensor_to_image(t.value(xhat));
  ComplexImage rhs = *adj_y;
  for (size_t p = 0; p < rhs.data.size(); ++p) rhs.data[p] += lam_v * xh.data[p];
  CgResult sol = cg_normal(*op, rhs, xh, lam_v, cg_iters, cg_tol);
  auto xstar = std::make_shared<ComplexImage>(sol.x);

  return t.record(image_to_tensor(sol.x), {xhat, lam},
                  [xhat, lam, op, xstar, cg_iters, cg_tol](ad::Tape& t, ad::Var self) {
    double lam_v = t.value(lam).data[0];
    ComplexImage g = tensor_to_image(t.grad(self));
    ComplexImage zero(g.height, g.width);
    CgResult usol = cg_normal(*op, g, zero, lam_v, cg_iters, cg_tol);
    const ComplexImage& u = usol.x;

    ComplexImage xh = tensor_to_image(t.value(xhat));
    ad::Tensor& gx = t.grad(xhat);
    const size_t n = u.data.size();
    double glam = 0;
    for (size_t p = 0; p < n; ++p) {
      gx.data[p] += lam_v * u.data[p].real();
      gx.data[n + p] += lam_v * u.data[p].imag();
      cplx d = xh.data[p] - xstar->data[p];
      glam += u.data[p].real() * d.real() + u.data[p].imag() * d.imag();
    }
    t.grad(lam).data[0] += glam;
  });
}

// SSDU split loss on the held-out set: r = A_Λ x − y_Λ,
//   L = ½‖r‖₂/‖y_Λ‖₂ + ½‖r‖₁/‖y_Λ‖₁   (complex-modulus norms).
inline ad::Var ssdu_split_loss(ad::Tape& t, ad::Var x,
                               std::shared_ptr<const ForwardOperator> op_lambda,
                               std::shared_ptr<const MultiCoilKSpace> y_lambda) {
  ComplexImage xi = tensor_to_image(t.value(x));
  MultiCoilKSpace ax = apply_forward(*op_lambda, xi);
  double r2 = 0, r1 = 0, y2 = 0, y1 = 0;
  for (int i = 0; i < ax.num_coils; ++i)
    for (size_t p = 0; p < ax.data[i].size(); ++p) {
      if (!op_lambda->mask.values[p]) continue;
      cplx r = ax.data[i][p] - y_lambda->data[i][p];
      r2 += std::norm(r);
      r1 += std::abs(r);
      y2 += std::norm(y_lambda->data[i][p]);
      y1 += std::abs(y_lambda->data[i][p]);
    }
  double n2 = std::sqrt(y2), nr = std::sqrt(r2);
  if (n2 == 0.0 || y1 == 0.0)
    throw std::runtime_error("ssdu_split_loss: empty held-out measurements");
  double loss = 0.5 * nr / n2 + 0.5 * r1 / y1;

  return t.record(ad::Tensor::scalar(loss), {x},
                  [x, op_lambda, y_lambda, n2, y1, nr](ad::Tape& t, ad::Var self) {
    double g = t.grad(self).data[0];
    ComplexImage xi = tensor_to_image(t.value(x));
    MultiCoilKSpace r = apply_forward(*op_lambda, xi);
    MultiCoilKSpace w(r.num_coils, r.height, r.width);
    for (int i = 0; i < r.num_coils; ++i)
      for (size_t p = 0; p < r.data[i].size(); ++p) {
        if (!op_lambda->mask.values[p]) continue;
        cplx d = r.data[i][p] - y_lambda->data[i][p];
        cplx l2_term = nr > 0 ? d * (0.5 / (n2 * nr)) : cplx(0, 0);
        double ad = std::abs(d);
        cplx l1_term = ad > 0 ? d / ad * (0.5 / y1) : cplx(0, 0);
        w.data[i][p] = l2_term + l1_term;
      }
    ComplexImage gc = apply_adjoint(*op_lambda, w);
    ad::Tensor& gx = t.grad(x);
    const size_t n = gc.data.size();
    for (size_t p = 0; p < n; ++p) {
      gx.data[p] += g * gc.data[p].real();
      gx.data[n + p] += g * gc.data[p].imag();
    }
  });
}

}  // namespace ssrc

#endif
