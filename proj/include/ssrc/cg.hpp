#ifndef SSRC_CG_HPP
#define SSRC_CG_HPP

#include "ssrc/forward_model.hpp"

namespace ssrc {

inline double real_dot(const ComplexImage& a, const ComplexImage& b) {
  double s = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    s += a.data[i].real() * b.data[i].real() + a.data[i].imag() * b.data[i].imag();
  return s;
}

inline double norm2(const ComplexImage& a) { return std::sqrt(real_dot(a, a)); }

inline void axpy(ComplexImage& y, double alpha, const ComplexImage& x) {
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

struct CgResult {
  ComplexImage x;
  int iters = 0;
  double rel_residual = 0.0;
  bool diverged = false;  // residual rose 5 consecutive iterations
};

// CG on (AᴴA + lam I) x = rhs, initialized at x0. Viewing C^N as R^{2N},
// the operator is symmetric positive definite (for lam > 0 or full-rank A).
inline CgResult cg_normal(const ForwardOperator& op, const ComplexImage& rhs,
                          const ComplexImage& x0, double lam, int max_iters, double tol) {
  CgResult res;
  res.x = x0;
  auto apply = [&](const ComplexImage& v) {
    ComplexImage out = apply_normal(op, v);
    if (lam != 0.0)
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += lam * v.data[i];
    return out;
  };

  ComplexImage r = rhs;
  {
    ComplexImage ax = apply(res.x);
    for (size_t i = 0; i < r.data.size(); ++i) r.data[i] -= ax.data[i];
  }
  double rhs_norm = norm2(rhs);
  if (rhs_norm == 0.0) {
    res.x = ComplexImage(rhs.height, rhs.width);
    return res;
  }
  ComplexImage p = r;
  double rs = real_dot(r, r);
  double prev_res = std::sqrt(rs);
  int rising = 0;
  for (int k = 0; k < max_iters; ++k) {
    double rnorm = std::sqrt(rs);
    res.rel_residual = rnorm / rhs_norm;
    if (res.rel_residual <= tol) break;
    if (rnorm > prev_res) {
      if (++rising >= 5) {
        res.diverged = true;
        break;
      }
    } else {
      rising = 0;
    }
    prev_res = rnorm;

    ComplexImage ap = apply(p);
    double alpha = rs / real_dot(p, ap);
    axpy(res.x, alpha, p);
    axpy(r, -alpha, ap);
    double rs_new = real_dot(r, r);
    double beta = rs_new / rs;
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    rs = rs_new;
    res.iters = k + 1;
  }
  res.rel_residual = std::sqrt(rs) / rhs_norm;
  return res;
}

}  // namespace ssrc

#endif
