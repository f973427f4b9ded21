#ifndef SSRC_SOLVERS_HPP
#define SSRC_SOLVERS_HPP

#include <optional>
#include <stdexcept>
#include <vector>

#include "ssrc/cg.hpp"
#include "ssrc/forward_model.hpp"
#include "ssrc/rng.hpp"
#include "ssrc/types.hpp"
#include "ssrc/wavelet.hpp"

namespace ssrc {

struct CgConfig {
  int max_iters = 30;
  double tol = 1e-6;
};

struct CsConfig {
  double lambda = 2.3e-4;
  int max_iters = 200;
  int wavelet_levels = 3;
  double step = 1.0;  // fraction of the maximal stable step (1/L with ‖A‖ ≤ 1)
};

struct SsduConfig {
  int unrolls = 5;
  double dc_lambda_init = 0.05;
  double split_theta_fraction = 0.6;
  int epochs = 10;
  double learning_rate = 0.5e-4;
  int unet_stages = 4;
  int unet_base_channels = 12;
  int dc_cg_iters = 10;
};

struct SolveInfo {
  int iters = 0;
  double rel_residual = 0.0;
  bool diverged = false;
};

inline ForwardOperator make_operator(const ReconProblem& p) {
  return ForwardOperator(p.mask, p.maps);
}

// Least-squares fit via CG on the normal equations AᴴA x = Aᴴy, from zero.
// Unregularized CG semi-converges on noisy data; max_iters is the implicit
// regularizer.
inline ComplexImage cg_sense(const ReconProblem& problem, const CgConfig& cfg,
                             SolveInfo* info = nullptr) {
  if (cfg.tol <= 0) throw std::invalid_argument("cg_sense: tol must be > 0");
  ForwardOperator op = make_operator(problem);
  ComplexImage rhs = apply_adjoint(op, problem.kspace);
  ComplexImage x0(problem.mask.height, problem.mask.width);
  CgResult res = cg_normal(op, rhs, x0, 0.0, cfg.max_iters, cfg.tol);
  if (info) *info = SolveInfo{res.iters, res.rel_residual, res.diverged};
  return res.x;
}

// Proximal operator of t·|·| on complex values.
inline cplx soft_threshold(cplx v, double t) {
  double m = std::abs(v);
  if (m <= t || m == 0.0) return cplx(0, 0);
  return v * ((m - t) / m);
}

namespace detail {

inline double cs_objective(const ForwardOperator& op, const MultiCoilKSpace& y,
                           const ComplexImage& x, double lambda, int levels) {
  MultiCoilKSpace ax = apply_forward(op, x);
  double data = 0;
  for (int i = 0; i < ax.num_coils; ++i)
    for (size_t p = 0; p < ax.data[i].size(); ++p)
      data += std::norm(ax.data[i][p] - y.data[i][p]);
  double reg = 0;
  if (lambda > 0) {
    ComplexImage w = wavelet_forward(x, levels);
    for (const cplx& c : w.data) reg += std::abs(c);
  }
  return data + lambda * reg;
}

}  // namespace detail

// Monotone FISTA on Σ‖A_i x − y_i‖² + λ‖Wx‖₁, initialized at Aᴴy.
// The monotone variant keeps the best iterate, so the objective never rises.
inline ComplexImage cs_l1wavelet(const ReconProblem& problem, const CsConfig& cfg,
                                 std::vector<double>* objective_history = nullptr) {
  if (cfg.lambda < 0) throw std::invalid_argument("cs_l1wavelet: lambda must be >= 0");
  ForwardOperator op = make_operator(problem);
  const MultiCoilKSpace& y = problem.kspace;

  // ∇f = 2Aᴴ(Ax−y) has Lipschitz constant ≤ 2 under the unitary FFT and
  // normalized maps; τ = step/2 is then a valid proximal-gradient step.
  const double tau = 0.5 * cfg.step;

  ComplexImage x = apply_adjoint(op, y);
  ComplexImage x_prev = x;
  ComplexImage z = x;
  ComplexImage momentum = x;
  double t_k = 1.0;
  double best_obj = detail::cs_objective(op, y, x, cfg.lambda, cfg.wavelet_levels);
  if (objective_history) objective_history->push_back(best_obj);

  for (int k = 0; k < cfg.max_iters; ++k) {
    // gradient step at the momentum point
    MultiCoilKSpace r = apply_forward(op, momentum);
    for (int i = 0; i < r.num_coils; ++i)
      for (size_t p = 0; p < r.data[i].size(); ++p) r.data[i][p] -= y.data[i][p];
    ComplexImage grad = apply_adjoint(op, r);
    z = momentum;
    for (size_t p = 0; p < z.data.size(); ++p) z.data[p] -= tau * 2.0 * grad.data[p];

    if (cfg.lambda > 0) {
      ComplexImage w = wavelet_forward(z, cfg.wavelet_levels);
      const double thr = tau * cfg.lambda;
      for (cplx& c : w.data) c = soft_threshold(c, thr);
      z = wavelet_inverse(w, cfg.wavelet_levels);
    }

    double obj_z = detail::cs_objective(op, y, z, cfg.lambda, cfg.wavelet_levels);
    x_prev = x;
    if (obj_z <= best_obj) {
      x = z;
      best_obj = obj_z;
    }
    if (objective_history) objective_history->push_back(best_obj);

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
    momentum = x;
    for (size_t p = 0; p < momentum.data.size(); ++p)
      momentum.data[p] += (t_k / t_next) * (z.data[p] - x.data[p]) +
                          ((t_k - 1.0) / t_next) * (x.data[p] - x_prev.data[p]);
    t_k = t_next;
  }
  return x;
}

// Regularized data-consistency solve (AᴴA + lam I) x = Aᴴy + lam x̂ via CG.
inline ComplexImage dc_solve(const ComplexImage& x_hat, const ReconProblem& problem,
                             double lam, SolveInfo* info = nullptr,
                             int max_iters = 200, double tol = 1e-6) {
  if (lam <= 0) throw std::invalid_argument("dc_solve: lam must be > 0");
  ForwardOperator op = make_operator(problem);
  ComplexImage rhs = apply_adjoint(op, problem.kspace);
  for (size_t p = 0; p < rhs.data.size(); ++p) rhs.data[p] += lam * x_hat.data[p];
  CgResult res = cg_normal(op, rhs, x_hat, lam, max_iters, tol);
  if (info) *info = SolveInfo{res.iters, res.rel_residual, res.diverged};
  return res.x;
}

// Disjoint Θ/Λ partition of the sampled locations.
struct SplitPair {
  SamplingMask theta_mask;
  SamplingMask lambda_mask;
};

inline SplitPair ssdu_split(const SamplingMask& mask, double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("ssdu_split: fraction must be in (0,1)");
  for (int attempt = 0; attempt < 2; ++attempt) {
    Rng rng(mix_seed(seed, 0x5B117 + attempt));
    SplitPair sp{SamplingMask(mask.height, mask.width), SamplingMask(mask.height, mask.width)};
    size_t n_theta = 0, n_lambda = 0;
    for (size_t p = 0; p < mask.values.size(); ++p) {
      if (!mask.values[p]) continue;
      if (rng.uniform() < fraction) {
        sp.theta_mask.values[p] = 1;
        ++n_theta;
      } else {
        sp.lambda_mask.values[p] = 1;
        ++n_lambda;
      }
    }
    if (n_theta > 0 && n_lambda > 0) return sp;
  }
  throw std::runtime_error("ssdu_split: degenerate split (one side empty twice)");
}

// k-space restricted to a sub-mask; off-mask entries forced to exact zero.
inline MultiCoilKSpace restrict_kspace(const MultiCoilKSpace& y, const SamplingMask& sub) {
  MultiCoilKSpace out(y.num_coils, y.height, y.width);
  out.noise_sigma = y.noise_sigma;
  for (int i = 0; i < y.num_coils; ++i)
    for (size_t p = 0; p < y.data[i].size(); ++p)
      out.data[i][p] = sub.values[p] ? y.data[i][p] : cplx(0, 0);
  return out;
}

}  // namespace ssrc

#endif
