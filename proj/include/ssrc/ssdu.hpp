#ifndef SSRC_SSDU_HPP
#define SSRC_SSDU_HPP

#include <memory>

#include "ssrc/nn.hpp"
#include "ssrc/recon_ops.hpp"
#include "ssrc/solvers.hpp"

namespace ssrc {

inline UnetArch ssdu_unet_arch(const SsduConfig& cfg) {
  return UnetArch{cfg.unet_stages, cfg.unet_base_channels, 0};
}

inline std::string ssdu_spec(const SsduConfig& cfg) {
  return ssdu_unet_arch(cfg).spec() + ",unrolls=" + std::to_string(cfg.unrolls) + ",dc_lambda";
}

inline NetworkParams ssdu_init(const SsduConfig& cfg, uint64_t seed) {
  NetworkParams p = unet_init(ssdu_unet_arch(cfg), seed);
  p.add("dc_lambda", ad::Tensor::scalar(cfg.dc_lambda_init));
  p.fingerprint = fnv1a(ssdu_spec(cfg));
  return p;
}

namespace detail {

// Unrolled pipeline on a tape: x0 = Aᴴy, then alternate denoiser and
// data-consistency solves. Returns the final image var.
inline ad::Var ssdu_unrolled(ad::Tape& tape, const SsduConfig& cfg, const UnetArch& arch,
                             const std::vector<ad::Var>& pv, ad::Var lam_var,
                             const ReconProblem& problem) {
  auto op = std::make_shared<const ForwardOperator>(make_operator(problem));
  auto adj = std::make_shared<const ComplexImage>(apply_adjoint(*op, problem.kspace));
  ad::Var x = tape.leaf(image_to_tensor(*adj));
  for (int k = 0; k < cfg.unrolls; ++k) {
    ad::Var xhat = unet_forward(tape, arch, pv, x);
    x = dc_solve_node(tape, xhat, lam_var, op, adj, cfg.dc_cg_iters, 1e-12);
  }
  return x;
}

}  // namespace detail

inline ComplexImage ssdu_infer(const NetworkParams& params, const ReconProblem& problem,
                               const SsduConfig& cfg) {
  if (params.fingerprint != fnv1a(ssdu_spec(cfg)))
    throw std::invalid_argument("ssdu_infer: params fingerprint does not match config");
  UnetArch arch = ssdu_unet_arch(cfg);
  ad::Tape tape;
  NetworkParams p = params;  // lift copies; tape owns its leaves
  std::vector<ad::Var> pv = lift_params(tape, p);
  ad::Var lam_var = pv.back();  // dc_lambda is the last named parameter
  ad::Var out = detail::ssdu_unrolled(tape, cfg, arch, pv, lam_var, problem);
  return tensor_to_image(tape.value(out));
}

struct SsduTrainResult {
  NetworkParams params;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

// Self-supervised training: per step, a fresh Θ/Λ split of the acquisition
// mask; the unrolled network sees only y_Θ and the loss compares predicted
// k-space on Λ against y_Λ.
inline SsduTrainResult ssdu_train(const std::vector<ReconProblem>& dataset,
                                  const SsduConfig& cfg, uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("ssdu_train: empty dataset");
  if (!(cfg.split_theta_fraction > 0 && cfg.split_theta_fraction < 1))
    throw std::invalid_argument("ssdu_train: split fraction must be in (0,1)");

  UnetArch arch = ssdu_unet_arch(cfg);
  NetworkParams params = ssdu_init(cfg, seed);
  ad::AdamState adam;
  ad::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;

  SsduTrainResult result;
  uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_sum = 0;
    for (size_t di = 0; di < dataset.size(); ++di, ++step) {
      const ReconProblem& prob = dataset[di];
      SplitPair sp = ssdu_split(prob.mask, cfg.split_theta_fraction, mix_seed(seed, step));

      ReconProblem theta_prob{restrict_kspace(prob.kspace, sp.theta_mask),
                              sp.theta_mask, prob.maps};
      auto op_lambda = std::make_shared<const ForwardOperator>(
          ForwardOperator(sp.lambda_mask, prob.maps));
      auto y_lambda = std::make_shared<const MultiCoilKSpace>(
          restrict_kspace(prob.kspace, sp.lambda_mask));

      ad::Tape tape;
      std::vector<ad::Var> pv = lift_params(tape, params);
      ad::Var lam_var = pv.back();
      ad::Var out = detail::ssdu_unrolled(tape, cfg, arch, pv, lam_var, theta_prob);
      ad::Var loss = ssdu_split_loss(tape, out, op_lambda, y_lambda);
      double loss_v = tape.value(loss).data[0];
      if (!std::isfinite(loss_v))
        throw std::runtime_error("ssdu_train: non-finite loss at step " + std::to_string(step));
      epoch_sum += loss_v;
      tape.backward(loss);

      std::vector<ad::Tensor*> ps;
      std::vector<const ad::Tensor*> gs;
      for (size_t i = 0; i < params.params.size(); ++i) {
        ps.push_back(&params.params[i].second);
        gs.push_back(&tape.grad(pv[i]));
      }
      ad::adam_step(ps, gs, adam, adam_cfg);
      // the learned data-consistency weight must stay positive
      double& lam = params.at("dc_lambda").data[0];
      if (lam < 1e-6) lam = 1e-6;
    }
    result.epoch_loss.push_back(epoch_sum / double(dataset.size()));
  }
  result.params = std::move(params);
  return result;
}

}  // namespace ssrc

#endif
