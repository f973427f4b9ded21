#ifndef SSRC_DEEP_DECODER_HPP
#define SSRC_DEEP_DECODER_HPP

#include <memory>
#include <optional>

#include "ssrc/nn.hpp"
#include "ssrc/recon_ops.hpp"
#include "ssrc/solvers.hpp"

namespace ssrc {

struct DeepDecoderResult {
  ComplexImage image;
  NetworkParams params;
  std::vector<double> loss_history;
};

// Fit f_θ(z) to the acquired measurements: argmin_θ Σ‖A_i f_θ(z) − y_i‖².
// z is a pure function of arch.seed and never trained. Warm starting from a
// neighboring slice's params (with fewer iterations) is the intended
// acceleration path.
inline DeepDecoderResult deep_decoder_fit(const ReconProblem& problem, const DecoderArch& arch,
                                          int iters,
                                          const std::optional<NetworkParams>& warm_start = {},
                                          double lr = 0.01) {
  if (arch.output_h() != problem.mask.height || arch.output_w() != problem.mask.width)
    throw std::invalid_argument("deep_decoder_fit: arch does not upscale to image size");

  NetworkParams params =
      warm_start ? *warm_start : deep_decoder_init(arch, arch.seed);
  if (params.fingerprint != arch.fingerprint())
    throw std::invalid_argument("deep_decoder_fit: warm-start fingerprint mismatch");

  ad::Tensor z = deep_decoder_latent(arch);
  auto op = std::make_shared<const ForwardOperator>(make_operator(problem));
  auto y = std::make_shared<const MultiCoilKSpace>(problem.kspace);

  ad::AdamState adam;
  ad::AdamConfig adam_cfg;
  adam_cfg.lr = lr;
  DeepDecoderResult result;

  for (int it = 0; it < iters; ++it) {
    // step decay settles the oscillation of the over-parameterized fit
    adam_cfg.lr = lr * (it < 6 * iters / 10 ? 1.0 : it < 85 * iters / 100 ? 0.3 : 0.1);
    ad::Tape tape;
    std::vector<ad::Var> pv = lift_params(tape, params);
    ad::Var zv = tape.leaf(z);
    ad::Var out = deep_decoder_forward(tape, arch, pv, zv);
    ad::Var loss = dc_loss(tape, out, op, y);
    double loss_v = tape.value(loss).data[0];
    if (!std::isfinite(loss_v))
      throw std::runtime_error("deep_decoder_fit: non-finite loss at iteration " +
                               std::to_string(it) + " (value " + std::to_string(loss_v) + ")");
    result.loss_history.push_back(loss_v);
    tape.backward(loss);

    std::vector<ad::Tensor*> ps;
    std::vector<const ad::Tensor*> gs;
    for (size_t i = 0; i < params.params.size(); ++i) {
      ps.push_back(&params.params[i].second);
      gs.push_back(&tape.grad(pv[i]));
    }
    ad::adam_step(ps, gs, adam, adam_cfg);
  }

  // final forward pass with the trained (or untouched) parameters
  ad::Tape tape;
  std::vector<ad::Var> pv = lift_params(tape, params);
  ad::Var zv = tape.leaf(z);
  ad::Var out = deep_decoder_forward(tape, arch, pv, zv);
  result.image = tensor_to_image(tape.value(out));
  result.params = std::move(params);
  return result;
}

}  // namespace ssrc

#endif
