#ifndef SSRC_NN_HPP
#define SSRC_NN_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssrc/autodiff.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

// Ordered, named parameter store with an architecture fingerprint so that
// serialized params can be validated against the arch that loads them.
struct NetworkParams {
  std::vector<std::pair<std::string, ad::Tensor>> params;
  uint64_t fingerprint = 0;

  ad::Tensor& at(const std::string& name) {
    for (auto& [n, t] : params)
      if (n == name) return t;
    throw std::out_of_range("NetworkParams: no parameter named " + name);
  }
  void add(std::string name, ad::Tensor t) {
    for (auto& [n, unused] : params)
      if (n == name) throw std::invalid_argument("NetworkParams: duplicate name " + name);
    params.emplace_back(std::move(name), std::move(t));
  }
  size_t count_values() const {
    size_t n = 0;
    for (auto& [unused, t] : params) n += t.size();
    return n;
  }
};

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Leaf every parameter onto a tape; returned vars parallel params order.
inline std::vector<ad::Var> lift_params(ad::Tape& tape, const NetworkParams& p) {
  std::vector<ad::Var> vars;
  vars.reserve(p.params.size());
  for (auto& [unused, t] : p.params) {
    ad::Tensor copy = t;
    copy.requires_grad = true;
    vars.push_back(tape.leaf(std::move(copy)));
  }
  return vars;
}

// ---------------------------------------------------------------------------
// DeepDecoder: fixed Gaussian latent, then per layer
//   1x1 conv -> relu -> bilinear x2 upsample -> channel norm,
// finishing with a 1x1 conv to two channels (re, im).
// ---------------------------------------------------------------------------

struct DecoderArch {
  int num_layers = 4;
  int channels = 64;
  int latent_h = 8;
  int latent_w = 8;
  uint64_t seed = 0;

  int output_h() const { return latent_h << num_layers; }
  int output_w() const { return latent_w << num_layers; }

  std::string spec() const {
    return "deepdecoder:layers=" + std::to_string(num_layers) +
           ",channels=" + std::to_string(channels) +
           ",latent=" + std::to_string(latent_h) + "x" + std::to_string(latent_w);
  }
  uint64_t fingerprint() const { return fnv1a(spec()); }
};

// Named presets for the two readings of the paper-scale depth/width setting.
inline DecoderArch decoder_preset(const std::string& name) {
  DecoderArch a;
  if (name == "desk") {
    a = DecoderArch{4, 64, 8, 8, 0};
  } else if (name == "paper_w300_d10") {   // width 300, depth 10 (latent 10x10 fits depth via x2 ups to ~10*2^d)
    a = DecoderArch{10, 300, 10, 10, 0};
  } else if (name == "paper_w10_d300") {   // the other reading; impractically deep, exposed for completeness
    a = DecoderArch{300, 10, 10, 10, 0};
  } else {
    throw std::invalid_argument("decoder_preset: unknown preset " + name);
  }
  return a;
}

inline NetworkParams deep_decoder_init(const DecoderArch& arch, uint64_t seed) {
  NetworkParams p;
  p.fingerprint = arch.fingerprint();
  Rng rng(mix_seed(seed, 0xDECDEC));
  const int ch = arch.channels;
  double std = 1.0 / std::sqrt(double(ch));
  for (int l = 0; l < arch.num_layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    p.add(pre + "w", ad::Tensor::randn({ch, ch, 1, 1}, rng, std));
    p.add(pre + "b", ad::Tensor({ch}));
    p.add(pre + "gamma", ad::Tensor({ch}, 1.0));
    p.add(pre + "beta", ad::Tensor({ch}));
  }
  p.add("out.w", ad::Tensor::randn({2, ch, 1, 1}, rng, std));
  p.add("out.b", ad::Tensor({2}));
  return p;
}

// Latent tensor is a pure function of arch.seed, drawn once and held fixed.
inline ad::Tensor deep_decoder_latent(const DecoderArch& arch) {
  Rng rng(mix_seed(arch.seed, 0x1A7E17));
  return ad::Tensor::randn({arch.channels, arch.latent_h, arch.latent_w}, rng);
}

inline ad::Var deep_decoder_forward(ad::Tape& t, const DecoderArch& arch,
                                    const std::vector<ad::Var>& pv, ad::Var z) {
  ad::Var x = z;
  size_t i = 0;
  for (int l = 0; l < arch.num_layers; ++l) {
    ad::Var w = pv[i++], b = pv[i++], gamma = pv[i++], beta = pv[i++];
    // upsample before the nonlinearity: rectifying at the coarse scale and
    // interpolating afterwards starves the finer scales of detail and makes
    // the fit stall far from the measurements
    x = ad::conv2d(t, x, w, b);
    x = ad::bilinear_upsample_x2(t, x);
    x = ad::relu(t, x);
    x = ad::channel_norm(t, x, gamma, beta);
  }
  ad::Var w = pv[i++], b = pv[i++];
  return ad::conv2d(t, x, w, b);  // {2,H,W}
}

// ---------------------------------------------------------------------------
// SSDU denoiser: small encoder-decoder with skip connections on the 2-channel
// complex image, residual output (final 1x1 conv starts at zero, so the
// untrained denoiser is the identity).
// ---------------------------------------------------------------------------

struct UnetArch {
  int stages = 4;        // down/up stages
  int base_channels = 12;
  uint64_t seed = 0;

  std::string spec() const {
    return "unet:stages=" + std::to_string(stages) +
           ",base=" + std::to_string(base_channels);
  }
  uint64_t fingerprint() const { return fnv1a(spec()); }
};

inline NetworkParams unet_init(const UnetArch& arch, uint64_t seed) {
  NetworkParams p;
  p.fingerprint = arch.fingerprint();
  Rng rng(mix_seed(seed, 0x0CEA11));
  auto conv = [&](const std::string& name, int co, int ci, int k) {
    double std = 1.0 / std::sqrt(double(ci) * k * k);
    p.add(name + ".w", ad::Tensor::randn({co, ci, k, k}, rng, std));
    p.add(name + ".b", ad::Tensor({co}));
  };
  int ci = 2;
  for (int s = 0; s < arch.stages; ++s) {
    int co = arch.base_channels << s;
    conv("enc" + std::to_string(s), co, ci, 3);
    ci = co;
  }
  conv("mid", ci, ci, 3);
  for (int s = arch.stages - 1; s >= 0; --s) {
    int skip = arch.base_channels << s;
    int co = skip;
    conv("dec" + std::to_string(s), co, ci + skip, 3);
    ci = co;
  }
  // residual head: zero init so the fresh network is the identity map
  p.add("out.w", ad::Tensor({2, ci, 1, 1}));
  p.add("out.b", ad::Tensor({2}));
  return p;
}

inline ad::Var unet_forward(ad::Tape& t, const UnetArch& arch,
                            const std::vector<ad::Var>& pv, ad::Var input) {
  size_t i = 0;
  auto conv = [&](ad::Var x) {
    ad::Var w = pv[i++], b = pv[i++];
    return ad::conv2d(t, x, w, b);
  };
  std::vector<ad::Var> skips;
  ad::Var x = input;
  for (int s = 0; s < arch.stages; ++s) {
    x = ad::relu(t, conv(x));
    skips.push_back(x);
    x = ad::avgpool_x2(t, x);
  }
  x = ad::relu(t, conv(x));
  for (int s = arch.stages - 1; s >= 0; --s) {
    x = ad::bilinear_upsample_x2(t, x);
    x = ad::concat_channels(t, x, skips[s]);
    x = ad::relu(t, conv(x));
  }
  ad::Var res = conv(x);  // 1x1 head
  return ad::add(t, input, res);
}

}  // namespace ssrc

#endif
