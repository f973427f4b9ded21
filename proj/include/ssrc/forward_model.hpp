#ifndef SSRC_FORWARD_MODEL_HPP
#define SSRC_FORWARD_MODEL_HPP

#include <stdexcept>

#include "ssrc/fft.hpp"
#include "ssrc/types.hpp"

namespace ssrc {

// Measurement operator A_i = mask ∘ fft2_centered ∘ S_i.
struct ForwardOperator {
  SamplingMask mask;
  SensitivityMaps maps;

  ForwardOperator(SamplingMask m, SensitivityMaps s)
      : mask(std::move(m)), maps(std::move(s)) {
    if (mask.height != maps.height || mask.width != maps.width)
      throw std::invalid_argument("ForwardOperator: mask/maps shape mismatch");
  }
};

inline MultiCoilKSpace apply_forward(const ForwardOperator& op, const ComplexImage& x) {
  if (x.height != op.mask.height || x.width != op.mask.width)
    throw std::invalid_argument("apply_forward: image shape mismatch");
  const int nc = op.maps.num_coils;
  MultiCoilKSpace y(nc, x.height, x.width);
  ComplexImage coil_img(x.height, x.width);
  for (int i = 0; i < nc; ++i) {
    for (size_t p = 0; p < x.data.size(); ++p)
      coil_img.data[p] = op.maps.data[i][p] * x.data[p];
    ComplexImage ksp = fft2_centered(coil_img);
    for (size_t p = 0; p < ksp.data.size(); ++p)
      y.data[i][p] = op.mask.values[p] ? ksp.data[p] : cplx(0, 0);
  }
  return y;
}

// Σ_i conj(S_i) ⊙ ifft2(mask ⊙ y_i). Coil sum order is fixed (0..nc-1).
inline ComplexImage apply_adjoint(const ForwardOperator& op, const MultiCoilKSpace& y) {
  if (y.height != op.mask.height || y.width != op.mask.width ||
      y.num_coils != op.maps.num_coils)
    throw std::invalid_argument("apply_adjoint: kspace shape mismatch");
  ComplexImage out(y.height, y.width);
  ComplexImage masked(y.height, y.width);
  for (int i = 0; i < y.num_coils; ++i) {
    for (size_t p = 0; p < masked.data.size(); ++p)
      masked.data[p] = op.mask.values[p] ? y.data[i][p] : cplx(0, 0);
    ComplexImage img = ifft2_centered(masked);
    for (size_t p = 0; p < out.data.size(); ++p)
      out.data[p] += std::conj(op.maps.data[i][p]) * img.data[p];
  }
  return out;
}

// AᴴA x (no lambda term), reused by the solvers.
inline ComplexImage apply_normal(const ForwardOperator& op, const ComplexImage& x) {
  return apply_adjoint(op, apply_forward(op, x));
}

// ACS-based low-resolution sensitivity estimation. Hann apodization over the
// ACS rectangle, per-coil low-res image divided by root-sum-of-squares,
// support thresholded at 5% of max RSS.
inline SensitivityMaps estimate_sensitivities(const MultiCoilKSpace& ksp, const AcsRect& acs) {
  const int h = ksp.height, w = ksp.width, nc = ksp.num_coils;
  if (acs.half_rows <= 0 || acs.half_cols <= 0)
    throw std::invalid_argument("estimate_sensitivities: empty ACS");

  const int r0 = h / 2 - acs.half_rows, r1 = h / 2 + acs.half_rows;
  const int c0 = w / 2 - acs.half_cols, c1 = w / 2 + acs.half_cols;
  const int nr = r1 - r0, ncol = c1 - c0;

  std::vector<ComplexImage> lowres(nc);
  for (int i = 0; i < nc; ++i) {
    ComplexImage windowed(h, w);
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        double wr = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (r - r0 + 0.5) / nr));
        double wc = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (c - c0 + 0.5) / ncol));
        windowed.at(r, c) = ksp.at(i, r, c) * (wr * wc);
      }
    lowres[i] = ifft2_centered(windowed);
  }

  std::vector<double> rss(size_t(h) * w, 0.0);
  double max_rss = 0.0;
  for (size_t p = 0; p < rss.size(); ++p) {
    double s = 0;
    for (int i = 0; i < nc; ++i) s += std::norm(lowres[i].data[p]);
    rss[p] = std::sqrt(s);
    max_rss = std::max(max_rss, rss[p]);
  }
  if (max_rss == 0.0)
    throw std::runtime_error("estimate_sensitivities: degenerate ACS (zero RSS)");

  SensitivityMaps maps(nc, h, w);
  const double thr = 0.05 * max_rss;
  for (size_t p = 0; p < rss.size(); ++p) {
    if (rss[p] > thr) {
      maps.support[p] = 1;
      for (int i = 0; i < nc; ++i) maps.data[i][p] = lowres[i].data[p] / rss[p];
    }
  }
  return maps;
}

}  // namespace ssrc

#endif
