#ifndef SSRC_WAVELET_HPP
#define SSRC_WAVELET_HPP

#include <stdexcept>
#include <vector>

#include "ssrc/types.hpp"

namespace ssrc {
namespace detail {

inline constexpr double kInvSqrt2 = 0.7071067811865475244;

// One Haar analysis pass along a length-n slice (n even).
inline void haar_rows(ComplexImage& img, int h, int w) {
  std::vector<cplx> tmp(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w / 2; ++c) {
      cplx a = img.at(r, 2 * c), b = img.at(r, 2 * c + 1);
      tmp[c] = (a + b) * kInvSqrt2;
      tmp[w / 2 + c] = (a - b) * kInvSqrt2;
    }
    for (int c = 0; c < w; ++c) img.at(r, c) = tmp[c];
  }
}

inline void haar_cols(ComplexImage& img, int h, int w) {
  std::vector<cplx> tmp(h);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h / 2; ++r) {
      cplx a = img.at(2 * r, c), b = img.at(2 * r + 1, c);
      tmp[r] = (a + b) * kInvSqrt2;
      tmp[h / 2 + r] = (a - b) * kInvSqrt2;
    }
    for (int r = 0; r < h; ++r) img.at(r, c) = tmp[r];
  }
}

inline void ihaar_rows(ComplexImage& img, int h, int w) {
  std::vector<cplx> tmp(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w / 2; ++c) {
      cplx a = img.at(r, c), d = img.at(r, w / 2 + c);
      tmp[2 * c] = (a + d) * kInvSqrt2;
      tmp[2 * c + 1] = (a - d) * kInvSqrt2;
    }
    for (int c = 0; c < w; ++c) img.at(r, c) = tmp[c];
  }
}

inline void ihaar_cols(ComplexImage& img, int h, int w) {
  std::vector<cplx> tmp(h);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h / 2; ++r) {
      cplx a = img.at(r, c), d = img.at(h / 2 + r, c);
      tmp[2 * r] = (a + d) * kInvSqrt2;
      tmp[2 * r + 1] = (a - d) * kInvSqrt2;
    }
    for (int r = 0; r < h; ++r) img.at(r, c) = tmp[r];
  }
}

inline void check_divisible(int h, int w, int levels) {
  if (levels < 1) throw std::invalid_argument("wavelet: levels must be >= 1");
  int f = 1 << levels;
  if (h % f != 0 || w % f != 0)
    throw std::invalid_argument("wavelet: image sides not divisible by 2^levels");
}

}  // namespace detail

// Orthogonal multilevel 2D Haar transform; coefficients stored in-place
// (approximation band in the top-left quadrant at each level).
inline ComplexImage wavelet_forward(const ComplexImage& img, int levels) {
  detail::check_divisible(img.height, img.width, levels);
  ComplexImage out = img;
  int h = img.height, w = img.width;
  for (int l = 0; l < levels; ++l) {
    detail::haar_rows(out, h, w);
    detail::haar_cols(out, h, w);
    h /= 2;
    w /= 2;
  }
  return out;
}

inline ComplexImage wavelet_inverse(const ComplexImage& coeffs, int levels) {
  detail::check_divisible(coeffs.height, coeffs.width, levels);
  ComplexImage out = coeffs;
  for (int l = levels - 1; l >= 0; --l) {
    int h = coeffs.height >> l, w = coeffs.width >> l;
    detail::ihaar_cols(out, h, w);
    detail::ihaar_rows(out, h, w);
  }
  return out;
}

}  // namespace ssrc

#endif
