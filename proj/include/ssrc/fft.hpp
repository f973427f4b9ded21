#ifndef SSRC_FFT_HPP
#define SSRC_FFT_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "ssrc/types.hpp"

namespace ssrc {
namespace detail {

inline bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, unnormalized, sign = -1 forward.
inline void fft_pow2(std::vector<cplx>& a, int sign) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = sign * 2.0 * std::numbers::pi / double(len);
    cplx wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// O(n^2) fallback for non power-of-two lengths (desk-scale sizes only).
inline void dft_naive(std::vector<cplx>& a, int sign) {
  const size_t n = a.size();
  std::vector<cplx> out(n);
  for (size_t k = 0; k < n; ++k) {
    cplx acc(0, 0);
    for (size_t j = 0; j < n; ++j) {
      double ang = sign * 2.0 * std::numbers::pi * double(k * j % n) / double(n);
      acc += a[j] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  a = std::move(out);
}

inline void fft1d(std::vector<cplx>& a, int sign) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    fft_pow2(a, sign);
  else
    dft_naive(a, sign);
}

// DC-at-center transform: fftshift(FFT(ifftshift(x))) with unitary scaling.
inline ComplexImage fft2_impl(const ComplexImage& img, int sign) {
  const int h = img.height, w = img.width;
  ComplexImage out(h, w);
  // ifftshift on input, fftshift on output, fused into index remapping
  auto ishift = [](int i, int n) { return (i + n / 2) % n; };  // read: ifftshift
  auto fshift = [](int i, int n) { return (i + n / 2) % n; };  // write: fftshift

  std::vector<cplx> row(w), col(h);
  ComplexImage tmp(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) row[c] = img.at(r, ishift(c, w));
    fft1d(row, sign);
    for (int c = 0; c < w; ++c) tmp.at(r, fshift(c, w)) = row[c];
  }
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) col[r] = tmp.at(ishift(r, h), c);
    fft1d(col, sign);
    for (int r = 0; r < h; ++r) out.at(fshift(r, h), c) = col[r];
  }
  double scale = 1.0 / std::sqrt(double(h) * double(w));
  for (cplx& z : out.data) z *= scale;
  return out;
}

}  // namespace detail

// Orthonormal 2D DFT with zero frequency at grid center.
inline ComplexImage fft2_centered(const ComplexImage& img) {
  return detail::fft2_impl(img, -1);
}

inline ComplexImage ifft2_centered(const ComplexImage& ksp) {
  return detail::fft2_impl(ksp, +1);
}

}  // namespace ssrc

#endif
