#ifndef SSRC_TYPES_HPP
#define SSRC_TYPES_HPP

#include <complex>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ssrc {

using cplx = std::complex<double>;

// 2D complex-valued image, row-major.
struct ComplexImage {
  int height = 0;
  int width = 0;
  std::vector<cplx> data;

  ComplexImage() = default;
  ComplexImage(int h, int w) : height(h), width(w), data(size_t(h) * w) {}

  cplx& at(int r, int c) { return data[size_t(r) * width + c]; }
  const cplx& at(int r, int c) const { return data[size_t(r) * width + c]; }
  size_t size() const { return data.size(); }
};

// Per-coil k-space measurements. Unsampled locations are exactly zero.
struct MultiCoilKSpace {
  int num_coils = 0;
  int height = 0;
  int width = 0;
  std::vector<std::vector<cplx>> data;  // [coil][row*width+col]
  double noise_sigma = 0.0;             // per-component Gaussian std

  MultiCoilKSpace() = default;
  MultiCoilKSpace(int nc, int h, int w)
      : num_coils(nc), height(h), width(w),
        data(nc, std::vector<cplx>(size_t(h) * w)) {}

  cplx& at(int coil, int r, int c) { return data[coil][size_t(r) * width + c]; }
  const cplx& at(int coil, int r, int c) const { return data[coil][size_t(r) * width + c]; }
};

// Centered, fully sampled autocalibration rectangle given by half-widths.
// Covers rows [h/2 - hr, h/2 + hr) and cols [w/2 - hc, w/2 + hc).
struct AcsRect {
  int half_rows = 0;
  int half_cols = 0;
};

struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> values;  // {0,1}
  AcsRect acs;

  SamplingMask() = default;
  SamplingMask(int h, int w) : height(h), width(w), values(size_t(h) * w, 0) {}

  uint8_t& at(int r, int c) { return values[size_t(r) * width + c]; }
  uint8_t at(int r, int c) const { return values[size_t(r) * width + c]; }

  bool in_acs(int r, int c) const {
    int r0 = height / 2 - acs.half_rows, r1 = height / 2 + acs.half_rows;
    int c0 = width / 2 - acs.half_cols, c1 = width / 2 + acs.half_cols;
    return r >= r0 && r < r1 && c >= c0 && c < c1;
  }

  size_t count_ones() const {
    size_t n = 0;
    for (uint8_t v : values) n += v;
    return n;
  }

  double acceleration() const {
    size_t n = count_ones();
    return n == 0 ? std::numeric_limits<double>::infinity()
                  : double(values.size()) / double(n);
  }
};

struct SensitivityMaps {
  int num_coils = 0;
  int height = 0;
  int width = 0;
  std::vector<std::vector<cplx>> data;   // [coil][row*width+col]
  std::vector<uint8_t> support;          // object region

  SensitivityMaps() = default;
  SensitivityMaps(int nc, int h, int w)
      : num_coils(nc), height(h), width(w),
        data(nc, std::vector<cplx>(size_t(h) * w)),
        support(size_t(h) * w, 0) {}

  cplx& at(int coil, int r, int c) { return data[coil][size_t(r) * width + c]; }
  const cplx& at(int coil, int r, int c) const { return data[coil][size_t(r) * width + c]; }
};

struct ReconProblem {
  MultiCoilKSpace kspace;
  SamplingMask mask;
  SensitivityMaps maps;
};

inline bool finite(const cplx& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

// Invariant checks. Violations are data, not errors.
inline std::vector<std::string> validate(const ComplexImage& img) {
  std::vector<std::string> rep;
  if (img.height <= 0 || img.width <= 0) rep.push_back("image: nonpositive dimensions");
  if (img.data.size() != size_t(img.height) * img.width)
    rep.push_back("image: data length != height*width");
  for (const cplx& z : img.data)
    if (!finite(z)) { rep.push_back("image: non-finite value"); break; }
  return rep;
}

inline std::vector<std::string> validate(const SamplingMask& m) {
  std::vector<std::string> rep;
  if (m.values.size() != size_t(m.height) * m.width)
    rep.push_back("mask: length != height*width");
  for (uint8_t v : m.values)
    if (v > 1) { rep.push_back("mask: value not in {0,1}"); break; }
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.in_acs(r, c) && m.at(r, c) == 0) {
        rep.push_back("mask: acs fully sampled violated");
        r = m.height;
        break;
      }
  if (m.count_ones() == 0) rep.push_back("mask: empty (acceleration not finite)");
  return rep;
}

inline std::vector<std::string> validate(const SensitivityMaps& s) {
  std::vector<std::string> rep;
  if (s.support.size() != size_t(s.height) * s.width)
    rep.push_back("maps: support length mismatch");
  for (int i = 0; i < s.num_coils; ++i)
    if (s.data[i].size() != size_t(s.height) * s.width)
      { rep.push_back("maps: coil array length mismatch"); return rep; }
  bool norm_bad = false, outside_bad = false;
  for (size_t p = 0; p < s.support.size(); ++p) {
    double pw = 0;
    for (int i = 0; i < s.num_coils; ++i) pw += std::norm(s.data[i][p]);
    if (s.support[p]) {
      if (std::abs(pw - 1.0) > 1e-6) norm_bad = true;
    } else {
      if (pw != 0.0) outside_bad = true;
    }
  }
  if (norm_bad) rep.push_back("maps: coil power normalization violated on support");
  if (outside_bad) rep.push_back("maps: nonzero outside support");
  return rep;
}

inline std::vector<std::string> validate(const MultiCoilKSpace& k, const SamplingMask& m) {
  std::vector<std::string> rep;
  if (k.height != m.height || k.width != m.width)
    rep.push_back("kspace: shape mismatch with mask");
  else {
    for (int i = 0; i < k.num_coils; ++i)
      for (size_t p = 0; p < m.values.size(); ++p)
        if (!m.values[p] && k.data[i][p] != cplx(0, 0)) {
          rep.push_back("kspace: nonzero at unsampled location");
          i = k.num_coils;
          break;
        }
  }
  if (k.noise_sigma < 0) rep.push_back("kspace: negative noise sigma");
  return rep;
}

inline std::vector<std::string> validate(const ReconProblem& p) {
  std::vector<std::string> rep;
  if (p.kspace.height != p.mask.height || p.kspace.width != p.mask.width ||
      p.maps.height != p.mask.height || p.maps.width != p.mask.width ||
      p.kspace.num_coils != p.maps.num_coils)
    rep.push_back("problem: member shapes disagree");
  auto merge = [&rep](std::vector<std::string> v) {
    for (auto& s : v) rep.push_back(std::move(s));
  };
  merge(validate(p.mask));
  merge(validate(p.maps));
  merge(validate(p.kspace, p.mask));
  return rep;
}

}  // namespace ssrc

#endif
