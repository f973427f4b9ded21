#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <catch2/catch_amalgamated.hpp>

#include "ssrc/fft.hpp"
#include "ssrc/forward_model.hpp"
#include "ssrc/rng.hpp"
#include "ssrc/simulation.hpp"
#include "ssrc/types.hpp"

namespace test_helpers {

using namespace ssrc;

inline ComplexImage random_image(int h, int w, Rng& rng) {
  ComplexImage img(h, w);
  for (cplx& z : img.data) z = cplx(rng.gaussian(), rng.gaussian());
  return img;
}

inline MultiCoilKSpace random_kspace(int nc, int h, int w, Rng& rng) {
  MultiCoilKSpace y(nc, h, w);
  for (auto& coil : y.data)
    for (cplx& z : coil) z = cplx(rng.gaussian(), rng.gaussian());
  return y;
}

// Bernoulli mask with a fully sampled 2x2-halfwidth ACS block.
inline SamplingMask random_mask(int h, int w, double density, Rng& rng) {
  SamplingMask m(h, w);
  m.acs = {std::min(2, h / 4), std::min(2, w / 4)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      m.at(r, c) = (m.in_acs(r, c) || rng.uniform() < density) ? 1 : 0;
  return m;
}

// Random coil maps, power-normalized everywhere (support = full grid).
inline SensitivityMaps random_maps(int nc, int h, int w, Rng& rng) {
  SensitivityMaps maps(nc, h, w);
  for (size_t p = 0; p < maps.support.size(); ++p) {
    double power = 0;
    std::vector<cplx> v(nc);
    for (int i = 0; i < nc; ++i) {
      v[i] = cplx(rng.gaussian(), rng.gaussian());
      power += std::norm(v[i]);
    }
    if (power == 0) {
      v[0] = 1.0;
      power = 1.0;
    }
    for (int i = 0; i < nc; ++i) maps.data[i][p] = v[i] / std::sqrt(power);
    maps.support[p] = 1;
  }
  return maps;
}

// O(N^4) centered DFT: out[k] = (1/sqrt(hw)) sum_r x[r] e^{-s 2pi i <k-c, r-c>}
inline ComplexImage dft2_oracle(const ComplexImage& x, int sign) {
  const int h = x.height, w = x.width;
  ComplexImage out(h, w);
  for (int kr = 0; kr < h; ++kr)
    for (int kc = 0; kc < w; ++kc) {
      cplx acc(0, 0);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          double ang = sign * 2.0 * std::numbers::pi *
                       (double(kr - h / 2) * (r - h / 2) / h +
                        double(kc - w / 2) * (c - w / 2) / w);
          acc += x.at(r, c) * cplx(std::cos(ang), std::sin(ang));
        }
      out.at(kr, kc) = acc / std::sqrt(double(h) * w);
    }
  return out;
}

inline double rel_error(const ComplexImage& x, const ComplexImage& ref) {
  double num = 0, den = 0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    num += std::norm(x.data[i] - ref.data[i]);
    den += std::norm(ref.data[i]);
  }
  return std::sqrt(num / den);
}

inline double max_abs_diff(const ComplexImage& x, const ComplexImage& ref) {
  double m = 0;
  for (size_t i = 0; i < x.data.size(); ++i)
    m = std::max(m, std::abs(x.data[i] - ref.data[i]));
  return m;
}

inline cplx cdot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  cplx s(0, 0);
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Simulated problem: phantom + Gaussian coils + Poisson-disk mask + acquisition.
struct SimProblem {
  Phantom phantom;
  ReconProblem problem;
};

inline SimProblem make_sim_problem(int size, int ncoils, double accel, double sigma,
                                   uint64_t seed,
                                   PhantomKind kind = PhantomKind::shepp_logan) {
  SimProblem sp;
  if (size >= 32) {
    sp.phantom = make_phantom(kind, size, mix_seed(seed, 11));
  } else {
    // sizes below the phantom generator's minimum: a smooth synthetic disk
    sp.phantom.kind = kind;
    sp.phantom.descriptor = "synthetic small disk";
    sp.phantom.image = ComplexImage(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        double y = 2.0 * r / (size - 1) - 1.0, x = 2.0 * c / (size - 1) - 1.0;
        double rad = std::sqrt(x * x + y * y);
        double v = rad < 0.85 ? 0.2 + 0.6 * std::exp(-2.0 * rad * rad) : 0.0;
        sp.phantom.image.at(r, c) = v;
      }
  }
  SensitivityMaps maps = simulate_coils(ncoils, size, mix_seed(seed, 12));
  AcsRect acs{std::max(2, size / 16), std::max(2, size / 16)};
  SamplingMask mask;
  if (size >= 32) {
    mask = poisson_disk_mask(size, accel, acs, mix_seed(seed, 13));
  } else {
    // tiny grids: Bernoulli undersampling, exactness of the rate not needed
    Rng mrng(mix_seed(seed, 13));
    mask = random_mask(size, size, 1.0 / accel, mrng);
    mask.acs = acs;
  }
  MultiCoilKSpace y = acquire(sp.phantom, maps, mask, sigma, nullptr, mix_seed(seed, 14));
  sp.problem = ReconProblem{std::move(y), std::move(mask), std::move(maps)};
  return sp;
}

}  // namespace test_helpers
