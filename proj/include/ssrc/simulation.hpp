#ifndef SSRC_SIMULATION_HPP
#define SSRC_SIMULATION_HPP

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrc/fft.hpp"
#include "ssrc/rng.hpp"
#include "ssrc/types.hpp"

namespace ssrc {

enum class PhantomKind { shepp_logan, resolution_grid, textured_produce };

inline PhantomKind phantom_kind_from_string(const std::string& s) {
  if (s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "resolution_grid") return PhantomKind::resolution_grid;
  if (s == "textured_produce") return PhantomKind::textured_produce;
  throw std::invalid_argument("unknown phantom kind: " + s);
}

struct Phantom {
  PhantomKind kind = PhantomKind::shepp_logan;
  ComplexImage image;
  std::string descriptor;  // geometric primitives used
};

namespace detail {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// modified (Toft) intensities: background 0, peak 1
inline const std::vector<Ellipse>& shepp_logan_ellipses() {
  static const std::vector<Ellipse> e = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0}};
  return e;
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

inline Phantom make_phantom(PhantomKind kind, int size, uint64_t seed) {
  if (size < 32) throw std::invalid_argument("make_phantom: size must be >= 32");
  Phantom ph;
  ph.kind = kind;
  ph.image = ComplexImage(size, size);

  auto xy = [size](int r, int c) {
    double y = -(2.0 * r / (size - 1) - 1.0);  // row 0 = top = +y
    double x = 2.0 * c / (size - 1) - 1.0;
    return std::pair<double, double>{x, y};
  };

  switch (kind) {
    case PhantomKind::shepp_logan: {
      const auto& es = detail::shepp_logan_ellipses();
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          auto [x, y] = xy(r, c);
          double v = 0;
          for (const auto& e : es) {
            double phi = e.phi_deg * std::numbers::pi / 180.0;
            double xr = (x - e.x0) * std::cos(phi) + (y - e.y0) * std::sin(phi);
            double yr = -(x - e.x0) * std::sin(phi) + (y - e.y0) * std::cos(phi);
            if (xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0) v += e.value;
          }
          ph.image.at(r, c) = detail::clamp01(v);
        }
      ph.descriptor = "shepp_logan: 10 ellipses (Toft intensities)";
      break;
    }
    case PhantomKind::resolution_grid: {
      // container disk with hyper/hypo-intense bar groups and small disks
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          auto [x, y] = xy(r, c);
          double rad = std::sqrt(x * x + y * y);
          double v = 0;
          if (rad <= 0.9) {
            v = 0.5;
            // three bar groups of decreasing pitch, upper half
            if (y > 0.15 && y < 0.75) {
              for (int g = 0; g < 3; ++g) {
                double x0 = -0.7 + 0.5 * g;
                double pitch = 0.12 / (g + 1);
                if (x >= x0 && x < x0 + 0.35) {
                  int band = int(std::floor((x - x0) / pitch));
                  v = (band % 2 == 0) ? 0.9 : 0.1;
                }
              }
            }
            // hypo/hyper disks in the lower half
            auto disk = [&](double cx, double cy, double rr, double val) {
              if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rr * rr) v = val;
            };
            disk(-0.45, -0.45, 0.18, 0.95);
            disk(0.0, -0.45, 0.12, 0.05);
            disk(0.42, -0.45, 0.08, 0.8);
          }
          ph.image.at(r, c) = v;
        }
      ph.descriptor = "resolution_grid: disk container, 3 bar groups, 3 contrast disks";
      break;
    }
    case PhantomKind::textured_produce: {
      Rng rng(mix_seed(seed, 0xF00D));
      const int nblobs = 9;
      struct Blob { double cx, cy, rad, amp; };
      std::vector<Blob> blobs;
      for (int i = 0; i < nblobs; ++i)
        blobs.push_back({rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55),
                         rng.uniform(0.15, 0.45), rng.uniform(0.35, 0.9)});
      // procedural texture: a few random sinusoids modulating the blobs
      const int nwaves = 6;
      struct Wave { double kx, ky, phase, amp; };
      std::vector<Wave> waves;
      for (int i = 0; i < nwaves; ++i)
        waves.push_back({rng.uniform(3.0, 14.0), rng.uniform(3.0, 14.0),
                         rng.uniform(0.0, 2 * std::numbers::pi), rng.uniform(0.05, 0.18)});
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          auto [x, y] = xy(r, c);
          double v = 0;
          for (const auto& b : blobs) {
            double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
            v = std::max(v, b.amp * std::exp(-d2 / (2 * b.rad * b.rad / 4.0)));
          }
          if (v > 0.05) {
            double tex = 0;
            for (const auto& wv : waves)
              tex += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
            v *= (1.0 + tex);
          }
          ph.image.at(r, c) = detail::clamp01(v);
        }
      ph.descriptor = "textured_produce: " + std::to_string(nblobs) + " blobs, " +
                      std::to_string(nwaves) + " texture waves";
      break;
    }
  }
  return ph;
}

// Gaussian-profile coil lobes around the field of view with smooth random
// phase, normalized so coil power sums to 1 everywhere (support = full grid).
inline SensitivityMaps simulate_coils(int ncoils, int size, uint64_t seed) {
  if (ncoils < 1) throw std::invalid_argument("simulate_coils: ncoils must be >= 1");
  SensitivityMaps maps(ncoils, size, size);
  Rng rng(mix_seed(seed, 0xC011));

  struct Coil { double cx, cy, sigma, p0, px, py; };
  std::vector<Coil> coils;
  for (int i = 0; i < ncoils; ++i) {
    double ang = 2 * std::numbers::pi * i / ncoils + rng.uniform(-0.1, 0.1);
    coils.push_back({1.25 * std::cos(ang), 1.25 * std::sin(ang),
                     rng.uniform(0.8, 1.1), rng.uniform(0, 2 * std::numbers::pi),
                     rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
  }
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      double y = -(2.0 * r / (size - 1) - 1.0);
      double x = 2.0 * c / (size - 1) - 1.0;
      double power = 0;
      std::vector<cplx> vals(ncoils);
      for (int i = 0; i < ncoils; ++i) {
        const Coil& co = coils[i];
        double d2 = (x - co.cx) * (x - co.cx) + (y - co.cy) * (y - co.cy);
        double mag = std::exp(-d2 / (2 * co.sigma * co.sigma));
        double phase = co.p0 + co.px * x + co.py * y;
        vals[i] = std::polar(mag, phase);
        power += mag * mag;
      }
      double inv = 1.0 / std::sqrt(power);
      for (int i = 0; i < ncoils; ++i) maps.at(i, r, c) = vals[i] * inv;
      maps.support[size_t(r) * size + c] = 1;
    }
  return maps;
}

namespace detail {

// dart throwing with a spatial grid; points inside the ACS are forced on and
// excluded from the min-distance constraint
inline SamplingMask poisson_throw(int size, double radius, const AcsRect& acs, uint64_t seed) {
  SamplingMask m(size, size);
  m.acs = acs;
  std::vector<size_t> order;
  order.reserve(size_t(size) * size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      if (m.in_acs(r, c))
        m.at(r, c) = 1;
      else
        order.push_back(size_t(r) * size + c);
    }
  Rng rng(mix_seed(seed, 0x901550));
  std::shuffle(order.begin(), order.end(), rng.engine());

  const int cell = std::max(1, int(std::floor(radius)));
  const int gcells = (size + cell - 1) / cell;
  std::vector<std::vector<std::pair<int, int>>> grid(size_t(gcells) * gcells);
  const double r2 = radius * radius;

  for (size_t p : order) {
    int r = int(p) / size, c = int(p) % size;
    int gr = r / cell, gc = c / cell;
    bool ok = true;
    int reach = int(std::ceil(radius / cell));
    for (int dr = -reach; dr <= reach && ok; ++dr)
      for (int dc = -reach; dc <= reach && ok; ++dc) {
        int nr = gr + dr, nc = gc + dc;
        if (nr < 0 || nr >= gcells || nc < 0 || nc >= gcells) continue;
        for (auto [pr, pc] : grid[size_t(nr) * gcells + nc]) {
          double dx = pr - r, dy = pc - c;
          if (dx * dx + dy * dy < r2) {
            ok = false;
            break;
          }
        }
      }
    if (ok) {
      m.at(r, c) = 1;
      grid[size_t(gr) * gcells + gc].emplace_back(r, c);
    }
  }
  return m;
}

}  // namespace detail

// Poisson-disk pattern. The realized acceleration of a dart-throw is a step
// function of the minimum-distance radius (lattice distances are quantized),
// so bisection alone cannot hit arbitrary targets. Instead: bisect to the
// densest throw at or below the target acceleration, then randomly thin
// non-ACS samples down to the exact target count. Thinning preserves the
// minimum-distance property. ACS always on. The radius actually used is
// reported through out_radius when non-null.
inline SamplingMask poisson_disk_mask(int size, double accel_target, const AcsRect& acs,
                                      uint64_t seed, double* out_radius = nullptr) {
  if (accel_target < 1.0)
    throw std::invalid_argument("poisson_disk_mask: acceleration must be >= 1");
  if (accel_target == 1.0) {
    SamplingMask m(size, size);
    m.acs = acs;
    std::fill(m.values.begin(), m.values.end(), uint8_t(1));
    if (out_radius) *out_radius = 0.0;
    return m;
  }
  // largest radius whose throw is still at least as dense as the target;
  // radius 0.5 yields the full grid, so the dense side is always reachable
  double lo = 0.5, hi = double(size);
  SamplingMask dense = detail::poisson_throw(size, lo, acs, seed);
  double dense_radius = lo;
  for (int it = 0; it < 48; ++it) {
    double mid = 0.5 * (lo + hi);
    SamplingMask m = detail::poisson_throw(size, mid, acs, seed);
    if (m.acceleration() <= accel_target) {
      dense = std::move(m);
      dense_radius = mid;
      lo = mid;
    } else {
      hi = mid;
    }
  }

  const size_t total = size_t(size) * size;
  const size_t n_target = std::max<size_t>(1, size_t(std::llround(double(total) / accel_target)));
  std::vector<size_t> removable;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (dense.at(r, c) && !dense.in_acs(r, c)) removable.push_back(size_t(r) * size + c);
  size_t ones = dense.count_ones();
  if (ones < n_target || ones - removable.size() > n_target)
    throw std::runtime_error("poisson_disk_mask: unreachable acceleration " +
                             std::to_string(accel_target));
  Rng thin_rng(mix_seed(seed, 0x7D15));
  std::shuffle(removable.begin(), removable.end(), thin_rng.engine());
  for (size_t i = 0; ones > n_target; ++i, --ones) dense.values[removable[i]] = 0;
  if (out_radius) *out_radius = dense_radius;
  return dense;
}

// Radially decaying Bernoulli density p(r) = scale * (1 - r)^decay_power,
// calibrated by bisection on scale to hit the acceleration within ±10%.
// Per-pixel uniforms are drawn once, so realized masks are monotone in the
// scale and deterministic under seed.
inline SamplingMask variable_density_mask(int size, double accel_target, const AcsRect& acs,
                                          double decay_power, uint64_t seed) {
  if (accel_target < 1.0)
    throw std::invalid_argument("variable_density_mask: acceleration must be >= 1");
  if (accel_target == 1.0) {
    SamplingMask m(size, size);
    m.acs = acs;
    std::fill(m.values.begin(), m.values.end(), uint8_t(1));
    return m;
  }
  Rng rng(mix_seed(seed, 0x7A9D));
  std::vector<double> u(size_t(size) * size);
  for (double& v : u) v = rng.uniform();

  auto realize = [&](double scale) {
    SamplingMask m(size, size);
    m.acs = acs;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        if (m.in_acs(r, c)) {
          m.at(r, c) = 1;
          continue;
        }
        double y = 2.0 * r / (size - 1) - 1.0;
        double x = 2.0 * c / (size - 1) - 1.0;
        double rad = std::min(1.0, std::sqrt(x * x + y * y) / std::numbers::sqrt2);
        double p = std::min(1.0, scale * std::pow(1.0 - rad, decay_power));
        if (u[size_t(r) * size + c] < p) m.at(r, c) = 1;
      }
    return m;
  };

  double lo = 0.0, hi = 64.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    SamplingMask m = realize(mid);
    double a = m.acceleration();
    if (std::isfinite(a) && std::abs(a - accel_target) <= 0.1 * accel_target) return m;
    if (!std::isfinite(a) || a > accel_target)
      lo = mid;  // too sparse, raise density
    else
      hi = mid;
  }
  throw std::runtime_error("variable_density_mask: unreachable acceleration " +
                           std::to_string(accel_target));
}

enum class EchoOrdering { center_out, linear, random };

inline EchoOrdering echo_ordering_from_string(const std::string& s) {
  if (s == "center_out") return EchoOrdering::center_out;
  if (s == "linear") return EchoOrdering::linear;
  if (s == "random") return EchoOrdering::random;
  throw std::invalid_argument("unknown echo ordering: " + s);
}

// Partition of the sampled locations into echo trains. trains[t][e] is the
// pixel index acquired at echo e of train t.
struct EchoTrainSchedule {
  std::vector<std::vector<size_t>> trains;
  int turbo_factor = 1;
  double decay_tau = 1.0;  // in echo-index units
};

inline EchoTrainSchedule echo_train_schedule(const SamplingMask& mask, int turbo_factor,
                                             EchoOrdering policy, uint64_t seed,
                                             double decay_tau = 0.0) {
  if (turbo_factor < 1) throw std::invalid_argument("echo_train_schedule: turbo_factor >= 1");
  std::vector<size_t> pts;
  for (size_t p = 0; p < mask.values.size(); ++p)
    if (mask.values[p]) pts.push_back(p);

  auto radius = [&](size_t p) {
    double r = double(p / mask.width) - mask.height / 2.0;
    double c = double(p % mask.width) - mask.width / 2.0;
    return r * r + c * c;
  };
  switch (policy) {
    case EchoOrdering::center_out:
      std::stable_sort(pts.begin(), pts.end(),
                       [&](size_t a, size_t b) { return radius(a) < radius(b); });
      break;
    case EchoOrdering::linear:
      break;  // row-major already
    case EchoOrdering::random: {
      Rng rng(mix_seed(seed, 0xECC0));
      std::shuffle(pts.begin(), pts.end(), rng.engine());
      break;
    }
  }

  EchoTrainSchedule sched;
  sched.turbo_factor = turbo_factor;
  sched.decay_tau = decay_tau > 0 ? decay_tau : turbo_factor / 2.0;
  size_t ntrains = (pts.size() + turbo_factor - 1) / turbo_factor;
  sched.trains.assign(ntrains, {});
  // round-robin: each train sweeps the ordering from start to end
  for (size_t i = 0; i < pts.size(); ++i) sched.trains[i % ntrains].push_back(pts[i]);
  return sched;
}

// Eq-style acquisition: y_i = mask ⊙ F(S_i x) + n, with optional echo-train
// amplitude decay exp(-echo/tau) applied before noise (prospective mode).
// The noise stream is independent of the schedule, so tau → ∞ reproduces the
// retrospective acquisition bit for bit.
inline MultiCoilKSpace acquire(const Phantom& phantom, const SensitivityMaps& maps,
                               const SamplingMask& mask, double noise_sigma,
                               const EchoTrainSchedule* schedule, uint64_t seed) {
  const int h = mask.height, w = mask.width, nc = maps.num_coils;
  if (phantom.image.height != h || phantom.image.width != w || maps.height != h ||
      maps.width != w)
    throw std::invalid_argument("acquire: shape mismatch");

  std::vector<double> decay(size_t(h) * w, 1.0);
  if (schedule) {
    size_t covered = 0;
    std::vector<uint8_t> seen(size_t(h) * w, 0);
    for (const auto& train : schedule->trains)
      for (size_t e = 0; e < train.size(); ++e) {
        size_t p = train[e];
        if (p >= seen.size() || !mask.values[p] || seen[p])
          throw std::invalid_argument("acquire: schedule does not match mask");
        seen[p] = 1;
        ++covered;
        decay[p] = std::exp(-double(e) / schedule->decay_tau);
      }
    if (covered != mask.count_ones())
      throw std::invalid_argument("acquire: schedule does not cover the mask");
  }

  MultiCoilKSpace y(nc, h, w);
  y.noise_sigma = noise_sigma;
  Rng rng(mix_seed(seed, 0xAC9));
  ComplexImage coil_img(h, w);
  for (int i = 0; i < nc; ++i) {
    for (size_t p = 0; p < coil_img.data.size(); ++p)
      coil_img.data[p] = maps.data[i][p] * phantom.image.data[p];
    ComplexImage ksp = fft2_centered(coil_img);
    for (size_t p = 0; p < ksp.data.size(); ++p) {
      if (!mask.values[p]) continue;
      cplx v = ksp.data[p] * decay[p];
      if (noise_sigma > 0) v += cplx(noise_sigma * rng.gaussian(), noise_sigma * rng.gaussian());
      y.data[i][p] = v;
    }
  }
  return y;
}

}  // namespace ssrc

#endif
