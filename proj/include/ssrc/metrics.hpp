#ifndef SSRC_METRICS_HPP
#define SSRC_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrc/rng.hpp"
#include "ssrc/types.hpp"

namespace ssrc {

struct RealImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int h, int w) : height(h), width(w), data(size_t(h) * w, 0.0) {}

  double& at(int r, int c) { return data[size_t(r) * width + c]; }
  double at(int r, int c) const { return data[size_t(r) * width + c]; }
};

inline RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.height, img.width);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = std::abs(img.data[i]);
  return out;
}

inline RealImage center_crop(const RealImage& img, int crop_h, int crop_w) {
  if (crop_h > img.height || crop_w > img.width)
    throw std::invalid_argument("center_crop: crop larger than image");
  RealImage out(crop_h, crop_w);
  int r0 = (img.height - crop_h) / 2, c0 = (img.width - crop_w) / 2;
  for (int r = 0; r < crop_h; ++r)
    for (int c = 0; c < crop_w; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
  return out;
}

struct MetricReport {
  std::string name;
  bool higher_better = true;
  std::vector<double> values;  // per slice

  double mean() const {
    if (values.empty()) return 0;
    return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  }
  double stddev() const {
    if (values.size() < 2) return 0;
    double m = mean(), v = 0;
    for (double x : values) v += (x - m) * (x - m);
    return std::sqrt(v / (values.size() - 1));
  }
};

// ---- full reference ----

inline double psnr(const RealImage& x, const RealImage& ref) {
  if (x.height != ref.height || x.width != ref.width)
    throw std::invalid_argument("psnr: shape mismatch");
  double peak = *std::max_element(ref.data.begin(), ref.data.end());
  if (peak <= 0) throw std::invalid_argument("psnr: reference has no signal");
  double mse = 0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = x.data[i] - ref.data[i];
    mse += d * d;
  }
  mse /= double(x.data.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / std::sqrt(mse));
}

// Standard windowed SSIM: 11x11 Gaussian window (sigma 1.5), valid positions
// only, C1=(0.01 L)^2, C2=(0.03 L)^2 with L the dynamic range of ref.
inline double ssim(const RealImage& x, const RealImage& ref) {
  if (x.height != ref.height || x.width != ref.width)
    throw std::invalid_argument("ssim: shape mismatch");
  const int win = 11, half = win / 2;
  if (x.height < win || x.width < win)
    throw std::invalid_argument("ssim: image smaller than window");

  double w[win][win];
  double wsum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      double dr = i - half, dc = j - half;
      w[i][j] = std::exp(-(dr * dr + dc * dc) / (2.0 * 1.5 * 1.5));
      wsum += w[i][j];
    }
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) w[i][j] /= wsum;

  double lo = *std::min_element(ref.data.begin(), ref.data.end());
  double hi = *std::max_element(ref.data.begin(), ref.data.end());
  double L = hi - lo;
  if (L == 0) L = 1.0;  // flat reference; stabilizers keep the score defined
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);

  double total = 0;
  size_t count = 0;
  for (int r = half; r < x.height - half; ++r)
    for (int c = half; c < x.width - half; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          mx += w[i][j] * x.at(r + i - half, c + j - half);
          my += w[i][j] * ref.at(r + i - half, c + j - half);
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          double dx = x.at(r + i - half, c + j - half) - mx;
          double dy = ref.at(r + i - half, c + j - half) - my;
          vx += w[i][j] * dx * dx;
          vy += w[i][j] * dy * dy;
          cov += w[i][j] * dx * dy;
        }
      double num = (2 * mx * my + c1) * (2 * cov + c2);
      double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  return total / double(count);
}

// Fixed-seed convolutional feature pyramid used as the perceptual-distance
// backbone: 3 stages of (3x3 conv, ReLU, 2x2 average pool), widths 8/16/32.
// Weights are drawn once and frozen; the seed is part of any report.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(uint64_t seed = 7) : seed_(seed) {
    Rng rng(mix_seed(seed, 0xFEA7));
    int ci = 1;
    for (int wdt : {8, 16, 32}) {
      Stage s;
      s.co = wdt;
      s.ci = ci;
      double std = 1.0 / std::sqrt(double(ci) * 9.0);
      s.w.resize(size_t(wdt) * ci * 9);
      for (double& v : s.w) v = std * rng.gaussian();
      stages_.push_back(std::move(s));
      ci = wdt;
    }
  }

  uint64_t seed() const { return seed_; }

  // feature maps per stage for a single-channel input
  std::vector<std::vector<double>> extract(const RealImage& img,
                                           std::vector<std::pair<int, int>>* dims = nullptr) const {
    std::vector<double> cur = img.data;
    int ci = 1, h = img.height, w = img.width;
    std::vector<std::vector<double>> feats;
    for (const Stage& s : stages_) {
      std::vector<double> conv(size_t(s.co) * h * w, 0.0);
      for (int oc = 0; oc < s.co; ++oc)
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c) {
            double acc = 0;
            for (int ic = 0; ic < ci; ++ic)
              for (int kr = 0; kr < 3; ++kr) {
                int rr = r + kr - 1;
                if (rr < 0 || rr >= h) continue;
                for (int kc = 0; kc < 3; ++kc) {
                  int cc = c + kc - 1;
                  if (cc < 0 || cc >= w) continue;
                  acc += cur[(size_t(ic) * h + rr) * w + cc] *
                         s.w[((size_t(oc) * ci + ic) * 3 + kr) * 3 + kc];
                }
              }
            conv[(size_t(oc) * h + r) * w + c] = acc > 0 ? acc : 0.0;  // ReLU
          }
      int oh = h / 2, ow = w / 2;
      std::vector<double> pooled(size_t(s.co) * oh * ow);
      for (int oc = 0; oc < s.co; ++oc)
        for (int r = 0; r < oh; ++r)
          for (int c = 0; c < ow; ++c) {
            const double* base = &conv[(size_t(oc) * h + 2 * r) * w + 2 * c];
            pooled[(size_t(oc) * oh + r) * ow + c] =
                0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
          }
      if (dims) dims->emplace_back(oh, ow);
      feats.push_back(pooled);
      cur = feats.back();
      ci = s.co;
      h = oh;
      w = ow;
    }
    return feats;
  }

 private:
  struct Stage {
    int co = 0, ci = 0;
    std::vector<double> w;
  };
  uint64_t seed_;
  std::vector<Stage> stages_;
};

// Perceptual distance: per-stage mean absolute feature difference, summed.
// Both inputs are brought to [0,1] by their shared maximum, which keeps the
// distance symmetric.
inline double perc_dis(const RealImage& x, const RealImage& ref, const FeatureExtractor& fx) {
  if (x.height != ref.height || x.width != ref.width)
    throw std::invalid_argument("perc_dis: shape mismatch");
  double peak = 0;
  for (double v : x.data) peak = std::max(peak, v);
  for (double v : ref.data) peak = std::max(peak, v);
  RealImage a = x, b = ref;
  if (peak > 0)
    for (size_t i = 0; i < a.data.size(); ++i) {
      a.data[i] /= peak;
      b.data[i] /= peak;
    }
  auto fa = fx.extract(a);
  auto fb = fx.extract(b);
  double total = 0;
  for (size_t s = 0; s < fa.size(); ++s) {
    double acc = 0;
    for (size_t i = 0; i < fa[s].size(); ++i) acc += std::abs(fa[s][i] - fb[s][i]);
    total += acc / double(fa[s].size());
  }
  return total;
}

// ---- no reference ----

// Blockiness/activity score for JPEG-style degradation (Wang, Sheikh, Bovik
// 2002). Constants from the original publication:
//   S = alpha + beta * B^g1 * A^g2 * Z^g3
//   alpha=-245.8909, beta=261.9373, g1=-0.0240, g2=0.0160, g3=0.0064.
// All features come from first differences, so the score is invariant to a
// global intensity offset. Inputs are expected roughly in [0,1] and are
// scaled by 255 to match the formula's original domain. Higher is better.
// Degenerate inputs (any feature <= 0, e.g. a constant image) return the
// alpha offset as a documented sentinel.
inline double nrjpeg(const RealImage& x) {
  const int M = x.height, N = x.width;
  if (M < 16 || N < 16) throw std::invalid_argument("nrjpeg: image smaller than 16x16");

  auto features = [](auto sample, int rows, int cols) {
    // sample(r,c) indexes the (possibly transposed) image, scaled to 255
    double b_sum = 0, d_sum = 0, zc = 0;
    int b_cnt = 0, d_cnt = 0, z_cnt = 0;
    for (int r = 0; r < rows; ++r) {
      double prev_d = 0;
      for (int c = 0; c + 1 < cols; ++c) {
        double d = sample(r, c + 1) - sample(r, c);
        d_sum += std::abs(d);
        ++d_cnt;
        if ((c + 1) % 8 == 0) {
          b_sum += std::abs(d);
          ++b_cnt;
        }
        if (c > 0) {
          if (prev_d * d < 0) zc += 1;
          ++z_cnt;
        }
        prev_d = d;
      }
    }
    double B = b_cnt ? b_sum / b_cnt : 0;
    double A = (8.0 * (d_cnt ? d_sum / d_cnt : 0) - B) / 7.0;
    double Z = z_cnt ? zc / z_cnt : 0;
    return std::array<double, 3>{B, A, Z};
  };

  auto h = features([&](int r, int c) { return 255.0 * x.at(r, c); }, M, N);
  auto v = features([&](int r, int c) { return 255.0 * x.at(c, r); }, N, M);
  double B = 0.5 * (h[0] + v[0]);
  double A = 0.5 * (h[1] + v[1]);
  double Z = 0.5 * (h[2] + v[2]);

  const double alpha = -245.8909, beta = 261.9373;
  const double g1 = -0.0240, g2 = 0.0160, g3 = 0.0064;
  if (B <= 0 || A <= 0 || Z <= 0) return alpha;  // degenerate limit sentinel
  return alpha + beta * std::pow(B, g1) * std::pow(A, g2) * std::pow(Z, g3);
}

// Training-free block-based quality score (after Venkatanath et al. 2015).
// MSCN normalization, 16x16 block variance screening, and per-block
// distortion checks for blockiness artifacts and Gaussian noise. Each
// distorted active block scores 1; the result is
//   100 * (distorted + 1) / (active + 1),  in [0, 100], lower better.
// The center/surround noise criterion is a simplified form of the published
// segment-based one (constants: activity 0.1, segment std 0.1, length 6).
inline double piqe(const RealImage& x) {
  const int M = x.height, N = x.width;
  if (M < 64 || N < 64) throw std::invalid_argument("piqe: image smaller than 64x64");

  // scale to [0,255] by the image maximum
  double peak = *std::max_element(x.data.begin(), x.data.end());
  double scale = peak > 0 ? 255.0 / peak : 1.0;

  // 7x7 Gaussian window, sigma 7/6
  const int gw = 7, gh = gw / 2;
  double w[gw][gw];
  double wsum = 0;
  for (int i = 0; i < gw; ++i)
    for (int j = 0; j < gw; ++j) {
      double dr = i - gh, dc = j - gh;
      double sig = 7.0 / 6.0;
      w[i][j] = std::exp(-(dr * dr + dc * dc) / (2 * sig * sig));
      wsum += w[i][j];
    }
  for (int i = 0; i < gw; ++i)
    for (int j = 0; j < gw; ++j) w[i][j] /= wsum;

  RealImage mscn(M, N);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < N; ++c) {
      double mu = 0, mu2 = 0;
      for (int i = 0; i < gw; ++i)
        for (int j = 0; j < gw; ++j) {
          int rr = std::clamp(r + i - gh, 0, M - 1);
          int cc = std::clamp(c + j - gh, 0, N - 1);
          double v = scale * x.at(rr, cc);
          mu += w[i][j] * v;
          mu2 += w[i][j] * v * v;
        }
      double sigma = std::sqrt(std::max(0.0, mu2 - mu * mu));
      mscn.at(r, c) = (scale * x.at(r, c) - mu) / (sigma + 1.0);
    }

  const int bs = 16;
  const double activity_thr = 0.1;     // minimum block MSCN variance to analyze
  const double seg_std_thr = 0.1;      // "flat" segment threshold
  const double step_thr = 0.1;         // mean offset marking a block-edge step
  const double noise_var_thr = 0.35;   // MSCN variance typical of broadband noise
  const double homo_dev_thr = 0.1;     // center/surround spread match for noise
  const int seg_len = 6;
  int active = 0, distorted = 0;

  auto std_of = [](const std::vector<double>& v) {
    double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0;
    for (double a : v) s += (a - m) * (a - m);
    return std::sqrt(s / v.size());
  };
  auto mean_of = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };

  for (int br = 0; br + bs <= M; br += bs)
    for (int bc = 0; bc + bs <= N; bc += bs) {
      std::vector<double> blk;
      blk.reserve(bs * bs);
      for (int r = 0; r < bs; ++r)
        for (int c = 0; c < bs; ++c) blk.push_back(mscn.at(br + r, bc + c));
      double sigma_blk = std_of(blk);
      if (sigma_blk * sigma_blk <= activity_thr) continue;
      ++active;

      // blockiness: a flat segment along a block border that steps away from
      // the equally flat line one pixel inward (smooth regions have no step)
      bool impaired = false;
      auto edge_check = [&](auto edge_get, auto inner_get, int len) {
        for (int s = 0; s + seg_len <= len && !impaired; ++s) {
          std::vector<double> seg, inner;
          for (int i = 0; i < seg_len; ++i) {
            seg.push_back(edge_get(s + i));
            inner.push_back(inner_get(s + i));
          }
          if (std_of(seg) < seg_std_thr && std_of(inner) < seg_std_thr &&
              std::abs(mean_of(seg) - mean_of(inner)) > step_thr)
            impaired = true;
        }
      };
      edge_check([&](int i) { return mscn.at(br, bc + i); },
                 [&](int i) { return mscn.at(br + 1, bc + i); }, bs);
      edge_check([&](int i) { return mscn.at(br + bs - 1, bc + i); },
                 [&](int i) { return mscn.at(br + bs - 2, bc + i); }, bs);
      edge_check([&](int i) { return mscn.at(br + i, bc); },
                 [&](int i) { return mscn.at(br + i, bc + 1); }, bs);
      edge_check([&](int i) { return mscn.at(br + i, bc + bs - 1); },
                 [&](int i) { return mscn.at(br + i, bc + bs - 2); }, bs);

      // noise: broadband-noise MSCN variance with matching center and
      // surround spread (structure concentrates deviation unevenly)
      bool noisy = false;
      if (!impaired) {
        std::vector<double> center, surround;
        for (int r = 0; r < bs; ++r)
          for (int c = 0; c < bs; ++c) {
            bool in_center = r >= bs / 4 && r < 3 * bs / 4 && c >= bs / 4 && c < 3 * bs / 4;
            (in_center ? center : surround).push_back(mscn.at(br + r, bc + c));
          }
        double dev = std::abs(std_of(center) - std_of(surround));
        if (sigma_blk * sigma_blk > noise_var_thr && dev < homo_dev_thr) noisy = true;
      }
      if (impaired || noisy) ++distorted;
    }

  return 100.0 * (double(distorted) + 1.0) / (double(active) + 1.0);
}

// ---- statistics ----

// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped;
// midranks for ties. Exact distribution (sign-flip enumeration via dynamic
// programming over doubled ranks) for n <= 25, normal approximation with tie
// correction beyond.
inline double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: length mismatch");
  if (a.size() < 5) throw std::invalid_argument("wilcoxon: need at least 5 pairs");
  std::vector<double> d;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  if (d.empty()) throw std::invalid_argument("wilcoxon: all differences zero");
  const size_t n = d.size();

  // midranks of |d|
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t i, size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> rank(n);
  std::vector<size_t> tie_sizes;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    double mid = 0.5 * double(i + 1 + j);  // average of ranks i+1..j
    for (size_t k = i; k < j; ++k) rank[order[k]] = mid;
    tie_sizes.push_back(j - i);
    i = j;
  }

  double w_plus = 0;
  for (size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += rank[i];

  if (n <= 25) {
    // DP over doubled ranks (integers even with midranks)
    std::vector<long long> r2(n);
    long long total2 = 0;
    for (size_t i = 0; i < n; ++i) {
      r2[i] = llround(2.0 * rank[i]);
      total2 += r2[i];
    }
    std::vector<double> count(size_t(total2) + 1, 0.0);
    count[0] = 1.0;
    for (size_t i = 0; i < n; ++i)
      for (long long s = total2; s >= r2[i]; --s) count[s] += count[s - r2[i]];
    long long w2 = llround(2.0 * w_plus);
    double le = 0, ge = 0;
    for (long long s = 0; s <= total2; ++s) {
      if (s <= w2) le += count[s];
      if (s >= w2) ge += count[s];
    }
    double denom = std::pow(2.0, double(n));
    double p = 2.0 * std::min(le, ge) / denom;
    return std::min(1.0, p);
  }

  double mean = n * (n + 1) / 4.0;
  double var = n * (n + 1) * (2.0 * n + 1) / 24.0;
  for (size_t t : tie_sizes) var -= (double(t) * t * t - t) / 48.0;
  double z = (w_plus - mean) / std::sqrt(var);
  double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return std::min(1.0, p);
}

// Significance gate for the 6 pairwise comparisons among the 4 methods.
inline bool bonferroni_significant(double p) { return p < 0.05 / 6.0; }

}  // namespace ssrc

#endif
