#ifndef SSRC_TUNER_HPP
#define SSRC_TUNER_HPP

#include <functional>
#include <thread>

#include "ssrc/solvers.hpp"

namespace ssrc {

struct TuneGrid {
  std::vector<double> values;  // strictly increasing
  int num_splits = 50;
  double split_fraction = 0.6;  // reuses the SSDU training split
};

inline TuneGrid log_grid(double lo, double hi, int n, int num_splits = 50) {
  TuneGrid g;
  g.num_splits = num_splits;
  for (int i = 0; i < n; ++i)
    g.values.push_back(lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1)));
  return g;
}

using Reconstructor = std::function<ComplexImage(const ReconProblem&)>;

// Noise2Self measurement-error estimate: reconstruct from the Θ-restricted
// problem, simulate the full k-space, and score the squared error on the
// held-out Λ locations (mean per coil-sample), averaged over splits.
inline double noise2self_score(const Reconstructor& reconstruct, const ReconProblem& problem,
                               int num_splits, uint64_t seed, double split_fraction = 0.6) {
  if (num_splits < 1) throw std::invalid_argument("noise2self_score: num_splits must be >= 1");
  SamplingMask full(problem.mask.height, problem.mask.width);
  std::fill(full.values.begin(), full.values.end(), uint8_t(1));
  ForwardOperator full_op(full, problem.maps);

  double total = 0;
  for (int s = 0; s < num_splits; ++s) {
    SplitPair sp = ssdu_split(problem.mask, split_fraction, mix_seed(seed, s));
    ReconProblem theta_prob{restrict_kspace(problem.kspace, sp.theta_mask),
                            sp.theta_mask, problem.maps};
    ComplexImage img = reconstruct(theta_prob);
    MultiCoilKSpace sim = apply_forward(full_op, img);

    double err = 0;
    size_t n_lambda = sp.lambda_mask.count_ones();
    for (int i = 0; i < sim.num_coils; ++i)
      for (size_t p = 0; p < sim.data[i].size(); ++p)
        if (sp.lambda_mask.values[p])
          err += std::norm(sim.data[i][p] - problem.kspace.data[i][p]);
    total += err / (double(n_lambda) * sim.num_coils);
  }
  return total / num_splits;
}

struct TuneResult {
  double selected = 0;                  // geometric mean of per-problem winners
  std::vector<double> mean_score;       // per grid value, averaged over problems
  std::vector<double> std_score;        // std across problems
  std::vector<double> per_problem_winner;
  std::vector<std::vector<double>> table;  // [problem][grid value]
};

// Per problem: argmin-score grid value; cross-problem result is the geometric
// mean (arithmetic mean in log space, matching the log-spaced grid).
inline TuneResult tune_lambda(const std::vector<ReconProblem>& problems, const TuneGrid& grid,
                              const std::function<ComplexImage(const ReconProblem&, double)>& method,
                              uint64_t seed, int jobs = 1) {
  if (problems.empty() || grid.values.empty())
    throw std::invalid_argument("tune_lambda: empty problems or grid");
  for (size_t i = 1; i < grid.values.size(); ++i)
    if (grid.values[i] <= grid.values[i - 1])
      throw std::invalid_argument("tune_lambda: grid values must be strictly increasing");

  TuneResult result;
  result.table.assign(problems.size(), std::vector<double>(grid.values.size(), 0.0));

  struct Task { size_t prob; size_t gi; };
  std::vector<Task> tasks;
  for (size_t p = 0; p < problems.size(); ++p)
    for (size_t gi = 0; gi < grid.values.size(); ++gi) tasks.push_back({p, gi});

  auto run_range = [&](size_t lo, size_t hi) {
    for (size_t ti = lo; ti < hi; ++ti) {
      auto [p, gi] = tasks[ti];
      // the split problem keeps only split_fraction of the data-fidelity
      // terms, so a grid value lambda balances it like lambda/fraction on the
      // full problem; rescale so scores are comparable across the grid in
      // full-problem units
      double value = grid.values[gi] * grid.split_fraction;
      Reconstructor rec = [&method, value](const ReconProblem& pr) { return method(pr, value); };
      result.table[p][gi] =
          noise2self_score(rec, problems[p], grid.num_splits, mix_seed(seed, p),
                           grid.split_fraction);
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    run_range(0, tasks.size());
  } else {
    std::vector<std::thread> workers;
    size_t chunk = (tasks.size() + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      size_t lo = j * chunk, hi = std::min(tasks.size(), lo + chunk);
      if (lo < hi) workers.emplace_back(run_range, lo, hi);
    }
    for (auto& w : workers) w.join();
  }

  double log_sum = 0;
  for (size_t p = 0; p < problems.size(); ++p) {
    size_t best = 0;
    for (size_t gi = 1; gi < grid.values.size(); ++gi)
      if (result.table[p][gi] < result.table[p][best]) best = gi;
    result.per_problem_winner.push_back(grid.values[best]);
    log_sum += std::log(grid.values[best]);
  }
  result.selected = std::exp(log_sum / double(problems.size()));

  for (size_t gi = 0; gi < grid.values.size(); ++gi) {
    double mean = 0;
    for (size_t p = 0; p < problems.size(); ++p) mean += result.table[p][gi];
    mean /= double(problems.size());
    double var = 0;
    for (size_t p = 0; p < problems.size(); ++p) {
      double d = result.table[p][gi] - mean;
      var += d * d;
    }
    result.mean_score.push_back(mean);
    result.std_score.push_back(problems.size() > 1 ? std::sqrt(var / (problems.size() - 1)) : 0.0);
  }
  return result;
}

}  // namespace ssrc

#endif
