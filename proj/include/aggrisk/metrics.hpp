#pragma once

// Empirical risk metrics over a year loss table.
//
// PML at return period R is the k-th largest annual loss with
// k = ceil(N / R). TVaR at level alpha is the mean of the m largest losses
// with m = ceil((1 - alpha) * N), summed in descending order.

#include <aggrisk/core_model.hpp>
#include <aggrisk/error.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace aggrisk {

struct YltSummary {
  std::size_t trial_count = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

namespace detail {

// ceil(x) that treats values within a few ulps of an integer as that integer,
// so ceil((1 - 0.99) * 100) is 1 and not 2.
inline std::size_t tail_count(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace detail

// Order-statistic rank used by compute_pml.
inline std::size_t pml_rank(std::size_t trial_count, double return_period) {
  if (trial_count == 0) throw PreconditionError("PML of an empty year loss table");
  if (!(return_period > 1.0)) {
    throw PreconditionError("return period must exceed 1 year");
  }
  if (return_period > static_cast<double>(trial_count)) {
    throw PreconditionError("return period " + std::to_string(return_period) +
                            " exceeds trial count " + std::to_string(trial_count) +
                            "; tail not resolvable");
  }
  return std::max<std::size_t>(1, detail::tail_count(static_cast<double>(trial_count) / return_period));
}

inline std::size_t tvar_tail_size(std::size_t trial_count, double alpha) {
  if (trial_count == 0) throw PreconditionError("TVaR of an empty year loss table");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  const std::size_t m = detail::tail_count((1.0 - alpha) * static_cast<double>(trial_count));
  if (m == 0) {
    throw PreconditionError("alpha " + std::to_string(alpha) + " leaves an empty tail for " +
                            std::to_string(trial_count) + " trials");
  }
  return std::min(m, trial_count);
}

inline double compute_pml(std::span<const double> losses, double return_period) {
  const std::size_t k = pml_rank(losses.size(), return_period);
  std::vector<double> v(losses.begin(), losses.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(),
                   std::greater<>());
  return v[k - 1];
}

inline double compute_pml(const TrialLossTable& ylt, double return_period) {
  return compute_pml(std::span<const double>(ylt.losses), return_period);
}

inline double compute_tvar(std::span<const double> losses, double alpha) {
  const std::size_t m = tvar_tail_size(losses.size(), alpha);
  std::vector<double> v(losses.begin(), losses.end());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end(),
                    std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += v[i];
  return sum / static_cast<double>(m);
}

inline double compute_tvar(const TrialLossTable& ylt, double alpha) {
  return compute_tvar(std::span<const double>(ylt.losses), alpha);
}

// One pass (Welford).
inline YltSummary summarize(std::span<const double> losses) {
  if (losses.empty()) throw PreconditionError("cannot summarize an empty year loss table");
  YltSummary s;
  s.min = s.max = losses.front();
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : losses) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.trial_count = n;
  s.mean = std::clamp(mean, s.min, s.max);
  s.std_dev = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
  return s;
}

inline YltSummary summarize(const TrialLossTable& ylt) {
  return summarize(std::span<const double>(ylt.losses));
}

}  // namespace aggrisk
