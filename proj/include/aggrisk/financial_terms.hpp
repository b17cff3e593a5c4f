#pragma once

// Excess-of-loss contract terms. Both engines call these functions and only
// these, so their floating-point behaviour is identical by construction.

#include <aggrisk/core_model.hpp>
#include <aggrisk/error.hpp>

#include <algorithm>
#include <span>
#include <string>

namespace aggrisk {

// Weighted sum of per-ELT losses, accumulated in slot order 0, 1, 2, ...
inline double apply_participation(std::span<const double> losses,
                                  std::span<const double> participations) {
  if (losses.size() != participations.size()) {
    throw PreconditionError("participation vector has " + std::to_string(participations.size()) +
                            " factors for " + std::to_string(losses.size()) + " losses");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) sum += participations[k] * losses[k];
  return sum;
}

namespace detail {

inline double excess_of_loss(double loss, double retention, double limit, const char* what) {
  if (!(loss >= 0.0)) {
    throw PreconditionError(std::string(what) + " terms applied to negative or NaN loss");
  }
  return std::min(limit, std::max(0.0, loss - retention));
}

}  // namespace detail

// min(occ_limit, max(0, loss - occ_retention)) for a single event loss.
inline double apply_occurrence_terms(double loss, const FinancialTerms& terms) {
  return detail::excess_of_loss(loss, terms.occ_retention, terms.occ_limit, "occurrence");
}

// min(agg_limit, max(0, loss - agg_retention)) for an annual trial loss.
inline double apply_aggregate_terms(double loss, const FinancialTerms& terms) {
  return detail::excess_of_loss(loss, terms.agg_retention, terms.agg_limit, "aggregate");
}

}  // namespace aggrisk
