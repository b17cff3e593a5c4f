#pragma once

// Sequential reference engine. Kept single-threaded and free of any parallel
// machinery: it is the ground truth the MapReduce engine is checked against.

#include <aggrisk/core_model.hpp>
#include <aggrisk/error.hpp>
#include <aggrisk/financial_terms.hpp>

#include <string>
#include <vector>

namespace aggrisk {

struct SequentialResult {
  TrialLossTable ylt;
  std::vector<TrialLossTable> llts;  // program order, then layer order
  std::vector<TrialLossTable> plts;  // program order
};

// Throws ValidationError listing every violation.
inline void require_valid_portfolio(const Portfolio& pf) {
  const std::vector<std::string> violations = validate_portfolio(pf);
  if (violations.empty()) return;
  std::string msg = "invalid portfolio:";
  for (const std::string& v : violations) msg += "\n  " + v;
  throw ValidationError(msg);
}

// Layer loss table of one layer: per event participation-weighted loss,
// occurrence terms, sum in event order, aggregate terms.
inline TrialLossTable sequential_layer_losses(const YearEventTable& yet, const Layer& layer,
                                              const CombinedEltIndex& index) {
  TrialLossTable llt{LossRole::layer, layer.layer_id, {}};
  llt.losses.resize(yet.trial_count());
  for (std::uint32_t trial_id = 1; trial_id <= yet.trial_count(); ++trial_id) {
    const TrialView trial = yet.trial(trial_id);
    double trial_loss = 0.0;
    for (EventId e : trial.events) {
      const double event_loss = apply_participation(lookup_losses(index, e), layer.participations);
      trial_loss += apply_occurrence_terms(event_loss, layer.terms);
    }
    llt.losses[trial_id - 1] = apply_aggregate_terms(trial_loss, layer.terms);
  }
  return llt;
}

inline SequentialResult run_sequential(const YearEventTable& yet, const Portfolio& pf) {
  require_valid_portfolio(pf);

  const std::size_t trials = yet.trial_count();
  SequentialResult out;
  out.ylt = TrialLossTable{LossRole::portfolio, std::nullopt, std::vector<double>(trials, 0.0)};

  for (const Program& program : pf.programs) {
    TrialLossTable plt{LossRole::program, program.program_id, std::vector<double>(trials, 0.0)};
    for (const Layer& layer : program.layers) {
      const CombinedEltIndex index = combine_layer_elts(pf, layer);
      TrialLossTable llt = sequential_layer_losses(yet, layer, index);
      for (std::size_t t = 0; t < trials; ++t) {
        plt.losses[t] += llt.losses[t];
        // The portfolio total is one left fold over every layer in canonical
        // (program, layer) order, the same order the second MapReduce round
        // sums in. Folding PLTs instead would regroup the additions.
        out.ylt.losses[t] += llt.losses[t];
      }
      out.llts.push_back(std::move(llt));
    }
    out.plts.push_back(std::move(plt));
  }
  return out;
}

}  // namespace aggrisk
