#pragma once

// Two-round MapReduce aggregate risk engine.
//
// Round 1 (once per layer): mappers turn (trial, event) into the layer's
// participation-weighted event loss; reducers apply occurrence terms, sum per
// trial and apply aggregate terms, giving one layer loss table (LLT).
// Round 2: mappers re-key every LLT entry by trial; reducers sum a trial's
// layer losses into the year loss table (YLT).
//
// Every record carries a `seq` ordering key (event position in round 1,
// layer ordinal in round 2). Reducers sort by it before summing, so the float
// additions happen in the same order as the sequential engine and the YLT is
// bit-identical to it for every plan.

#include <aggrisk/core_model.hpp>
#include <aggrisk/engine_seq.hpp>
#include <aggrisk/error.hpp>
#include <aggrisk/financial_terms.hpp>
#include <aggrisk/input_split.hpp>
#include <aggrisk/mapreduce_runtime.hpp>

#include <algorithm>
#include <chrono>
#include <span>
#include <string>
#include <vector>

namespace aggrisk {

using mr::ExecutionPlan;
using mr::PhaseProfile;
using mr::RoundStats;
using mr::partition;

struct KeyedLoss {
  std::uint32_t trial_id = 0;
  std::uint32_t seq = 0;
  double loss = 0.0;

  std::uint32_t key() const noexcept { return trial_id; }

  friend bool operator==(const KeyedLoss&, const KeyedLoss&) = default;
};

static_assert(sizeof(KeyedLoss) == 16);

// One KeyedLoss per (trial, event) in the chunk. `emit` receives one batch
// per trial.
template <typename Emit>
void map_round1(const YearEventTable& yet, TrialRange chunk, const Layer& layer,
                const CombinedEltIndex& index, Emit&& emit) {
  std::vector<KeyedLoss> batch(yet.events_per_trial());
  for (std::uint32_t trial_id = chunk.first; trial_id < chunk.end(); ++trial_id) {
    const TrialView trial = yet.trial(trial_id);
    for (std::uint32_t pos = 0; pos < trial.size(); ++pos) {
      const double loss =
          apply_participation(lookup_losses(index, trial.events[pos]), layer.participations);
      batch[pos] = KeyedLoss{trial_id, pos, loss};
    }
    emit(std::span<const KeyedLoss>(batch));
  }
}

inline std::vector<KeyedLoss> map_round1(const YearEventTable& yet, TrialRange chunk,
                                         const Layer& layer, const CombinedEltIndex& index) {
  std::vector<KeyedLoss> out;
  out.reserve(std::size_t{chunk.count} * yet.events_per_trial());
  map_round1(yet, chunk, layer, index,
             [&](std::span<const KeyedLoss> b) { out.insert(out.end(), b.begin(), b.end()); });
  return out;
}

namespace detail {

// Sorts by seq and rejects repeated seq values.
inline void order_by_seq(std::uint32_t trial_id, std::span<KeyedLoss> losses) {
  auto by_seq = [](const KeyedLoss& a, const KeyedLoss& b) { return a.seq < b.seq; };
  if (!std::is_sorted(losses.begin(), losses.end(), by_seq)) {
    std::sort(losses.begin(), losses.end(), by_seq);
  }
  for (std::size_t i = 1; i < losses.size(); ++i) {
    if (losses[i].seq == losses[i - 1].seq) {
      throw ShuffleFault("trial " + std::to_string(trial_id) + " received seq " +
                         std::to_string(losses[i].seq) + " twice");
    }
  }
}

}  // namespace detail

// Layer loss of one trial: occurrence terms per event, sum in seq order,
// aggregate terms on the sum. Reorders `losses` in place.
inline double reduce_round1(std::uint32_t trial_id, std::span<KeyedLoss> losses,
                            const FinancialTerms& terms) {
  detail::order_by_seq(trial_id, losses);
  double trial_loss = 0.0;
  for (const KeyedLoss& kl : losses) trial_loss += apply_occurrence_terms(kl.loss, terms);
  return apply_aggregate_terms(trial_loss, terms);
}

// Pass-through re-keying of LLT entries; seq carries the layer ordinal.
template <typename Emit>
void map_round2(const TrialLossTable& llt, TrialRange chunk, std::uint32_t layer_ordinal,
                Emit&& emit) {
  std::vector<KeyedLoss> batch;
  batch.reserve(chunk.count);
  for (std::uint32_t trial_id = chunk.first; trial_id < chunk.end(); ++trial_id) {
    batch.push_back(KeyedLoss{trial_id, layer_ordinal, llt.loss(trial_id)});
  }
  if (!batch.empty()) emit(std::span<const KeyedLoss>(batch));
}

inline std::vector<KeyedLoss> map_round2(const TrialLossTable& llt, TrialRange chunk,
                                         std::uint32_t layer_ordinal) {
  std::vector<KeyedLoss> out;
  map_round2(llt, chunk, layer_ordinal,
             [&](std::span<const KeyedLoss> b) { out.insert(out.end(), b.begin(), b.end()); });
  return out;
}

// Portfolio loss of one trial: layer losses summed in ordinal order.
inline double reduce_round2(std::uint32_t trial_id, std::span<KeyedLoss> losses) {
  detail::order_by_seq(trial_id, losses);
  double total = 0.0;
  for (const KeyedLoss& kl : losses) total += kl.loss;
  return total;
}

struct MapReduceResult {
  TrialLossTable ylt;
  std::vector<TrialLossTable> llts;  // program order, then layer order
  PhaseProfile profile;              // whole run
  PhaseProfile round1_profile;       // summed over layers
  PhaseProfile round2_profile;
  std::vector<RoundStats> round1_stats;  // one per layer
  RoundStats round2_stats;
};

struct MapReduceHooks {
  mr::RoundHooks round1;
  mr::RoundHooks round2;
};

// First round for one layer: YET chunks in, LLT out.
inline TrialLossTable run_round1(const YearEventTable& yet, const Layer& layer,
                                 const CombinedEltIndex& index, const ExecutionPlan& plan,
                                 PhaseProfile& profile, RoundStats& stats,
                                 const mr::RoundHooks* hooks = nullptr) {
  const std::vector<TrialRange> chunks = split_trials(yet.trial_count(), plan.chunk_count);
  const std::size_t reducers = plan.reducer_count;
  const std::uint32_t width = yet.events_per_trial();

  auto map_task = [&](std::size_t task, mr::Emitter<KeyedLoss>& out) {
    const TrialRange chunk = chunks[task];
    // Trials are routed by id mod reducers, so each bucket's size is known.
    for (std::size_t r = 0; r < reducers && !chunk.empty(); ++r) {
      const std::uint32_t first_r = chunk.first + static_cast<std::uint32_t>(
                                                      (reducers + r - chunk.first % reducers) % reducers);
      const std::size_t n =
          first_r < chunk.end() ? (chunk.end() - 1 - first_r) / reducers + 1 : 0;
      out.reserve(r, n * width);
    }
    map_round1(yet, chunk, layer, index, [&](std::span<const KeyedLoss> b) { out.emit(b); });
  };
  auto reduce = [&](std::uint32_t trial_id, std::span<KeyedLoss> group) {
    if (group.size() != width) {
      throw ShuffleFault("trial " + std::to_string(trial_id) + " received " +
                         std::to_string(group.size()) + " event losses, expected " +
                         std::to_string(width));
    }
    return reduce_round1(trial_id, group, layer.terms);
  };

  auto round = mr::run_round<KeyedLoss>(chunks.size(), plan, map_task, reduce, hooks);

  TrialLossTable llt{LossRole::layer, layer.layer_id,
                     std::vector<double>(yet.trial_count(), apply_aggregate_terms(0.0, layer.terms))};
  if (width > 0 && round.output.size() != yet.trial_count()) {
    throw ShuffleFault("round 1 produced " + std::to_string(round.output.size()) +
                       " trial losses for " + std::to_string(yet.trial_count()) + " trials");
  }
  for (const auto& [trial_id, loss] : round.output) llt.losses[trial_id - 1] = loss;
  profile += round.profile;
  stats = round.stats;
  return llt;
}

// Second round: all LLTs in, YLT out. Skips the program level; the sum over
// layers is taken in the same canonical order the sequential engine uses.
inline TrialLossTable run_round2(std::span<const TrialLossTable> llts, std::size_t trial_count,
                                 const ExecutionPlan& plan, PhaseProfile& profile,
                                 RoundStats& stats, const mr::RoundHooks* hooks = nullptr) {
  const std::vector<TrialRange> chunks = split_trials(trial_count, plan.chunk_count);
  const std::size_t tasks = llts.size() * chunks.size();

  auto map_task = [&](std::size_t task, mr::Emitter<KeyedLoss>& out) {
    const std::size_t ordinal = task / chunks.size();
    map_round2(llts[ordinal], chunks[task % chunks.size()], static_cast<std::uint32_t>(ordinal),
               [&](std::span<const KeyedLoss> b) { out.emit(b); });
  };
  auto reduce = [&](std::uint32_t trial_id, std::span<KeyedLoss> group) {
    if (group.size() != llts.size()) {
      throw ShuffleFault("trial " + std::to_string(trial_id) + " received " +
                         std::to_string(group.size()) + " layer losses, expected " +
                         std::to_string(llts.size()));
    }
    return reduce_round2(trial_id, group);
  };

  auto round = mr::run_round<KeyedLoss>(tasks, plan, map_task, reduce, hooks);

  TrialLossTable ylt{LossRole::portfolio, std::nullopt, std::vector<double>(trial_count, 0.0)};
  if (!llts.empty() && round.output.size() != trial_count) {
    throw ShuffleFault("round 2 produced " + std::to_string(round.output.size()) +
                       " trial losses for " + std::to_string(trial_count) + " trials");
  }
  for (const auto& [trial_id, loss] : round.output) ylt.losses[trial_id - 1] = loss;
  profile += round.profile;
  stats = round.stats;
  return ylt;
}

inline MapReduceResult run_mapreduce(const YearEventTable& yet, const Portfolio& pf,
                                     const ExecutionPlan& plan,
                                     const MapReduceHooks* hooks = nullptr) {
  mr::validate_plan(plan);
  require_valid_portfolio(pf);
  const auto start = std::chrono::steady_clock::now();

  MapReduceResult out;
  for (const Program& program : pf.programs) {
    for (const Layer& layer : program.layers) {
      // Built once, shared read-only by every mapper of the round.
      const CombinedEltIndex index = combine_layer_elts(pf, layer);
      RoundStats stats;
      out.llts.push_back(run_round1(yet, layer, index, plan, out.round1_profile, stats,
                                    hooks ? &hooks->round1 : nullptr));
      out.round1_stats.push_back(stats);
    }
  }
  out.ylt = run_round2(out.llts, yet.trial_count(), plan, out.round2_profile, out.round2_stats,
                       hooks ? &hooks->round2 : nullptr);

  out.profile = out.round1_profile;
  out.profile += out.round2_profile;
  out.profile.total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace aggrisk
