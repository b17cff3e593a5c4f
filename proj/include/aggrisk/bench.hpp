#pragma once

// Worker-scaling and layer-scaling benchmarks over the MapReduce engine.

#include <aggrisk/core_model.hpp>
#include <aggrisk/datagen.hpp>
#include <aggrisk/engine_mapreduce.hpp>
#include <aggrisk/error.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace aggrisk::bench {

// mappers = reducers = workers, two input chunks per worker.
inline ExecutionPlan plan_for_workers(std::size_t workers) {
  return ExecutionPlan{workers, workers, 2 * workers, std::nullopt};
}

struct BenchRow {
  std::size_t workers = 0;
  ExecutionPlan plan;
  int round = 1;              // 1 or 2
  double wall_seconds = 0.0;  // median over repetitions
  PhaseProfile phase;         // profile of the median repetition
  double speedup = 0.0;       // vs the 1-worker run of the same round
  double efficiency = 0.0;    // speedup / workers
};

struct BenchReport {
  std::vector<BenchRow> rows;

  std::string to_csv() const;
  std::string to_table() const;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Index of the median sample; the lower one for an even count.
inline std::size_t median_index(std::vector<std::pair<double, std::size_t>>& samples) {
  std::sort(samples.begin(), samples.end());
  return samples[(samples.size() - 1) / 2].second;
}

struct RoundSample {
  PhaseProfile round1;
  PhaseProfile round2;
};

inline RoundSample median_run(const YearEventTable& yet, const Portfolio& pf,
                              const ExecutionPlan& plan, std::size_t reps, PhaseProfile& r1,
                              PhaseProfile& r2) {
  std::vector<RoundSample> runs;
  for (std::size_t i = 0; i < reps; ++i) {
    MapReduceResult res = run_mapreduce(yet, pf, plan);
    runs.push_back({res.round1_profile, res.round2_profile});
  }
  std::vector<std::pair<double, std::size_t>> t1, t2;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    t1.emplace_back(runs[i].round1.total, i);
    t2.emplace_back(runs[i].round2.total, i);
  }
  r1 = runs[median_index(t1)].round1;
  r2 = runs[median_index(t2)].round2;
  return {r1, r2};
}

}  // namespace detail

// Runs the engine with plan_for_workers(w) for every w, `reps` times each.
// Rows come in worker order, round 1 then round 2 for each worker count.
inline BenchReport run_bench(const YearEventTable& yet, const Portfolio& pf,
                             std::span<const std::size_t> workers, std::size_t reps,
                             const std::optional<std::filesystem::path>& spill_dir = {}) {
  if (workers.empty()) throw PreconditionError("worker list is empty");
  if (reps == 0) throw PreconditionError("repetitions must be >= 1");
  for (std::size_t w : workers) {
    if (w == 0) throw PreconditionError("worker counts must be >= 1");
  }

  auto plan_of = [&](std::size_t w) {
    ExecutionPlan p = plan_for_workers(w);
    p.spill_dir = spill_dir;
    return p;
  };

  std::vector<PhaseProfile> round1(workers.size()), round2(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) {
    detail::median_run(yet, pf, plan_of(workers[i]), reps, round1[i], round2[i]);
  }

  PhaseProfile base1, base2;
  if (auto it = std::find(workers.begin(), workers.end(), std::size_t{1}); it != workers.end()) {
    const auto i = static_cast<std::size_t>(it - workers.begin());
    base1 = round1[i];
    base2 = round2[i];
  } else {
    detail::median_run(yet, pf, plan_of(1), reps, base1, base2);
  }

  BenchReport report;
  for (std::size_t i = 0; i < workers.size(); ++i) {
    const std::size_t w = workers[i];
    for (int round : {1, 2}) {
      const PhaseProfile& prof = round == 1 ? round1[i] : round2[i];
      const PhaseProfile& base = round == 1 ? base1 : base2;
      BenchRow row;
      row.workers = w;
      row.plan = plan_of(w);
      row.round = round;
      row.wall_seconds = prof.total;
      row.phase = prof;
      row.speedup = base.total / prof.total;
      row.efficiency = row.speedup / static_cast<double>(w);
      report.rows.push_back(row);
    }
  }
  return report;
}

inline std::string BenchReport::to_csv() const {
  std::string out =
      "workers,mappers,reducers,chunks,round,wall_seconds,map_compute,map_io,shuffle,"
      "reduce_compute,reduce_io,speedup,efficiency\n";
  for (const BenchRow& r : rows) {
    out += std::to_string(r.workers) + "," + std::to_string(r.plan.mapper_count) + "," +
           std::to_string(r.plan.reducer_count) + "," + std::to_string(r.plan.chunk_count) + "," +
           std::to_string(r.round) + "," + detail::num(r.wall_seconds) + "," +
           detail::num(r.phase.map_compute) + "," + detail::num(r.phase.map_io) + "," +
           detail::num(r.phase.shuffle) + "," + detail::num(r.phase.reduce_compute) + "," +
           detail::num(r.phase.reduce_io) + "," + detail::num(r.speedup) + "," +
           detail::num(r.efficiency) + "\n";
  }
  return out;
}

inline std::string BenchReport::to_table() const {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%7s %5s %10s %11s %9s %9s %11s %10s %8s %6s\n", "workers",
                "round", "wall[s]", "map_comp[s]", "map_io[s]", "shuffle[s]", "red_comp[s]",
                "red_io[s]", "speedup", "eff");
  out += line;
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof line, "%7zu %5d %10.4f %11.4f %9.4f %9.4f %11.4f %10.4f %8.3f %6.3f\n",
                  r.workers, r.round, r.wall_seconds, r.phase.map_compute, r.phase.map_io,
                  r.phase.shuffle, r.phase.reduce_compute, r.phase.reduce_io, r.speedup,
                  r.efficiency);
    out += line;
  }
  return out;
}

struct LayerScalingRow {
  std::size_t layers = 0;
  double round2_seconds = 0.0;  // median over repetitions
};

inline void check_layer_counts(std::span<const std::size_t> counts) {
  if (counts.empty()) throw PreconditionError("layer count list is empty");
  std::set<std::size_t> seen;
  for (std::size_t n : counts) {
    if (n == 0) throw PreconditionError("layer counts must be >= 1");
    if (!seen.insert(n).second) {
      throw PreconditionError("duplicate layer count " + std::to_string(n));
    }
  }
}

// Second-round time as a function of the number of layers. One portfolio
// with max(counts) layers is generated from `cfg`; the n-layer portfolio the
// generator would produce is its first n layers, so round 1 runs once and
// round 2 is timed over each prefix of the layer loss tables.
inline std::vector<LayerScalingRow> run_layer_scaling(const YearEventTable& yet,
                                                      const EltPool& pool, GenConfig cfg,
                                                      std::span<const std::size_t> counts,
                                                      const ExecutionPlan& plan,
                                                      std::size_t reps) {
  check_layer_counts(counts);
  if (reps == 0) throw PreconditionError("repetitions must be >= 1");
  const std::size_t max_layers = *std::max_element(counts.begin(), counts.end());
  cfg.programs = 1;
  cfg.layers_per_program = static_cast<std::uint32_t>(max_layers);
  cfg.elt_count = static_cast<std::uint32_t>(pool.size());
  cfg.elts_per_layer = std::min<std::uint32_t>(cfg.elts_per_layer, cfg.elt_count);
  const Portfolio pf = generate_portfolio(cfg, pool);
  require_valid_portfolio(pf);

  std::vector<TrialLossTable> llts;
  for (const Layer& layer : pf.programs.front().layers) {
    const CombinedEltIndex index = combine_layer_elts(pf, layer);
    PhaseProfile ignored;
    RoundStats stats;
    llts.push_back(run_round1(yet, layer, index, plan, ignored, stats));
  }

  std::vector<LayerScalingRow> rows;
  for (std::size_t n : counts) {
    std::vector<std::pair<double, std::size_t>> samples;
    for (std::size_t i = 0; i < reps; ++i) {
      PhaseProfile prof;
      RoundStats stats;
      run_round2(std::span<const TrialLossTable>(llts).first(n), yet.trial_count(), plan, prof,
                 stats);
      samples.emplace_back(prof.total, i);
    }
    std::sort(samples.begin(), samples.end());
    rows.push_back({n, samples[(samples.size() - 1) / 2].first});
  }
  return rows;
}

inline std::string layer_scaling_csv(std::span<const LayerScalingRow> rows) {
  std::string out = "layers,round2_seconds\n";
  for (const auto& r : rows) out += std::to_string(r.layers) + "," + detail::num(r.round2_seconds) + "\n";
  return out;
}

}  // namespace aggrisk::bench
