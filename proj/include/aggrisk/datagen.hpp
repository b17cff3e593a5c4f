#pragma once

// Seeded synthetic inputs: year event tables, ELT pools and portfolios.
// Each artifact draws from its own stream derived from the master seed, so
// artifacts are reproducible independently of one another.

#include <aggrisk/core_model.hpp>
#include <aggrisk/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace aggrisk {

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t trial_count = 1000;
  std::uint32_t events_per_trial = 100;
  std::uint32_t event_universe_size = 10000;
  std::uint32_t elt_count = 16;
  double coverage_probability = 0.5;
  double loss_mean = 1000.0;
  std::uint32_t programs = 1;
  std::uint32_t layers_per_program = 1;
  std::uint32_t elts_per_layer = 16;

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

// 100,000 trials x 1000 events, one program, one layer over sixteen ELTs.
inline GenConfig full_scale_config(std::uint64_t seed = 2013) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.trial_count = 100000;
  cfg.events_per_trial = 1000;
  return cfg;
}

// The same shape at 1/100 of the trials and 1/10 of the events.
inline GenConfig desk_scale_config(std::uint64_t seed = 2013) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.trial_count = 10000;
  cfg.events_per_trial = 100;
  return cfg;
}

inline std::vector<std::string> validate_config(const GenConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.trial_count < 1) out.emplace_back("trial_count must be >= 1");
  if (cfg.trial_count > std::numeric_limits<std::uint32_t>::max()) {
    out.emplace_back("trial_count exceeds 32-bit trial ids");
  }
  if (cfg.events_per_trial < 1) out.emplace_back("events_per_trial must be >= 1");
  if (cfg.event_universe_size < 1) out.emplace_back("event_universe_size must be >= 1");
  if (cfg.elt_count < 1) out.emplace_back("elt_count must be >= 1");
  if (!(cfg.coverage_probability > 0.0 && cfg.coverage_probability <= 1.0)) {
    out.emplace_back("coverage_probability must lie in (0, 1]");
  }
  if (!(cfg.loss_mean > 0.0) || !std::isfinite(cfg.loss_mean)) {
    out.emplace_back("loss_mean must be finite and > 0");
  }
  if (cfg.programs < 1) out.emplace_back("programs must be >= 1");
  if (cfg.layers_per_program < 1) out.emplace_back("layers_per_program must be >= 1");
  if (cfg.elts_per_layer < 1) out.emplace_back("elts_per_layer must be >= 1");
  if (cfg.elts_per_layer > cfg.elt_count) out.emplace_back("elts_per_layer exceeds elt_count");
  return out;
}

inline void require_valid_config(const GenConfig& cfg) {
  const auto problems = validate_config(cfg);
  if (problems.empty()) return;
  std::string msg = "invalid generator config:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ValidationError(msg);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { yet = 1, portfolio = 2, elt_base = 1000 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream)));
}

}  // namespace detail

inline YearEventTable generate_yet(const GenConfig& cfg) {
  require_valid_config(cfg);
  auto rng = detail::stream_rng(cfg.seed, static_cast<std::uint64_t>(detail::Stream::yet));
  std::uniform_int_distribution<std::uint32_t> pick_event(1, cfg.event_universe_size);
  std::uniform_real_distribution<double> pick_time(0.0, kDaysPerYear);
  const double last_day = std::nextafter(kDaysPerYear, 0.0);

  const std::size_t width = cfg.events_per_trial;
  std::vector<EventId> ids(cfg.trial_count * width);
  std::vector<double> ts(cfg.trial_count * width);
  for (std::size_t t = 0; t < cfg.trial_count; ++t) {
    const std::size_t base = t * width;
    for (std::size_t k = 0; k < width; ++k) {
      ids[base + k] = EventId(pick_event(rng));
      ts[base + k] = std::min(pick_time(rng), last_day);
    }
    // Event draws are i.i.d., so pairing them with the sorted times keeps
    // the joint distribution.
    std::sort(ts.begin() + static_cast<std::ptrdiff_t>(base),
              ts.begin() + static_cast<std::ptrdiff_t>(base + width));
  }
  return YearEventTable(cfg.trial_count, cfg.events_per_trial, std::move(ids), std::move(ts));
}

// Each universe event is covered by each ELT with coverage_probability; a
// covered event's loss is exponential with mean loss_mean.
inline EltPool generate_elt_pool(const GenConfig& cfg) {
  require_valid_config(cfg);
  EltPool pool;
  for (std::uint32_t id = 1; id <= cfg.elt_count; ++id) {
    auto rng = detail::stream_rng(
        cfg.seed, static_cast<std::uint64_t>(detail::Stream::elt_base) + id);
    std::bernoulli_distribution covered(cfg.coverage_probability);
    std::exponential_distribution<double> loss(1.0 / cfg.loss_mean);
    std::vector<EltRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.event_universe_size * cfg.coverage_probability) + 16);
    for (std::uint32_t e = 1; e <= cfg.event_universe_size; ++e) {
      if (covered(rng)) records.push_back({EventId(e), loss(rng)});
    }
    pool.emplace(id, EventLossTable(id, std::move(records)));
  }
  return pool;
}

inline Portfolio generate_portfolio(const GenConfig& cfg, EltPool pool) {
  require_valid_config(cfg);
  if (pool.size() < cfg.elts_per_layer) {
    throw PreconditionError("ELT pool holds " + std::to_string(pool.size()) + " tables, layers need " +
                            std::to_string(cfg.elts_per_layer));
  }
  auto rng = detail::stream_rng(cfg.seed, static_cast<std::uint64_t>(detail::Stream::portfolio));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<std::uint32_t> ids;
  for (const auto& [id, elt] : pool) ids.push_back(id);

  // Rough scale of one event's loss to a layer and of one trial's sum.
  const double event_scale = cfg.loss_mean * cfg.coverage_probability * cfg.elts_per_layer;
  const double trial_scale = event_scale * cfg.events_per_trial;

  Portfolio pf;
  for (std::uint32_t p = 1; p <= cfg.programs; ++p) {
    Program program{p, {}};
    for (std::uint32_t l = 1; l <= cfg.layers_per_program; ++l) {
      Layer layer;
      layer.layer_id = l;
      // Partial Fisher-Yates: the first elts_per_layer slots are the pick.
      for (std::size_t i = 0; i < cfg.elts_per_layer; ++i) {
        std::uniform_int_distribution<std::size_t> j(i, ids.size() - 1);
        std::swap(ids[i], ids[j(rng)]);
      }
      layer.covered_elts.assign(ids.begin(), ids.begin() + cfg.elts_per_layer);
      layer.participations.assign(cfg.elts_per_layer, 1.0);
      layer.terms.occ_retention = between(0.0, 1.0) * event_scale;
      layer.terms.occ_limit = layer.terms.occ_retention + between(0.5, 3.0) * event_scale;
      layer.terms.agg_retention = between(0.0, 0.2) * trial_scale;
      layer.terms.agg_limit = layer.terms.agg_retention + between(0.2, 1.0) * trial_scale;
      program.layers.push_back(std::move(layer));
    }
    pf.programs.push_back(std::move(program));
  }
  pf.elt_pool = std::move(pool);
  return pf;
}

inline nlohmann::json config_to_json(const GenConfig& cfg) {
  return {{"seed", cfg.seed},
          {"trial_count", cfg.trial_count},
          {"events_per_trial", cfg.events_per_trial},
          {"event_universe_size", cfg.event_universe_size},
          {"elt_count", cfg.elt_count},
          {"coverage_probability", cfg.coverage_probability},
          {"loss_mean", cfg.loss_mean},
          {"loss_distribution", "exponential"},
          {"programs", cfg.programs},
          {"layers_per_program", cfg.layers_per_program},
          {"elts_per_layer", cfg.elts_per_layer}};
}

inline GenConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("generator config must be a JSON object");
  GenConfig cfg;
  auto take = [&](const char* name, auto& dst) {
    auto it = j.find(name);
    if (it == j.end()) throw MissingFieldError(name);
    using T = std::decay_t<decltype(dst)>;
    if (!it->is_number()) throw ValidationError(std::string(name) + " must be a number");
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
        throw ValidationError(std::string(name) + " must be a non-negative integer");
      }
    }
    dst = it->get<T>();
  };
  take("seed", cfg.seed);
  take("trial_count", cfg.trial_count);
  take("events_per_trial", cfg.events_per_trial);
  take("event_universe_size", cfg.event_universe_size);
  take("elt_count", cfg.elt_count);
  take("coverage_probability", cfg.coverage_probability);
  take("loss_mean", cfg.loss_mean);
  take("programs", cfg.programs);
  take("layers_per_program", cfg.layers_per_program);
  take("elts_per_layer", cfg.elts_per_layer);
  if (auto it = j.find("loss_distribution"); it != j.end() && *it != "exponential") {
    throw ValidationError("only the exponential loss distribution is supported");
  }
  return cfg;
}

}  // namespace aggrisk
