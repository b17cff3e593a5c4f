#pragma once

// Domain data model shared by both engines: year event tables, event loss
// tables, the portfolio hierarchy, trial loss tables, and the combined ELT
// lookup index. Everything here is immutable once built and safe to share
// read-only between workers.

#include <aggrisk/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

namespace aggrisk {

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();
inline constexpr double kDaysPerYear = 365.0;

// Catastrophe event identifier. Zero is reserved for "no event".
struct EventId {
  std::uint32_t value = 0;

  constexpr EventId() = default;
  constexpr explicit EventId(std::uint32_t v) : value(v) {}

  constexpr bool valid() const noexcept { return value != 0; }

  friend constexpr auto operator<=>(EventId, EventId) = default;
};

static_assert(sizeof(EventId) == 4 && std::is_trivially_copyable_v<EventId>);

struct EventOccurrence {
  EventId event;
  double timestamp = 0.0;  // days since start of the contractual year

  friend bool operator==(const EventOccurrence&, const EventOccurrence&) = default;
};

// Owning per-trial representation, convenient for building small tables.
struct Trial {
  std::uint32_t trial_id = 0;
  std::vector<EventOccurrence> events;
};

// Borrowed view of one trial inside a YearEventTable.
struct TrialView {
  std::uint32_t trial_id;
  std::span<const EventId> events;
  std::span<const double> timestamps;

  std::size_t size() const noexcept { return events.size(); }
};

// Rectangular table of pre-simulated trials. Trial ids are dense 1..N and
// implied by position. Storage is two flat arrays so that the full-scale
// table (10^8 event slots) stays at 12 bytes per slot.
class YearEventTable {
 public:
  YearEventTable() = default;

  YearEventTable(std::size_t trial_count, std::uint32_t events_per_trial,
                 std::vector<EventId> event_ids, std::vector<double> timestamps)
      : trial_count_(trial_count),
        events_per_trial_(events_per_trial),
        event_ids_(std::move(event_ids)),
        timestamps_(std::move(timestamps)) {
    check();
  }

  // Throws ValidationError on ragged or non-dense input.
  static YearEventTable from_trials(std::span<const Trial> trials) {
    const std::uint32_t width =
        trials.empty() ? 0 : static_cast<std::uint32_t>(trials.front().events.size());
    std::vector<EventId> ids;
    std::vector<double> ts;
    ids.reserve(trials.size() * width);
    ts.reserve(trials.size() * width);
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const Trial& t = trials[i];
      if (t.trial_id != i + 1) {
        throw ValidationError("trial at position " + std::to_string(i) + " has id " +
                              std::to_string(t.trial_id) + ", expected " +
                              std::to_string(i + 1));
      }
      if (t.events.size() != width) {
        throw ValidationError("ragged year event table: trial " + std::to_string(t.trial_id) +
                              " has " + std::to_string(t.events.size()) + " events, expected " +
                              std::to_string(width));
      }
      for (const EventOccurrence& occ : t.events) {
        ids.push_back(occ.event);
        ts.push_back(occ.timestamp);
      }
    }
    return YearEventTable(trials.size(), width, std::move(ids), std::move(ts));
  }

  std::size_t trial_count() const noexcept { return trial_count_; }
  std::uint32_t events_per_trial() const noexcept { return events_per_trial_; }
  std::size_t event_slots() const noexcept { return event_ids_.size(); }

  // 1-based trial id.
  TrialView trial(std::uint32_t trial_id) const {
    if (trial_id == 0 || trial_id > trial_count_) {
      throw PreconditionError("trial id " + std::to_string(trial_id) + " out of range");
    }
    const std::size_t offset = std::size_t{trial_id - 1} * events_per_trial_;
    return TrialView{trial_id,
                     std::span<const EventId>(event_ids_).subspan(offset, events_per_trial_),
                     std::span<const double>(timestamps_).subspan(offset, events_per_trial_)};
  }

  std::span<const EventId> event_ids() const noexcept { return event_ids_; }
  std::span<const double> timestamps() const noexcept { return timestamps_; }

  std::vector<Trial> to_trials() const {
    std::vector<Trial> out;
    out.reserve(trial_count_);
    for (std::uint32_t id = 1; id <= trial_count_; ++id) {
      TrialView v = trial(id);
      Trial t{id, {}};
      t.events.reserve(v.size());
      for (std::size_t k = 0; k < v.size(); ++k) t.events.push_back({v.events[k], v.timestamps[k]});
      out.push_back(std::move(t));
    }
    return out;
  }

  friend bool operator==(const YearEventTable& a, const YearEventTable& b) {
    return a.trial_count_ == b.trial_count_ && a.events_per_trial_ == b.events_per_trial_ &&
           a.event_ids_ == b.event_ids_ &&
           std::equal(a.timestamps_.begin(), a.timestamps_.end(), b.timestamps_.begin(),
                      b.timestamps_.end(), [](double x, double y) {
                        return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
                      });
  }

 private:
  void check() const {
    if (trial_count_ > std::numeric_limits<std::uint32_t>::max()) {
      throw ValidationError("trial count exceeds 32-bit trial id space");
    }
    const std::size_t slots = trial_count_ * events_per_trial_;
    if (event_ids_.size() != slots || timestamps_.size() != slots) {
      throw ValidationError("year event table arrays hold " + std::to_string(event_ids_.size()) +
                            "/" + std::to_string(timestamps_.size()) + " slots, expected " +
                            std::to_string(slots));
    }
    for (std::size_t t = 0; t < trial_count_; ++t) {
      const std::size_t base = t * events_per_trial_;
      double prev = 0.0;
      for (std::size_t k = 0; k < events_per_trial_; ++k) {
        const EventId e = event_ids_[base + k];
        const double ts = timestamps_[base + k];
        if (!e.valid()) {
          throw ValidationError("trial " + std::to_string(t + 1) + " uses reserved event id 0");
        }
        if (!(ts >= 0.0 && ts < kDaysPerYear)) {
          throw ValidationError("trial " + std::to_string(t + 1) + " has timestamp " +
                                std::to_string(ts) + " outside [0, 365)");
        }
        if (ts < prev) {
          throw ValidationError("trial " + std::to_string(t + 1) +
                                " has decreasing timestamps");
        }
        prev = ts;
      }
    }
  }

  std::size_t trial_count_ = 0;
  std::uint32_t events_per_trial_ = 0;
  std::vector<EventId> event_ids_;
  std::vector<double> timestamps_;
};

struct EltRecord {
  EventId event;
  double loss = 0.0;

  friend bool operator==(const EltRecord&, const EltRecord&) = default;
};

// Event loss table for one exposure set. Records are kept sorted by event id.
class EventLossTable {
 public:
  EventLossTable() = default;

  EventLossTable(std::uint32_t elt_id, std::vector<EltRecord> records)
      : elt_id_(elt_id), records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(),
              [](const EltRecord& a, const EltRecord& b) { return a.event < b.event; });
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const EltRecord& r = records_[i];
      if (!r.event.valid()) {
        throw ValidationError("ELT " + std::to_string(elt_id_) + " uses reserved event id 0");
      }
      if (!(r.loss >= 0.0) || !std::isfinite(r.loss)) {
        throw ValidationError("ELT " + std::to_string(elt_id_) + " has invalid loss for event " +
                              std::to_string(r.event.value));
      }
      if (i > 0 && records_[i - 1].event == r.event) {
        throw ValidationError("ELT " + std::to_string(elt_id_) + " repeats event " +
                              std::to_string(r.event.value));
      }
    }
  }

  std::uint32_t elt_id() const noexcept { return elt_id_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::span<const EltRecord> records() const noexcept { return records_; }

  std::optional<double> find(EventId e) const {
    auto it = std::lower_bound(records_.begin(), records_.end(), e,
                               [](const EltRecord& r, EventId key) { return r.event < key; });
    if (it == records_.end() || it->event != e) return std::nullopt;
    return it->loss;
  }

  friend bool operator==(const EventLossTable&, const EventLossTable&) = default;

 private:
  std::uint32_t elt_id_ = 0;
  std::vector<EltRecord> records_;
};

using EltPool = std::map<std::uint32_t, EventLossTable>;

// Occurrence terms act on each event loss, aggregate terms on the annual sum.
struct FinancialTerms {
  double occ_retention = 0.0;
  double occ_limit = kUnlimited;
  double agg_retention = 0.0;
  double agg_limit = kUnlimited;

  friend bool operator==(const FinancialTerms&, const FinancialTerms&) = default;
};

struct Layer {
  std::uint32_t layer_id = 0;
  std::vector<std::uint32_t> covered_elts;
  std::vector<double> participations;  // one factor in [0, 1] per covered ELT
  FinancialTerms terms;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct Program {
  std::uint32_t program_id = 0;
  std::vector<Layer> layers;

  friend bool operator==(const Program&, const Program&) = default;
};

struct Portfolio {
  std::vector<Program> programs;
  EltPool elt_pool;

  std::size_t layer_count() const noexcept {
    std::size_t n = 0;
    for (const Program& p : programs) n += p.layers.size();
    return n;
  }

  friend bool operator==(const Portfolio&, const Portfolio&) = default;
};

enum class LossRole { layer, program, portfolio };

// Trial -> loss table. losses[i] belongs to trial i + 1. One shape serves
// the LLT, PLT and YLT roles.
struct TrialLossTable {
  LossRole role = LossRole::portfolio;
  std::optional<std::uint32_t> owner_id;  // layer or program id; empty for the YLT
  std::vector<double> losses;

  std::size_t size() const noexcept { return losses.size(); }

  double loss(std::uint32_t trial_id) const {
    if (trial_id == 0 || trial_id > losses.size()) {
      throw PreconditionError("trial id " + std::to_string(trial_id) + " out of range");
    }
    return losses[trial_id - 1];
  }

  // Bitwise comparison: distinguishes -0.0 from 0.0 and compares NaN payloads.
  bool bit_equal(const TrialLossTable& other) const {
    return losses.size() == other.losses.size() &&
           std::equal(losses.begin(), losses.end(), other.losses.begin(), [](double a, double b) {
             return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
           });
  }

  friend bool operator==(const TrialLossTable&, const TrialLossTable&) = default;
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = std::to_string(v);
  return s;
}

inline bool valid_amount(double v) { return v >= 0.0; }  // false for NaN

}  // namespace detail

// One description per violated invariant; empty iff the portfolio is valid.
inline std::vector<std::string> validate_portfolio(const Portfolio& pf) {
  std::vector<std::string> out;

  for (const auto& [key, elt] : pf.elt_pool) {
    if (key != elt.elt_id()) {
      out.push_back("ELT pool key " + std::to_string(key) + " holds ELT " +
                    std::to_string(elt.elt_id()));
    }
  }

  std::vector<std::uint32_t> program_ids;
  for (const Program& program : pf.programs) {
    if (std::find(program_ids.begin(), program_ids.end(), program.program_id) !=
        program_ids.end()) {
      out.push_back("duplicate program id " + std::to_string(program.program_id));
    }
    program_ids.push_back(program.program_id);

    if (program.layers.empty()) {
      out.push_back("program " + std::to_string(program.program_id) + " has no layers");
    }

    std::vector<std::uint32_t> layer_ids;
    for (const Layer& layer : program.layers) {
      const std::string name = "layer " + std::to_string(layer.layer_id);
      if (std::find(layer_ids.begin(), layer_ids.end(), layer.layer_id) != layer_ids.end()) {
        out.push_back("program " + std::to_string(program.program_id) +
                      " has duplicate layer id " + std::to_string(layer.layer_id));
      }
      layer_ids.push_back(layer.layer_id);

      if (layer.covered_elts.empty()) out.push_back(name + " covers no ELTs");
      if (layer.participations.size() != layer.covered_elts.size()) {
        out.push_back(name + " has " + std::to_string(layer.participations.size()) +
                      " participations for " + std::to_string(layer.covered_elts.size()) +
                      " covered ELTs");
      }
      for (std::size_t k = 0; k < layer.participations.size(); ++k) {
        const double f = layer.participations[k];
        if (!(f >= 0.0 && f <= 1.0)) {
          out.push_back(name + " participation " + detail::fmt_double(f) + " at position " +
                        std::to_string(k) + " is outside [0, 1]");
        }
      }
      for (std::uint32_t elt_id : layer.covered_elts) {
        if (!pf.elt_pool.contains(elt_id)) {
          out.push_back(name + " references unknown ELT " + std::to_string(elt_id));
        }
      }

      const FinancialTerms& t = layer.terms;
      const std::pair<const char*, double> fields[] = {{"occ_retention", t.occ_retention},
                                                       {"occ_limit", t.occ_limit},
                                                       {"agg_retention", t.agg_retention},
                                                       {"agg_limit", t.agg_limit}};
      for (const auto& [field, value] : fields) {
        if (!detail::valid_amount(value)) {
          out.push_back(name + " has invalid " + field + " " + detail::fmt_double(value));
        }
      }
      if (std::isinf(t.occ_retention) || std::isinf(t.agg_retention)) {
        out.push_back(name + " has an infinite retention");
      }
    }
  }
  return out;
}

// Merged lookup over the ELTs of one layer: event id -> loss per ELT slot.
// Built once per layer and shared read-only with every mapper.
class CombinedEltIndex {
 public:
  CombinedEltIndex() = default;

  std::size_t slot_count() const noexcept { return slot_count_; }

  // Number of distinct event ids stored.
  std::size_t size() const noexcept { return event_count_; }

  bool contains(EventId e) const { return row_of(e) != 0; }

  // Stored vector, or the all-zero vector for an absent event. One probe.
  std::span<const double> lookup(EventId e) const {
    const std::size_t row = row_of(e);
    return std::span<const double>(rows_).subspan(row * slot_count_, slot_count_);
  }

  // Distinct event ids in ascending order.
  std::vector<EventId> events() const {
    std::vector<EventId> out;
    out.reserve(event_count_);
    if (dense_) {
      for (std::size_t id = 0; id < dense_rows_.size(); ++id) {
        if (dense_rows_[id] != 0) out.emplace_back(static_cast<std::uint32_t>(id));
      }
    } else {
      for (const auto& [id, row] : sparse_rows_) out.emplace_back(id);
      std::sort(out.begin(), out.end());
    }
    return out;
  }

 private:
  template <typename EltRange>
  friend CombinedEltIndex combine_elts_impl(const EltRange& elts);

  std::size_t row_of(EventId e) const {
    if (dense_) return e.value < dense_rows_.size() ? dense_rows_[e.value] : 0;
    auto it = sparse_rows_.find(e.value);
    return it == sparse_rows_.end() ? 0 : it->second;
  }

  std::size_t slot_count_ = 0;
  std::size_t event_count_ = 0;
  // Row 0 is the shared all-zero row; rows are slot_count_ wide.
  std::vector<double> rows_;
  bool dense_ = true;
  std::vector<std::uint32_t> dense_rows_;
  std::unordered_map<std::uint32_t, std::uint32_t> sparse_rows_;
};

template <typename EltRange>
CombinedEltIndex combine_elts_impl(const EltRange& elts) {
  const std::size_t slots = std::size(elts);
  if (slots == 0) {
    throw UncoveredLayerError("cannot combine an empty ELT list: layer covers no ELTs");
  }

  std::vector<std::uint32_t> ids;
  for (const EventLossTable& elt : elts) {
    for (const EltRecord& r : elt.records()) ids.push_back(r.event.value);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  CombinedEltIndex index;
  index.slot_count_ = slots;
  index.event_count_ = ids.size();
  index.rows_.assign((ids.size() + 1) * slots, 0.0);

  // Direct addressing when ids are reasonably compact, hashing otherwise.
  const std::uint32_t max_id = ids.empty() ? 0 : ids.back();
  index.dense_ = std::size_t{max_id} <= 4 * ids.size() + 4096;
  if (index.dense_) {
    index.dense_rows_.assign(std::size_t{max_id} + 1, 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      index.dense_rows_[ids[i]] = static_cast<std::uint32_t>(i + 1);
    }
  } else {
    index.sparse_rows_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      index.sparse_rows_.emplace(ids[i], static_cast<std::uint32_t>(i + 1));
    }
  }

  std::size_t slot = 0;
  for (const EventLossTable& elt : elts) {
    for (const EltRecord& r : elt.records()) {
      index.rows_[index.row_of(r.event) * slots + slot] = r.loss;
    }
    ++slot;
  }
  return index;
}

inline CombinedEltIndex combine_elts(std::span<const EventLossTable> elts) {
  return combine_elts_impl(elts);
}

inline CombinedEltIndex combine_elts(
    const std::vector<std::reference_wrapper<const EventLossTable>>& elts) {
  return combine_elts_impl(elts);
}

// Index over a layer's covered ELTs, in the layer's slot order.
inline CombinedEltIndex combine_layer_elts(const Portfolio& pf, const Layer& layer) {
  std::vector<std::reference_wrapper<const EventLossTable>> refs;
  refs.reserve(layer.covered_elts.size());
  for (std::uint32_t id : layer.covered_elts) {
    auto it = pf.elt_pool.find(id);
    if (it == pf.elt_pool.end()) {
      throw ReferentialError("layer " + std::to_string(layer.layer_id) +
                             " references unknown ELT " + std::to_string(id));
    }
    refs.emplace_back(it->second);
  }
  return combine_elts(refs);
}

inline std::span<const double> lookup_losses(const CombinedEltIndex& index, EventId e) {
  return index.lookup(e);
}

}  // namespace aggrisk

template <>
struct std::hash<aggrisk::EventId> {
  std::size_t operator()(aggrisk::EventId e) const noexcept {
    return std::hash<std::uint32_t>{}(e.value);
  }
};
