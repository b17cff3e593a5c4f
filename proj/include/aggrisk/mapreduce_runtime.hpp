#pragma once

// In-process map/shuffle/reduce runtime.
//
// A round runs `task_count` map tasks on `mapper_count` worker threads that
// drain a shared task queue. Each task writes its records into one bucket per
// reducer (in memory, or a spill file when the plan names a spill
// directory). Joining every mapper is the shuffle barrier: no reducer starts
// before the last map task has returned. Reducer r then receives bucket r of
// every task in task order, groups records by key, and calls the reduce
// function once per key. Output is independent of thread scheduling because
// bucket order is fixed by task index, not by completion order.

#include <aggrisk/error.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace aggrisk::mr {

struct ExecutionPlan {
  std::size_t mapper_count = 1;
  std::size_t reducer_count = 1;
  std::size_t chunk_count = 1;  // input splits per round
  // When set, map output goes through files under this directory.
  std::optional<std::filesystem::path> spill_dir;
};

inline void validate_plan(const ExecutionPlan& plan) {
  if (plan.mapper_count == 0 || plan.reducer_count == 0 || plan.chunk_count == 0) {
    throw PreconditionError("execution plan counts must be >= 1 (mappers " +
                            std::to_string(plan.mapper_count) + ", reducers " +
                            std::to_string(plan.reducer_count) + ", chunks " +
                            std::to_string(plan.chunk_count) + ")");
  }
}

// Wall-clock seconds per phase. Each component is the largest per-worker
// time spent in that phase, so no component can exceed the round's total.
struct PhaseProfile {
  double map_compute = 0.0;
  double map_io = 0.0;
  double shuffle = 0.0;
  double reduce_compute = 0.0;
  double reduce_io = 0.0;
  double total = 0.0;

  PhaseProfile& operator+=(const PhaseProfile& o) {
    map_compute += o.map_compute;
    map_io += o.map_io;
    shuffle += o.shuffle;
    reduce_compute += o.reduce_compute;
    reduce_io += o.reduce_io;
    total += o.total;
    return *this;
  }

  double max_component() const {
    return std::max({map_compute, map_io, shuffle, reduce_compute, reduce_io});
  }
};

struct RoundStats {
  std::size_t map_tasks = 0;
  std::size_t records_emitted = 0;
  std::size_t records_reduced = 0;
  std::size_t reduce_groups = 0;
};

// Optional instrumentation. Callbacks run on worker threads.
struct RoundHooks {
  // After each emitted batch: task index, batch size.
  std::function<void(std::size_t, std::size_t)> on_emit;
  // Before each reduce call: reducer index, key, group size.
  std::function<void(std::size_t, std::uint32_t, std::size_t)> on_reduce;
};

template <typename R>
concept KeyedRecord = std::is_trivially_copyable_v<R> && requires(const R& r) {
  { r.key() } -> std::convertible_to<std::uint32_t>;
};

// Routes a key to its reducer.
inline std::size_t partition(std::uint32_t key, std::size_t reducer_count) {
  if (reducer_count == 0) throw PreconditionError("reducer count must be >= 1");
  return key % reducer_count;
}

template <typename Out>
struct RoundResult {
  std::vector<std::pair<std::uint32_t, Out>> output;  // ascending key
  PhaseProfile profile;
  RoundStats stats;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& p, const char* mode) {
  FilePtr f(std::fopen(p.c_str(), mode));
  if (!f) throw IoError("cannot open spill file " + p.string());
  return f;
}

template <KeyedRecord R>
std::vector<R> read_spill(const std::filesystem::path& p) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(p, ec);
  if (ec) throw IoError("cannot stat spill file " + p.string());
  if (bytes % sizeof(R) != 0) throw ShuffleFault("spill file " + p.string() + " is torn");
  std::vector<R> out(bytes / sizeof(R));
  FilePtr f = open_file(p, "rb");
  if (!out.empty() && std::fread(out.data(), sizeof(R), out.size(), f.get()) != out.size()) {
    throw IoError("short read from spill file " + p.string());
  }
  return out;
}

// First error wins; later ones are dropped.
class ErrorSlot {
 public:
  void capture() {
    std::lock_guard lock(mu_);
    if (!error_) error_ = std::current_exception();
    failed_.store(true, std::memory_order_relaxed);
  }
  bool failed() const { return failed_.load(std::memory_order_relaxed); }
  void rethrow_if_failed() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
  std::atomic<bool> failed_{false};
};

inline std::atomic<std::uint64_t>& spill_round_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

}  // namespace detail

// Handed to map tasks. Routes each record to the bucket of its reducer.
// Time spent inside emit() is accounted as map I/O.
template <KeyedRecord R>
class Emitter {
 public:
  Emitter(std::size_t task, std::vector<std::vector<R>>& buckets,
          const std::filesystem::path* spill_dir, const RoundHooks* hooks)
      : task_(task), buckets_(buckets), spill_dir_(spill_dir), hooks_(hooks) {
    if (spill_dir_) files_.resize(buckets_.size());
  }

  void emit(std::span<const R> batch) {
    const auto t0 = detail::Clock::now();
    const std::size_t reducers = buckets_.size();
    if (spill_dir_) {
      for (const R& r : batch) {
        const std::size_t dst = partition(r.key(), reducers);
        if (!files_[dst]) files_[dst] = detail::open_file(spill_path(*spill_dir_, task_, dst), "wb");
        if (std::fwrite(&r, sizeof(R), 1, files_[dst].get()) != 1) {
          throw IoError("spill write failed");
        }
      }
    } else {
      for (const R& r : batch) buckets_[partition(r.key(), reducers)].push_back(r);
    }
    emitted_ += batch.size();
    io_seconds_ += detail::seconds_since(t0);
    if (hooks_ && hooks_->on_emit) hooks_->on_emit(task_, batch.size());
  }

  void emit(const R& r) { emit(std::span<const R>(&r, 1)); }

  // Capacity hint for the in-memory bucket of one reducer.
  void reserve(std::size_t reducer, std::size_t records) {
    if (!spill_dir_) buckets_[reducer].reserve(buckets_[reducer].size() + records);
  }

  void close() {
    const auto t0 = detail::Clock::now();
    for (auto& f : files_) {
      if (f && std::fflush(f.get()) != 0) throw IoError("spill flush failed");
      f.reset();
    }
    io_seconds_ += detail::seconds_since(t0);
  }

  std::size_t emitted() const noexcept { return emitted_; }
  double io_seconds() const noexcept { return io_seconds_; }

  static std::filesystem::path spill_path(const std::filesystem::path& dir, std::size_t task,
                                          std::size_t reducer) {
    return dir / ("task" + std::to_string(task) + "-r" + std::to_string(reducer) + ".bin");
  }

 private:
  std::size_t task_;
  std::vector<std::vector<R>>& buckets_;
  const std::filesystem::path* spill_dir_;
  const RoundHooks* hooks_;
  std::vector<detail::FilePtr> files_;
  std::size_t emitted_ = 0;
  double io_seconds_ = 0.0;
};

// Runs one map/shuffle/reduce round.
//   map_task(task_index, Emitter<R>&)
//   reduce_group(key, std::span<R> group) -> Out
// Records of one group arrive in (task, emission) order.
template <KeyedRecord R, typename MapTask, typename ReduceGroup>
auto run_round(std::size_t task_count, const ExecutionPlan& plan, MapTask&& map_task,
               ReduceGroup&& reduce_group, const RoundHooks* hooks = nullptr)
    -> RoundResult<std::invoke_result_t<ReduceGroup&, std::uint32_t, std::span<R>>> {
  using Out = std::invoke_result_t<ReduceGroup&, std::uint32_t, std::span<R>>;
  validate_plan(plan);
  const auto round_start = detail::Clock::now();
  const std::size_t reducers = plan.reducer_count;

  RoundResult<Out> result;
  result.stats.map_tasks = task_count;

  std::optional<std::filesystem::path> spill_dir;
  if (plan.spill_dir) {
    spill_dir = *plan.spill_dir /
                ("round-" + std::to_string(detail::spill_round_counter().fetch_add(1)));
    std::error_code ec;
    std::filesystem::create_directories(*spill_dir, ec);
    if (ec) throw IoError("cannot create spill directory " + spill_dir->string());
  }

  // buckets[task][reducer]
  std::vector<std::vector<std::vector<R>>> buckets(task_count,
                                                   std::vector<std::vector<R>>(reducers));

  // ---- map phase ----
  detail::ErrorSlot errors;
  std::atomic<std::size_t> next_task{0};
  std::atomic<std::size_t> emitted{0};
  const std::size_t mapper_threads = std::max<std::size_t>(1, std::min(plan.mapper_count, task_count));
  std::vector<double> map_compute(mapper_threads, 0.0), map_io(mapper_threads, 0.0);
  {
    std::vector<std::jthread> mappers;
    mappers.reserve(mapper_threads);
    for (std::size_t w = 0; w < mapper_threads; ++w) {
      mappers.emplace_back([&, w] {
        try {
          for (;;) {
            if (errors.failed()) return;
            const std::size_t task = next_task.fetch_add(1);
            if (task >= task_count) return;
            const auto t0 = detail::Clock::now();
            Emitter<R> emitter(task, buckets[task], spill_dir ? &*spill_dir : nullptr, hooks);
            map_task(task, emitter);
            emitter.close();
            const double elapsed = detail::seconds_since(t0);
            map_io[w] += emitter.io_seconds();
            map_compute[w] += std::max(0.0, elapsed - emitter.io_seconds());
            emitted.fetch_add(emitter.emitted(), std::memory_order_relaxed);
          }
        } catch (...) {
          errors.capture();
        }
      });
    }
  }  // barrier: every mapper joined
  errors.rethrow_if_failed();
  result.stats.records_emitted = emitted.load();

  // ---- shuffle: hand each reducer its buckets in task order ----
  const auto shuffle_start = detail::Clock::now();
  std::vector<std::vector<std::vector<R>*>> inbox(reducers);
  std::vector<std::vector<std::filesystem::path>> spill_inbox(reducers);
  for (std::size_t r = 0; r < reducers; ++r) {
    for (std::size_t t = 0; t < task_count; ++t) {
      if (spill_dir) {
        auto p = Emitter<R>::spill_path(*spill_dir, t, r);
        if (std::filesystem::exists(p)) spill_inbox[r].push_back(std::move(p));
      } else {
        inbox[r].push_back(&buckets[t][r]);
      }
    }
  }
  const double handoff_seconds = detail::seconds_since(shuffle_start);

  // ---- reduce phase ----
  std::vector<std::vector<std::pair<std::uint32_t, Out>>> outputs(reducers);
  std::vector<double> gather_s(reducers, 0.0), compute_s(reducers, 0.0), io_s(reducers, 0.0);
  std::vector<std::size_t> reduced(reducers, 0), groups(reducers, 0);
  {
    std::vector<std::jthread> workers;
    workers.reserve(reducers);
    for (std::size_t r = 0; r < reducers; ++r) {
      workers.emplace_back([&, r] {
        try {
          auto t0 = detail::Clock::now();
          std::vector<R> input;
          if (spill_dir) {
            for (const auto& p : spill_inbox[r]) {
              std::vector<R> part = detail::read_spill<R>(p);
              input.insert(input.end(), part.begin(), part.end());
              std::filesystem::remove(p);
            }
            io_s[r] += detail::seconds_since(t0);
          } else {
            std::size_t total = 0;
            for (const auto* b : inbox[r]) total += b->size();
            input.reserve(total);
            for (auto* b : inbox[r]) {
              input.insert(input.end(), b->begin(), b->end());
              std::vector<R>().swap(*b);
            }
            gather_s[r] += detail::seconds_since(t0);
          }

          t0 = detail::Clock::now();
          auto by_key = [](const R& a, const R& b) { return a.key() < b.key(); };
          if (!std::is_sorted(input.begin(), input.end(), by_key)) {
            std::stable_sort(input.begin(), input.end(), by_key);
          }
          std::vector<std::pair<std::uint32_t, Out>> local;
          std::size_t begin = 0;
          while (begin < input.size()) {
            if (errors.failed()) return;
            const std::uint32_t key = input[begin].key();
            std::size_t end = begin + 1;
            while (end < input.size() && input[end].key() == key) ++end;
            std::span<R> group(input.data() + begin, end - begin);
            if (hooks && hooks->on_reduce) hooks->on_reduce(r, key, group.size());
            local.emplace_back(key, reduce_group(key, group));
            reduced[r] += group.size();
            ++groups[r];
            begin = end;
          }
          compute_s[r] += detail::seconds_since(t0);

          t0 = detail::Clock::now();
          outputs[r] = std::move(local);
          io_s[r] += detail::seconds_since(t0);
        } catch (...) {
          errors.capture();
        }
      });
    }
  }
  errors.rethrow_if_failed();

  const auto merge_start = detail::Clock::now();
  std::size_t out_size = 0;
  for (const auto& o : outputs) out_size += o.size();
  result.output.reserve(out_size);
  for (auto& o : outputs) {
    for (auto& kv : o) result.output.push_back(std::move(kv));
  }
  std::sort(result.output.begin(), result.output.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const double merge_seconds = detail::seconds_since(merge_start);

  if (spill_dir) {
    std::error_code ec;
    std::filesystem::remove_all(*spill_dir, ec);
  }

  for (std::size_t r = 0; r < reducers; ++r) {
    result.stats.records_reduced += reduced[r];
    result.stats.reduce_groups += groups[r];
  }
  PhaseProfile& prof = result.profile;
  prof.map_compute = *std::max_element(map_compute.begin(), map_compute.end());
  prof.map_io = *std::max_element(map_io.begin(), map_io.end());
  prof.shuffle = handoff_seconds + *std::max_element(gather_s.begin(), gather_s.end());
  prof.reduce_compute = *std::max_element(compute_s.begin(), compute_s.end());
  prof.reduce_io = *std::max_element(io_s.begin(), io_s.end()) + merge_seconds;
  prof.total = detail::seconds_since(round_start);
  return result;
}

}  // namespace aggrisk::mr
